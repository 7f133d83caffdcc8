#include "islock/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "islock/json_format.hpp"

namespace islock {

namespace {

void check_pair(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask, Region region) {
  if (a.height != b.height || a.width != b.width) throw std::invalid_argument("image dimensions differ");
  if (region != Region::all) {
    if (!mask) throw std::invalid_argument("a mask is required for a masked region");
    if (mask->height != a.height || mask->width != a.width) throw std::invalid_argument("mask dimensions differ from image");
  }
}

bool selected(const RegionMask* mask, Region region, std::size_t i) {
  switch (region) {
    case Region::all: return true;
    case Region::foreground: return mask->bits[i];
    case Region::background: return !mask->bits[i];
  }
  return false;
}

}  // namespace

double mse(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask, Region region) {
  check_pair(a, b, mask, region);
  const std::size_t n = static_cast<std::size_t>(a.height) * a.width;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!selected(mask, region, i)) continue;
    double px = 0.0;
    for (int c = 0; c < PixelGrid::kChannels; ++c) {
      const double d = static_cast<double>(a.data[i * 3 + c]) - static_cast<double>(b.data[i * 3 + c]);
      px += d * d;
    }
    sum += px / PixelGrid::kChannels;
    ++count;
  }
  if (count == 0) throw empty_region_error("mse: selected region is empty");
  return sum / static_cast<double>(count);
}

double psnr(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask, Region region) {
  const double e = mse(a, b, mask, region);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

double ssim(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask, Region region) {
  check_pair(a, b, mask, region);
  const int h = a.height, w = a.width;
  if (h < kSsimWindow || w < kSsimWindow) throw empty_region_error("ssim: image smaller than one 8x8 window");
  constexpr double n = kSsimWindow * kSsimWindow;

  double total = 0.0;
  std::size_t windows = 0;
  for (int r0 = 0; r0 + kSsimWindow <= h; ++r0) {
    for (int c0 = 0; c0 + kSsimWindow <= w; ++c0) {
      if (region != Region::all) {
        bool inside = true;
        for (int r = r0; r < r0 + kSsimWindow && inside; ++r)
          for (int c = c0; c < c0 + kSsimWindow && inside; ++c)
            inside = selected(mask, region, static_cast<std::size_t>(r) * w + c);
        if (!inside) continue;
      }
      double window_sum = 0.0;
      for (int ch = 0; ch < PixelGrid::kChannels; ++ch) {
        double sa = 0.0, sb = 0.0;
        for (int r = r0; r < r0 + kSsimWindow; ++r)
          for (int c = c0; c < c0 + kSsimWindow; ++c) {
            sa += a.at(r, c, ch);
            sb += b.at(r, c, ch);
          }
        const double mu_a = sa / n, mu_b = sb / n;
        double vaa = 0.0, vbb = 0.0, vab = 0.0;
        for (int r = r0; r < r0 + kSsimWindow; ++r)
          for (int c = c0; c < c0 + kSsimWindow; ++c) {
            const double da = a.at(r, c, ch) - mu_a;
            const double db = b.at(r, c, ch) - mu_b;
            vaa += da * da;
            vbb += db * db;
            vab += da * db;
          }
        vaa /= n;
        vbb /= n;
        vab /= n;
        const double num = (2.0 * (mu_a * mu_b) + kSsimC1) * (2.0 * vab + kSsimC2);
        const double den = (mu_a * mu_a + mu_b * mu_b + kSsimC1) * (vaa + vbb + kSsimC2);
        window_sum += num / den;
      }
      total += window_sum / PixelGrid::kChannels;
      ++windows;
    }
  }
  if (windows == 0) throw empty_region_error("ssim: no 8x8 window lies fully inside the selected region");
  return total / static_cast<double>(windows);
}

double structure_proxy(const TokenGrid& a, const TokenGrid& b) {
  if (a.height != b.height || a.width != b.width) throw std::invalid_argument("structure_proxy: grid dimensions differ");
  std::size_t edges = 0, differ = 0;
  for (int r = 0; r < a.height; ++r) {
    for (int c = 0; c < a.width; ++c) {
      if (c + 1 < a.width) {
        ++edges;
        differ += ((a.at(r, c) != a.at(r, c + 1)) != (b.at(r, c) != b.at(r, c + 1))) ? 1 : 0;
      }
      if (r + 1 < a.height) {
        ++edges;
        differ += ((a.at(r, c) != a.at(r + 1, c)) != (b.at(r, c) != b.at(r + 1, c))) ? 1 : 0;
      }
    }
  }
  return edges == 0 ? 0.0 : static_cast<double>(differ) / static_cast<double>(edges);
}

double edit_fidelity(const TokenGrid& result, const Prompt& prompt_edit, const Codebook& cb, const RegionMask& mask) {
  if (mask.height != result.height || mask.width != result.width)
    throw std::invalid_argument("edit_fidelity: mask dimensions differ from grid");
  if (cb.size() < kRequiredCodebookSize) throw std::invalid_argument("edit_fidelity: codebook too small for the scene tokens");
  const auto wanted = foreground_tokens(prompt_edit);
  std::size_t inside = 0, hits = 0;
  for (std::size_t i = 0; i < result.tokens.size(); ++i) {
    if (!mask.bits[i]) continue;
    ++inside;
    hits += std::find(wanted.begin(), wanted.end(), result.tokens[i]) != wanted.end() ? 1 : 0;
  }
  if (inside == 0) throw empty_region_error("edit_fidelity: empty mask");
  return static_cast<double>(hits) / static_cast<double>(inside);
}

MetricReport make_report(const Codebook& cb, const TokenGrid& source, const TokenGrid& result, const RegionMask& mask,
                         const Prompt& prompt_edit) {
  const PixelGrid a = cb.decode_grid(source);
  const PixelGrid b = cb.decode_grid(result);
  MetricReport r;
  r.ssim = ssim(a, b);
  r.psnr = psnr(a, b);
  r.mse = mse(a, b);
  // Regional metrics a mask cannot support are reported as NaN.
  auto or_nan = [](auto f) {
    try {
      return f();
    } catch (const empty_region_error&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  r.bg_ssim = or_nan([&] { return ssim(a, b, &mask, Region::background); });
  r.bg_psnr = or_nan([&] { return psnr(a, b, &mask, Region::background); });
  r.bg_mse = or_nan([&] { return mse(a, b, &mask, Region::background); });
  r.structure_proxy = structure_proxy(source, result);
  r.edit_fidelity = or_nan([&] { return edit_fidelity(result, prompt_edit, cb, mask); });
  return r;
}

nlohmann::json report_to_json(const MetricReport& r) {
  return {{"ssim", canonical_number(r.ssim)},
          {"psnr", canonical_number(r.psnr)},
          {"mse", canonical_number(r.mse)},
          {"bg_ssim", canonical_number(r.bg_ssim)},
          {"bg_psnr", canonical_number(r.bg_psnr)},
          {"bg_mse", canonical_number(r.bg_mse)},
          {"structure_proxy", canonical_number(r.structure_proxy)},
          {"edit_fidelity", canonical_number(r.edit_fidelity)}};
}

}  // namespace islock
