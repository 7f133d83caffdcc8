#pragma once

#include "islock/codebook.hpp"
#include "islock/grid.hpp"
#include "islock/scene.hpp"

namespace islock {

enum class Region { all, background, foreground };

// Image metrics over 8-bit RGB grids. `mask` is required unless region == all;
// background selects mask-false pixels, foreground mask-true pixels.

/// Mean over selected pixels of the channel-averaged squared difference.
double mse(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask = nullptr, Region region = Region::all);

/// 10·log10(255² / mse); +inf for identical selections.
double psnr(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask = nullptr, Region region = Region::all);

inline constexpr int kSsimWindow = 8;
inline constexpr double kSsimC1 = (0.01 * 255.0) * (0.01 * 255.0);
inline constexpr double kSsimC2 = (0.03 * 255.0) * (0.03 * 255.0);

/// Single-scale SSIM: uniform 8×8 windows, stride 1, population moments,
/// computed per channel and averaged over channels and windows. A masked
/// region keeps only windows lying entirely inside it.
double ssim(const PixelGrid& a, const PixelGrid& b, const RegionMask* mask = nullptr, Region region = Region::all);

/// Relabeling-invariant structure distance: Hamming distance between the two
/// grids' 4-neighbor "tokens differ" edge maps, divided by the edge count.
double structure_proxy(const TokenGrid& a, const TokenGrid& b);

/// Fraction of masked positions holding a foreground token of `prompt_edit`
/// (its object/color/style token set).
double edit_fidelity(const TokenGrid& result, const Prompt& prompt_edit, const Codebook& cb, const RegionMask& mask);

struct MetricReport {
  double ssim = 0.0;
  double psnr = 0.0;
  double mse = 0.0;
  double bg_ssim = 0.0;
  double bg_psnr = 0.0;
  double bg_mse = 0.0;
  double structure_proxy = 0.0;
  double edit_fidelity = 0.0;
};

/// Compares `result` against `source` (the anchor). The background is the
/// complement of `mask`; edit fidelity is scored inside `mask`. Regional
/// metrics are NaN when the region is empty or holds no 8x8 window.
MetricReport make_report(const Codebook& cb, const TokenGrid& source, const TokenGrid& result, const RegionMask& mask,
                         const Prompt& prompt_edit);

nlohmann::json report_to_json(const MetricReport& r);

}  // namespace islock
