#include "islock/scene.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "islock/parallel.hpp"
#include "islock/rng.hpp"

namespace islock {

namespace {

// Per-style multiplier for the object-slot permutation; all odd, so each is a
// bijection on Z/8. Style 0 is the identity.
constexpr std::array<int, kStyles> kStyleMultiplier{1, 3, 5, 7};

int style_slot(int style, int object) { return (object * kStyleMultiplier[style] + 3 * style) % kObjects; }

bool in_disk(double u, double v, double cu, double cv, double r) {
  const double du = u - cu, dv = v - cv;
  return du * du + dv * dv <= r * r;
}

// Background texture: true selects the alternate token.
bool texture_alt(int background, int row, int col) {
  switch (background) {
    case 1: return (row / 4) % 2 == 1;
    case 2: return (col / 4) % 2 == 1;
    case 3: return ((row / 4) + (col / 4)) % 2 == 1;
    default: return false;
  }
}

void check_scene_args(const Prompt& prompt, const Codebook& cb, int h, int w) {
  if (!is_valid(prompt)) throw std::invalid_argument("prompt attribute out of range: " + to_string(prompt));
  if (h < kMinSceneSide || w < kMinSceneSide)
    throw std::invalid_argument("scene grid must be at least 8x8 to fit the minimum object footprint");
  if (cb.size() < kRequiredCodebookSize)
    throw std::invalid_argument("codebook must hold at least " + std::to_string(kRequiredCodebookSize) + " tokens");
}

}  // namespace

bool is_valid(const Prompt& p) noexcept {
  return p.object >= 0 && p.object < kObjects && p.color >= 0 && p.color < kColors && p.background >= 0 &&
         p.background < kBackgrounds && p.style >= 0 && p.style < kStyles;
}

int prompt_index(const Prompt& p) {
  if (!is_valid(p)) throw std::invalid_argument("prompt attribute out of range: " + to_string(p));
  return ((p.object * kColors + p.color) * kBackgrounds + p.background) * kStyles + p.style;
}

Prompt prompt_from_index(int index) {
  if (index < 0 || index >= kPromptCount) throw std::out_of_range("prompt index out of range");
  Prompt p;
  p.style = index % kStyles;
  index /= kStyles;
  p.background = index % kBackgrounds;
  index /= kBackgrounds;
  p.color = index % kColors;
  p.object = index / kColors;
  return p;
}

Prompt parse_prompt(std::string_view text) {
  std::array<int, 4> v{};
  std::size_t field = 0;
  const char* p = text.data();
  const char* end = text.data() + text.size();
  while (field < 4) {
    auto [next, ec] = std::from_chars(p, end, v[field]);
    if (ec != std::errc{}) break;
    ++field;
    p = next;
    if (field < 4) {
      if (p == end || *p != ':') break;
      ++p;
    }
  }
  if (field != 4 || p != end) throw std::invalid_argument("prompt must look like obj:color:bg:style, got '" + std::string(text) + "'");
  Prompt out{v[0], v[1], v[2], v[3]};
  if (!is_valid(out)) throw std::invalid_argument("prompt attribute out of range: " + std::string(text));
  return out;
}

std::string to_string(const Prompt& p) {
  return std::to_string(p.object) + ":" + std::to_string(p.color) + ":" + std::to_string(p.background) + ":" +
         std::to_string(p.style);
}

TokenId foreground_token(int object, int color, int style) {
  return static_cast<TokenId>(color * kObjects + style_slot(style, object));
}

TokenId background_token(int background, int style) {
  return static_cast<TokenId>(kObjects * kColors + background * kStyles + style);
}

std::vector<TokenId> foreground_tokens(const Prompt& p) { return {foreground_token(p.object, p.color, p.style)}; }

std::vector<TokenId> background_tokens(const Prompt& p) {
  const TokenId base = background_token(p.background, p.style);
  if (p.background == 0) return {base};
  const TokenId alt = background_token(p.background, (p.style + 1) % kStyles);
  return {std::min(base, alt), std::max(base, alt)};
}

bool is_foreground_token(TokenId t) noexcept { return t < static_cast<TokenId>(kObjects * kColors); }

Layout canonical_layout(int h, int w) {
  Layout l;
  l.half_h = std::max(2, static_cast<int>(std::lround(h / 4.0)));
  l.half_w = std::max(2, static_cast<int>(std::lround(w / 4.0)));
  const int center_row = static_cast<int>(std::lround(0.4 * h));
  const int center_col = w / 2;
  l.top = center_row - l.half_h;
  l.left = center_col - l.half_w;
  return l;
}

Layout jittered_layout(int h, int w, std::int64_t seed) {
  Engine rng(derive_seed({static_cast<std::uint64_t>(seed), 0x4C41594FULL}));
  const int d = static_cast<int>(uniform_below(rng, 3)) - 1;
  Layout l = canonical_layout(h, w);
  l.top = std::clamp(l.top + d, 0, h - 2 * l.half_h);
  l.left = std::clamp(l.left + d, 0, w - 2 * l.half_w);
  return l;
}

bool silhouette_contains(int object, const Layout& l, int row, int col) {
  if (row < l.top || row >= l.top + 2 * l.half_h || col < l.left || col >= l.left + 2 * l.half_w) return false;
  // Pixel-center coordinates normalized to [-1, 1] over the box; v grows downward.
  const double u = (col + 0.5 - (l.left + l.half_w)) / l.half_w;
  const double v = (row + 0.5 - (l.top + l.half_h)) / l.half_h;
  switch (object) {
    case 0: return true;                                    // rectangle
    case 1: return in_disk(u, v, 0, 0, 1.0);                // disk
    case 2: return std::abs(u) <= (v + 1.0) * 0.5 + 0.125;  // triangle, apex up
    case 3: return in_disk(u, v, 0, 0, 1.0) && !in_disk(u, v, 0, 0, 0.5);  // ring
    case 4: return std::abs(u) <= 0.4 || std::abs(v) <= 0.4;               // cross
    case 5: return v >= 0.0 ? std::abs(u) <= 0.8 : std::abs(u) <= v + 1.0;  // house
    case 6:                                                                  // dumbbell
      return in_disk(u, v, -0.55, 0, 0.45) || in_disk(u, v, 0.55, 0, 0.45) || std::abs(v) <= 0.2;
    case 7: return in_disk(u, v, 0, 0.4, 0.6) || in_disk(u, v, 0, -0.55, 0.45);  // snowman
    default: throw std::invalid_argument("unknown object id");
  }
}

Scene scene_render_at(const Prompt& prompt, const Codebook& cb, int h, int w, const Layout& layout) {
  check_scene_args(prompt, cb, h, w);
  Scene s{TokenGrid(h, w), RegionMask(h, w)};
  const TokenId fg = foreground_token(prompt.object, prompt.color, prompt.style);
  const TokenId bg = background_token(prompt.background, prompt.style);
  const TokenId bg_alt = background_token(prompt.background, (prompt.style + 1) % kStyles);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * w + c;
      if (silhouette_contains(prompt.object, layout, r, c)) {
        s.grid.tokens[i] = fg;
        s.mask.bits[i] = true;
      } else {
        s.grid.tokens[i] = texture_alt(prompt.background, r, c) ? bg_alt : bg;
      }
    }
  }
  // Mask area bounds hold for every object, size >= 8 and jitter (see tests).
  const double area = static_cast<double>(s.mask.count()) / static_cast<double>(s.mask.size());
  if (area < 0.05 || area > 0.60) throw std::logic_error("scene mask area outside [5%, 60%]");
  return s;
}

Scene scene_render(const Prompt& prompt, const Codebook& cb, int h, int w, std::int64_t seed) {
  check_scene_args(prompt, cb, h, w);
  return scene_render_at(prompt, cb, h, w, jittered_layout(h, w, seed));
}

Scene modal_render(const Prompt& prompt, const Codebook& cb, int h, int w) {
  check_scene_args(prompt, cb, h, w);
  return scene_render_at(prompt, cb, h, w, canonical_layout(h, w));
}

RegionMask foreground_mask(const TokenGrid& grid, const Prompt& prompt) {
  const auto fg = foreground_tokens(prompt);
  RegionMask m(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.tokens.size(); ++i)
    m.bits[i] = std::find(fg.begin(), fg.end(), grid.tokens[i]) != fg.end();
  return m;
}

RegionMask object_mask(const TokenGrid& grid) {
  RegionMask m(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.tokens.size(); ++i) m.bits[i] = is_foreground_token(grid.tokens[i]);
  return m;
}

std::int64_t corpus_variant_seed(std::int64_t corpus_seed, int p, int v) {
  return static_cast<std::int64_t>(derive_seed({static_cast<std::uint64_t>(corpus_seed), static_cast<std::uint64_t>(p),
                                                static_cast<std::uint64_t>(v)}));
}

Corpus corpus_build(const Codebook& cb, int h, int w, int n_per_prompt, std::int64_t seed) {
  if (n_per_prompt < 1) throw std::invalid_argument("n_per_prompt must be >= 1");
  Corpus corpus(static_cast<std::size_t>(kPromptCount) * n_per_prompt);
  parallel_for(static_cast<std::size_t>(kPromptCount), [&](std::size_t p) {
    const Prompt prompt = prompt_from_index(static_cast<int>(p));
    for (int v = 0; v < n_per_prompt; ++v) {
      Scene s = scene_render(prompt, cb, h, w, corpus_variant_seed(seed, static_cast<int>(p), v));
      corpus[p * n_per_prompt + v] = CorpusEntry{prompt, std::move(s.grid)};
    }
  });
  return corpus;
}

std::uint64_t corpus_hash(const Corpus& corpus) {
  std::uint64_t h = mix64(corpus.size());
  for (const auto& e : corpus) {
    h = mix64(h ^ static_cast<std::uint64_t>(prompt_index(e.prompt)));
    h = mix64(h ^ (static_cast<std::uint64_t>(e.grid.height) << 32 | static_cast<std::uint32_t>(e.grid.width)));
    for (TokenId t : e.grid.tokens) h = mix64(h ^ t);
  }
  return h;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << nlohmann::json{{"format", "islock-corpus"}, {"version", 1}, {"count", corpus.size()}}.dump() << '\n';
  for (const auto& e : corpus) {
    nlohmann::json rec{{"prompt", {e.prompt.object, e.prompt.color, e.prompt.background, e.prompt.style}},
                       {"h", e.grid.height},
                       {"w", e.grid.width},
                       {"tokens", e.grid.tokens}};
    out << rec.dump() << '\n';
  }
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty corpus file");
  const auto header = nlohmann::json::parse(line);
  if (header.at("format") != "islock-corpus" || header.at("version") != 1)
    throw std::invalid_argument("not an islock corpus (v1) file");
  const auto count = header.at("count").get<std::size_t>();
  Corpus corpus;
  corpus.reserve(count);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    const auto a = rec.at("prompt").get<std::array<int, 4>>();
    Prompt p{a[0], a[1], a[2], a[3]};
    if (!is_valid(p)) throw std::invalid_argument("corpus record has invalid prompt");
    corpus.push_back({p, TokenGrid(rec.at("h").get<int>(), rec.at("w").get<int>(),
                                   rec.at("tokens").get<std::vector<TokenId>>())});
  }
  if (corpus.size() != count) throw std::invalid_argument("corpus record count does not match header");
  return corpus;
}

}  // namespace islock
