#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "islock/codebook.hpp"
#include "islock/grid.hpp"

namespace islock {

inline constexpr int kObjects = 8;
inline constexpr int kColors = 8;
inline constexpr int kBackgrounds = 4;
inline constexpr int kStyles = 4;
inline constexpr int kPromptCount = kObjects * kColors * kBackgrounds * kStyles;

/// Smallest codebook that holds every attribute token.
inline constexpr int kRequiredCodebookSize = kObjects * kColors + kBackgrounds * kStyles;

inline constexpr int kMinSceneSide = 8;

/// Discrete conditioning signal: (object, color, background, style).
struct Prompt {
  int object = 0;
  int color = 0;
  int background = 0;
  int style = 0;

  bool operator==(const Prompt&) const = default;
  auto operator<=>(const Prompt&) const = default;
};

bool is_valid(const Prompt& p) noexcept;
/// Mixed-radix index in [0, kPromptCount); lexicographic in (object, color, background, style).
int prompt_index(const Prompt& p);
Prompt prompt_from_index(int index);
/// Parses "obj:color:bg:style".
Prompt parse_prompt(std::string_view text);
std::string to_string(const Prompt& p);

// Attribute-to-token mapping. Foreground tokens occupy ids [0, 64): color c
// owns the block [8c, 8c + 8) and style s permutes which slot of that block an
// object uses. Background tokens occupy [64, 80): background b owns
// [64 + 4b, 64 + 4b + 4), indexed by style. Textured backgrounds alternate
// between the style's token and the next style's token.
TokenId foreground_token(int object, int color, int style);
TokenId background_token(int background, int style);
/// Tokens scene_render emits inside the silhouette for this prompt.
std::vector<TokenId> foreground_tokens(const Prompt& p);
/// Tokens scene_render emits outside the silhouette for this prompt.
std::vector<TokenId> background_tokens(const Prompt& p);
bool is_foreground_token(TokenId t) noexcept;

/// Object placement: an axis-aligned box [top, top + 2*half_h) × [left, left + 2*half_w).
struct Layout {
  int top = 0;
  int left = 0;
  int half_h = 0;
  int half_w = 0;
  bool operator==(const Layout&) const = default;
};

/// Jitter-free placement: box centered at 40% of the height and 50% of the width,
/// half extents a quarter of each side.
Layout canonical_layout(int h, int w);
/// Canonical placement shifted diagonally by d ∈ {-1, 0, 1} rows and columns,
/// clamped inside the grid.
Layout jittered_layout(int h, int w, std::int64_t seed);

/// True when pixel (row, col) falls inside the silhouette of `object` in `layout`.
bool silhouette_contains(int object, const Layout& layout, int row, int col);

struct Scene {
  TokenGrid grid;
  RegionMask mask;
};

Scene scene_render(const Prompt& prompt, const Codebook& cb, int h, int w, std::int64_t seed);
Scene scene_render_at(const Prompt& prompt, const Codebook& cb, int h, int w, const Layout& layout);
/// The jitter-free rendering a well-trained model should reproduce greedily.
Scene modal_render(const Prompt& prompt, const Codebook& cb, int h, int w);

/// Positions whose token belongs to the prompt's foreground token set.
RegionMask foreground_mask(const TokenGrid& grid, const Prompt& prompt);
/// Positions holding any foreground token.
RegionMask object_mask(const TokenGrid& grid);

struct CorpusEntry {
  Prompt prompt;
  TokenGrid grid;
  bool operator==(const CorpusEntry&) const = default;
};

using Corpus = std::vector<CorpusEntry>;

/// Seed of variant `v` of prompt index `p` in a corpus built with `corpus_seed`.
std::int64_t corpus_variant_seed(std::int64_t corpus_seed, int p, int v);

/// Every prompt in index order, `n_per_prompt` seeded variants each.
Corpus corpus_build(const Codebook& cb, int h, int w, int n_per_prompt, std::int64_t seed);
std::uint64_t corpus_hash(const Corpus& corpus);

// JSON-lines: a header record {"format":"islock-corpus","version":1,"count":N}
// then one {"prompt":[o,c,b,s],"h":..,"w":..,"tokens":[...]} record per line.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace islock
