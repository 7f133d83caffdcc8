#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "islock/grid.hpp"
#include "islock/rng.hpp"
#include "islock/scene.hpp"

namespace islock {

inline constexpr TokenId kBoundary = 0xFFFFFFFFu;

/// Conditioning set for one raster step: the causal neighbors of `position`
/// plus the prompt. Neighbors outside the grid are kBoundary.
struct Context {
  int position = 0;
  int row = 0;
  int col = 0;
  TokenId west = kBoundary;
  TokenId north = kBoundary;
  TokenId northwest = kBoundary;
  Prompt prompt;
};

/// Context for step `position` of an h×w raster. Only tokens[0, position) are read.
Context make_context(std::span<const TokenId> tokens, int h, int w, int position, const Prompt& prompt);

struct ModelConfig {
  double smoothing = 0.01;                       // additive λ
  std::array<double, 3> weights{0.8, 0.15, 0.05};  // (neighborhood, west-only, prompt-unigram)
  // Key the neighborhood level on (row, col) as well. Without it a stationary
  // raster model never opens an object under greedy decoding.
  bool position_keyed = true;

  bool operator==(const ModelConfig&) const = default;
};

using TokenProb = std::pair<TokenId, double>;

/// Count-based conditional next-token model p(z_i | z_<i, c), interpolating
/// three additively smoothed levels:
///   neighborhood  (prompt, [row, col,] west, north, northwest)
///   west-only     (prompt, west)
///   unigram       (prompt)
/// An unseen context contributes the uniform distribution at its level.
class ARModel {
 public:
  struct Counts {
    std::vector<std::pair<TokenId, std::uint32_t>> entries;  // sorted by token
    std::uint64_t total = 0;
    void add(TokenId t);
    bool operator==(const Counts&) const = default;
  };

  struct NeighborhoodKey {
    std::uint16_t prompt = 0;
    std::uint16_t row = 0;
    std::uint16_t col = 0;
    TokenId west = kBoundary;
    TokenId north = kBoundary;
    TokenId northwest = kBoundary;
    bool operator==(const NeighborhoodKey&) const = default;
    auto operator<=>(const NeighborhoodKey&) const = default;
  };
  struct WestKey {
    std::uint16_t prompt = 0;
    TokenId west = kBoundary;
    bool operator==(const WestKey&) const = default;
    auto operator<=>(const WestKey&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const NeighborhoodKey& k) const noexcept;
    std::size_t operator()(const WestKey& k) const noexcept;
  };

  static ARModel train(const Corpus& corpus, int cb_size, const ModelConfig& cfg = {});

  int cb_size() const noexcept { return cb_size_; }
  const ModelConfig& config() const noexcept { return cfg_; }
  /// Grid size of the training corpus (the first entry's); 0 if unknown.
  int train_height() const noexcept { return train_h_; }
  int train_width() const noexcept { return train_w_; }

  std::vector<double> next_dist(const Context& ctx) const;
  /// Top-K by probability, ties by ascending token id.
  std::vector<TokenProb> top_k(const Context& ctx, int k) const;
  /// K draws without replacement, renormalizing after each; draw order.
  std::vector<TokenProb> sample_k(const Context& ctx, int k, std::int64_t rng_seed) const;

  std::size_t neighborhood_contexts() const noexcept { return neighborhood_.size(); }

  std::string serialize() const;
  static ARModel deserialize(const std::string& bytes);
  void save(const std::filesystem::path& path) const;
  static ARModel load(const std::filesystem::path& path);

  bool operator==(const ARModel&) const = default;

 private:
  NeighborhoodKey neighborhood_key(const Context& ctx) const;

  int cb_size_ = 0;
  ModelConfig cfg_;
  int train_h_ = 0;
  int train_w_ = 0;
  std::unordered_map<NeighborhoodKey, Counts, KeyHash> neighborhood_;
  std::unordered_map<WestKey, Counts, KeyHash> west_;
  std::unordered_map<std::uint16_t, Counts> unigram_;
};

std::vector<TokenProb> top_k_of(std::span<const double> dist, int k);
std::vector<TokenProb> sample_k_of(std::span<const double> dist, int k, std::int64_t rng_seed);
/// One categorical draw by inverse CDF in token-id order.
TokenId sample_one(std::span<const double> dist, Engine& rng);

}  // namespace islock
