#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "islock/grid.hpp"

namespace islock {

/// Discrete token vocabulary: one unit-norm embedding row and one display
/// color per token. Immutable after construction.
///
/// Rows are drawn coordinate-wise uniform in [-1, 1) from mt19937_64 (53-bit
/// mantissa conversion), normalized to unit length, and redrawn if the norm
/// is below 1e-6 or the row duplicates an earlier one. The palette maps the
/// first three coordinates (cycled when dim < 3) from [-1, 1] to [0, 255];
/// colliding colors are resolved by stepping channel values until free.
class Codebook {
 public:
  Codebook(int size, int dim, std::int64_t seed);

  int size() const noexcept { return size_; }
  int dim() const noexcept { return dim_; }
  std::int64_t seed() const noexcept { return seed_; }

  std::span<const double> embed(TokenId token) const;
  std::array<std::uint8_t, 3> color(TokenId token) const;

  /// Nearest embedding by squared Euclidean distance; ties go to the lowest id.
  TokenId quantize(std::span<const double> v) const;

  PixelGrid decode_grid(const TokenGrid& grid) const;

  const std::vector<double>& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::uint8_t>& palette() const noexcept { return palette_; }

  nlohmann::json to_json() const;
  static Codebook from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static Codebook load(const std::filesystem::path& path);

  bool operator==(const Codebook&) const = default;

 private:
  Codebook() = default;
  void build_palette();

  int size_ = 0;
  int dim_ = 0;
  std::int64_t seed_ = 0;
  std::vector<double> embeddings_;     // size × dim, row-major
  std::vector<std::uint8_t> palette_;  // size × 3
};

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace islock
