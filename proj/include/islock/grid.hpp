#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace islock {

using TokenId = std::uint32_t;

/// Raised when a metric or score is asked for over a region with no elements.
class empty_region_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// h×w raster of token ids, row-major.
struct TokenGrid {
  int height = 0;
  int width = 0;
  std::vector<TokenId> tokens;

  TokenGrid() = default;
  TokenGrid(int h, int w, TokenId fill = 0);
  TokenGrid(int h, int w, std::vector<TokenId> toks);

  std::size_t size() const noexcept { return tokens.size(); }
  TokenId at(int row, int col) const { return tokens[static_cast<std::size_t>(row) * width + col]; }
  TokenId& at(int row, int col) { return tokens[static_cast<std::size_t>(row) * width + col]; }

  bool operator==(const TokenGrid&) const = default;
};

/// Boolean h×w mask; true marks foreground (edit-relevant) positions.
struct RegionMask {
  int height = 0;
  int width = 0;
  std::vector<bool> bits;

  RegionMask() = default;
  RegionMask(int h, int w, bool fill = false)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t size() const noexcept { return bits.size(); }
  std::size_t count() const noexcept;
  bool at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }
  RegionMask inverted() const;
  RegionMask operator|(const RegionMask& other) const;

  bool operator==(const RegionMask&) const = default;
};

/// 8-bit RGB image, row-major, interleaved channels.
struct PixelGrid {
  static constexpr int kChannels = 3;
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  PixelGrid() = default;
  PixelGrid(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w * kChannels, 0) {}

  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * kChannels + ch];
  }

  bool operator==(const PixelGrid&) const = default;
};

// Binary PPM (P6): "P6\n<w> <h>\n255\n" followed by raw RGB bytes.
std::string encode_ppm(const PixelGrid& img);
PixelGrid decode_ppm(const std::string& bytes);
void write_ppm(const PixelGrid& img, const std::filesystem::path& path);

nlohmann::json grid_to_json(const TokenGrid& grid);
TokenGrid grid_from_json(const nlohmann::json& j);
void save_grid(const TokenGrid& grid, const std::filesystem::path& path);
TokenGrid load_grid(const std::filesystem::path& path);

}  // namespace islock
