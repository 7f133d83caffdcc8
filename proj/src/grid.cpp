#include "islock/grid.hpp"

#include <fstream>
#include <sstream>

namespace islock {

TokenGrid::TokenGrid(int h, int w, TokenId fill) : height(h), width(w) {
  if (h < 0 || w < 0) throw std::invalid_argument("TokenGrid: negative dimension");
  tokens.assign(static_cast<std::size_t>(h) * w, fill);
}

TokenGrid::TokenGrid(int h, int w, std::vector<TokenId> toks) : height(h), width(w), tokens(std::move(toks)) {
  if (h < 0 || w < 0) throw std::invalid_argument("TokenGrid: negative dimension");
  if (tokens.size() != static_cast<std::size_t>(h) * w)
    throw std::invalid_argument("TokenGrid: token count does not match h*w");
}

std::size_t RegionMask::count() const noexcept {
  std::size_t n = 0;
  for (bool b : bits) n += b ? 1 : 0;
  return n;
}

RegionMask RegionMask::inverted() const {
  RegionMask out = *this;
  out.bits.flip();
  return out;
}

RegionMask RegionMask::operator|(const RegionMask& other) const {
  if (other.height != height || other.width != width)
    throw std::invalid_argument("RegionMask: dimension mismatch");
  RegionMask out = *this;
  for (std::size_t i = 0; i < bits.size(); ++i) out.bits[i] = bits[i] || other.bits[i];
  return out;
}

std::string encode_ppm(const PixelGrid& img) {
  std::string out = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

PixelGrid decode_ppm(const std::string& bytes) {
  std::istringstream in(bytes);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw std::invalid_argument("decode_ppm: bad header");
  in.get();  // single whitespace byte after maxval
  PixelGrid img(h, w);
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw std::invalid_argument("decode_ppm: truncated pixel data");
  return img;
}

void write_ppm(const PixelGrid& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_ppm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

nlohmann::json grid_to_json(const TokenGrid& grid) {
  return nlohmann::json{{"h", grid.height}, {"w", grid.width}, {"tokens", grid.tokens}};
}

TokenGrid grid_from_json(const nlohmann::json& j) {
  return TokenGrid(j.at("h").get<int>(), j.at("w").get<int>(), j.at("tokens").get<std::vector<TokenId>>());
}

void save_grid(const TokenGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << grid_to_json(grid).dump() << '\n';
}

TokenGrid load_grid(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return grid_from_json(nlohmann::json::parse(in));
}

}  // namespace islock
