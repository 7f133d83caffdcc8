#include "islock/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "islock/rng.hpp"

namespace islock {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

Codebook::Codebook(int size, int dim, std::int64_t seed) : size_(size), dim_(dim), seed_(seed) {
  if (size < 2) throw std::invalid_argument("codebook size must be >= 2");
  if (dim < 1) throw std::invalid_argument("codebook dim must be >= 1");
  // A 1-D unit sphere has exactly two points.
  if (dim == 1 && size > 2) throw std::invalid_argument("codebook dim 1 admits at most 2 distinct tokens");

  Engine rng(static_cast<std::uint64_t>(seed));
  embeddings_.resize(static_cast<std::size_t>(size) * dim);
  std::vector<double> row(dim);
  for (int t = 0; t < size; ++t) {
    for (;;) {
      double norm_sq = 0.0;
      for (int k = 0; k < dim; ++k) {
        row[k] = 2.0 * uniform01(rng) - 1.0;
        norm_sq += row[k] * row[k];
      }
      const double norm = std::sqrt(norm_sq);
      if (norm < 1e-6) continue;
      for (int k = 0; k < dim; ++k) row[k] /= norm;

      bool duplicate = false;
      for (int prev = 0; prev < t && !duplicate; ++prev) {
        const double* p = &embeddings_[static_cast<std::size_t>(prev) * dim];
        duplicate = std::equal(row.begin(), row.end(), p);
      }
      if (!duplicate) break;
    }
    std::copy(row.begin(), row.end(), embeddings_.begin() + static_cast<std::ptrdiff_t>(t) * dim);
  }
  build_palette();
}

void Codebook::build_palette() {
  palette_.resize(static_cast<std::size_t>(size_) * 3);
  std::unordered_set<std::uint32_t> used;
  for (int t = 0; t < size_; ++t) {
    std::array<int, 3> rgb{};
    for (int c = 0; c < 3; ++c) {
      const double x = embeddings_[static_cast<std::size_t>(t) * dim_ + (c % dim_)];
      rgb[c] = static_cast<int>(std::lround((x + 1.0) * 0.5 * 255.0));
    }
    auto pack = [&] { return static_cast<std::uint32_t>(rgb[0] << 16 | rgb[1] << 8 | rgb[2]); };
    for (int step = 0; used.count(pack()) != 0; ++step) {
      int& ch = rgb[step % 3];
      ch = (ch + 1) % 256;
    }
    used.insert(pack());
    for (int c = 0; c < 3; ++c) palette_[static_cast<std::size_t>(t) * 3 + c] = static_cast<std::uint8_t>(rgb[c]);
  }
}

std::span<const double> Codebook::embed(TokenId token) const {
  if (token >= static_cast<TokenId>(size_))
    throw std::out_of_range("token " + std::to_string(token) + " outside codebook of size " + std::to_string(size_));
  return {embeddings_.data() + static_cast<std::size_t>(token) * dim_, static_cast<std::size_t>(dim_)};
}

std::array<std::uint8_t, 3> Codebook::color(TokenId token) const {
  if (token >= static_cast<TokenId>(size_))
    throw std::out_of_range("token " + std::to_string(token) + " outside codebook of size " + std::to_string(size_));
  const std::size_t o = static_cast<std::size_t>(token) * 3;
  return {palette_[o], palette_[o + 1], palette_[o + 2]};
}

TokenId Codebook::quantize(std::span<const double> v) const {
  if (v.size() != static_cast<std::size_t>(dim_)) throw std::invalid_argument("quantize: vector has wrong dimension");
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument("quantize: non-finite entry");
  TokenId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int t = 0; t < size_; ++t) {
    const double d = squared_distance(v, embed(static_cast<TokenId>(t)));
    if (d < best_d) {
      best_d = d;
      best = static_cast<TokenId>(t);
    }
  }
  return best;
}

PixelGrid Codebook::decode_grid(const TokenGrid& grid) const {
  PixelGrid img(grid.height, grid.width);
  for (std::size_t i = 0; i < grid.tokens.size(); ++i) {
    const TokenId t = grid.tokens[i];
    if (t >= static_cast<TokenId>(size_)) {
      const auto row = i / static_cast<std::size_t>(grid.width);
      const auto col = i % static_cast<std::size_t>(grid.width);
      throw std::out_of_range("decode_grid: token " + std::to_string(t) + " at (" + std::to_string(row) + "," +
                              std::to_string(col) + ") outside codebook");
    }
    for (int c = 0; c < 3; ++c) img.data[i * 3 + c] = palette_[static_cast<std::size_t>(t) * 3 + c];
  }
  return img;
}

nlohmann::json Codebook::to_json() const {
  return nlohmann::json{{"format", "islock-codebook"}, {"version", 1},         {"size", size_},
                        {"dim", dim_},                 {"seed", seed_},       {"embeddings", embeddings_},
                        {"palette", palette_}};
}

Codebook Codebook::from_json(const nlohmann::json& j) {
  if (j.at("format") != "islock-codebook" || j.at("version") != 1)
    throw std::invalid_argument("not an islock codebook (v1) document");
  Codebook cb;
  cb.size_ = j.at("size").get<int>();
  cb.dim_ = j.at("dim").get<int>();
  cb.seed_ = j.at("seed").get<std::int64_t>();
  cb.embeddings_ = j.at("embeddings").get<std::vector<double>>();
  cb.palette_ = j.at("palette").get<std::vector<std::uint8_t>>();
  if (cb.size_ < 2 || cb.dim_ < 1 || cb.embeddings_.size() != static_cast<std::size_t>(cb.size_) * cb.dim_ ||
      cb.palette_.size() != static_cast<std::size_t>(cb.size_) * 3)
    throw std::invalid_argument("codebook document has inconsistent shapes");
  return cb;
}

void Codebook::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << to_json().dump() << '\n';
}

Codebook Codebook::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return from_json(nlohmann::json::parse(in));
}

}  // namespace islock
