#include "islock/armodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace islock {

Context make_context(std::span<const TokenId> tokens, int h, int w, int position, const Prompt& prompt) {
  if (h <= 0 || w <= 0 || position < 0 || position >= h * w) throw std::out_of_range("context position outside grid");
  Context ctx;
  ctx.position = position;
  ctx.row = position / w;
  ctx.col = position % w;
  ctx.prompt = prompt;
  auto at = [&](int r, int c) { return tokens[static_cast<std::size_t>(r) * w + c]; };
  if (ctx.col > 0) ctx.west = at(ctx.row, ctx.col - 1);
  if (ctx.row > 0) ctx.north = at(ctx.row - 1, ctx.col);
  if (ctx.row > 0 && ctx.col > 0) ctx.northwest = at(ctx.row - 1, ctx.col - 1);
  return ctx;
}

void ARModel::Counts::add(TokenId t) {
  auto it = std::lower_bound(entries.begin(), entries.end(), t,
                             [](const auto& e, TokenId v) { return e.first < v; });
  if (it != entries.end() && it->first == t)
    ++it->second;
  else
    entries.insert(it, {t, 1});
  ++total;
}

std::size_t ARModel::KeyHash::operator()(const NeighborhoodKey& k) const noexcept {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(k.prompt) << 32 | static_cast<std::uint64_t>(k.row) << 16 | k.col);
  h = mix64(h ^ (static_cast<std::uint64_t>(k.west) << 32 | k.north));
  return static_cast<std::size_t>(mix64(h ^ k.northwest));
}

std::size_t ARModel::KeyHash::operator()(const WestKey& k) const noexcept {
  return static_cast<std::size_t>(mix64(static_cast<std::uint64_t>(k.prompt) << 32 | k.west));
}

ARModel::NeighborhoodKey ARModel::neighborhood_key(const Context& ctx) const {
  NeighborhoodKey k;
  k.prompt = static_cast<std::uint16_t>(prompt_index(ctx.prompt));
  if (cfg_.position_keyed) {
    k.row = static_cast<std::uint16_t>(ctx.row);
    k.col = static_cast<std::uint16_t>(ctx.col);
  }
  k.west = ctx.west;
  k.north = ctx.north;
  k.northwest = ctx.northwest;
  return k;
}

ARModel ARModel::train(const Corpus& corpus, int cb_size, const ModelConfig& cfg) {
  if (corpus.empty()) throw std::invalid_argument("train: empty corpus");
  if (cb_size < 2) throw std::invalid_argument("train: cb_size must be >= 2");
  if (!(cfg.smoothing > 0.0)) throw std::invalid_argument("train: smoothing must be positive");
  double wsum = 0.0;
  for (double w : cfg.weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("train: interpolation weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9) throw std::invalid_argument("train: interpolation weights must sum to 1");

  ARModel m;
  m.cb_size_ = cb_size;
  m.cfg_ = cfg;
  m.train_h_ = corpus.front().grid.height;
  m.train_w_ = corpus.front().grid.width;
  for (const auto& entry : corpus) {
    const TokenGrid& g = entry.grid;
    if (g.height > 0xFFFF || g.width > 0xFFFF) throw std::invalid_argument("train: grid too large");
    const auto p = static_cast<std::uint16_t>(prompt_index(entry.prompt));
    for (int i = 0; i < static_cast<int>(g.size()); ++i) {
      const TokenId t = g.tokens[static_cast<std::size_t>(i)];
      if (t >= static_cast<TokenId>(cb_size)) throw std::invalid_argument("train: token outside codebook");
      const Context ctx = make_context(g.tokens, g.height, g.width, i, entry.prompt);
      m.neighborhood_[m.neighborhood_key(ctx)].add(t);
      m.west_[WestKey{p, ctx.west}].add(t);
      m.unigram_[p].add(t);
    }
  }
  return m;
}

std::vector<double> ARModel::next_dist(const Context& ctx) const {
  const auto V = static_cast<std::size_t>(cb_size_);
  const double lambda = cfg_.smoothing;
  std::vector<double> level[3];
  const Counts* found[3] = {nullptr, nullptr, nullptr};
  const auto p = static_cast<std::uint16_t>(prompt_index(ctx.prompt));
  if (auto it = neighborhood_.find(neighborhood_key(ctx)); it != neighborhood_.end()) found[0] = &it->second;
  if (auto it = west_.find(WestKey{p, ctx.west}); it != west_.end()) found[1] = &it->second;
  if (auto it = unigram_.find(p); it != unigram_.end()) found[2] = &it->second;

  for (int l = 0; l < 3; ++l) {
    const double w = cfg_.weights[static_cast<std::size_t>(l)];
    const double n = found[l] ? static_cast<double>(found[l]->total) : 0.0;
    const double denom = n + lambda * static_cast<double>(V);
    level[l].assign(V, w * lambda / denom);
    if (found[l])
      for (const auto& [tok, c] : found[l]->entries)
        if (tok < V) level[l][tok] = w * (static_cast<double>(c) + lambda) / denom;
  }
  std::vector<double> dist(V);
  for (std::size_t t = 0; t < V; ++t) dist[t] = level[0][t] + level[1][t] + level[2][t];
  return dist;
}

std::vector<TokenProb> top_k_of(std::span<const double> dist, int k) {
  if (k < 1) throw std::invalid_argument("top_k: K must be >= 1");
  std::vector<TokenId> ids(dist.size());
  std::iota(ids.begin(), ids.end(), TokenId{0});
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(), [&](TokenId a, TokenId b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return a < b;
  });
  std::vector<TokenProb> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(ids[i], dist[ids[i]]);
  return out;
}

TokenId sample_one(std::span<const double> dist, Engine& rng) {
  double total = 0.0;
  for (double p : dist) total += p;
  const double u = uniform01(rng) * total;
  double acc = 0.0;
  TokenId last_positive = 0;
  for (std::size_t t = 0; t < dist.size(); ++t) {
    if (dist[t] <= 0.0) continue;
    acc += dist[t];
    last_positive = static_cast<TokenId>(t);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

std::vector<TokenProb> sample_k_of(std::span<const double> dist, int k, std::int64_t rng_seed) {
  if (k < 1) throw std::invalid_argument("sample_k: K must be >= 1");
  Engine rng(static_cast<std::uint64_t>(rng_seed));
  std::vector<double> remaining(dist.begin(), dist.end());
  std::size_t positive = 0;
  for (double p : remaining) positive += p > 0.0 ? 1 : 0;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), positive);
  std::vector<TokenProb> out;
  out.reserve(n);
  for (std::size_t d = 0; d < n; ++d) {
    const TokenId t = sample_one(remaining, rng);
    out.emplace_back(t, dist[t]);
    remaining[t] = 0.0;
  }
  return out;
}

std::vector<TokenProb> ARModel::top_k(const Context& ctx, int k) const { return top_k_of(next_dist(ctx), k); }

std::vector<TokenProb> ARModel::sample_k(const Context& ctx, int k, std::int64_t rng_seed) const {
  return sample_k_of(next_dist(ctx), k, rng_seed);
}

// --- serialization -----------------------------------------------------------
//
// Little-endian binary:
//   magic "ISLKMDL1", u32 cb_size, f64 smoothing, 3×f64 weights, u8 position_keyed,
//   i32 train_h, i32 train_w, then three sections (neighborhood, west, unigram),
//   each u64 count followed by key fields and a counts record
//   (u32 n_entries, n × (u32 token, u32 count)). Keys are written in ascending order.

namespace {

constexpr char kMagic[8] = {'I', 'S', 'L', 'K', 'M', 'D', 'L', '1'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void counts(const ARModel::Counts& c) {
    u32(static_cast<std::uint32_t>(c.entries.size()));
    for (const auto& [t, n] : c.entries) {
      u32(t);
      u32(n);
    }
  }
  std::string take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(le(8)); }
  ARModel::Counts counts() {
    ARModel::Counts c;
    const std::uint32_t n = u32();
    c.entries.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      const TokenId t = u32();
      const std::uint32_t k = u32();
      c.entries.emplace_back(t, k);
      c.total += k;
    }
    return c;
  }
  void bytes(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, s_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw std::invalid_argument("model file truncated");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

template <typename Map>
std::vector<typename Map::const_pointer> sorted_entries(const Map& m) {
  std::vector<typename Map::const_pointer> v;
  v.reserve(m.size());
  for (const auto& e : m) v.push_back(&e);
  std::sort(v.begin(), v.end(), [](auto a, auto b) { return a->first < b->first; });
  return v;
}

}  // namespace

std::string ARModel::serialize() const {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(static_cast<std::uint32_t>(cb_size_));
  w.f64(cfg_.smoothing);
  for (double x : cfg_.weights) w.f64(x);
  w.u8(cfg_.position_keyed ? 1 : 0);
  w.i32(train_h_);
  w.i32(train_w_);

  w.u64(neighborhood_.size());
  for (const auto* e : sorted_entries(neighborhood_)) {
    const auto& k = e->first;
    w.u16(k.prompt);
    w.u16(k.row);
    w.u16(k.col);
    w.u32(k.west);
    w.u32(k.north);
    w.u32(k.northwest);
    w.counts(e->second);
  }
  w.u64(west_.size());
  for (const auto* e : sorted_entries(west_)) {
    w.u16(e->first.prompt);
    w.u32(e->first.west);
    w.counts(e->second);
  }
  w.u64(unigram_.size());
  for (const auto* e : sorted_entries(unigram_)) {
    w.u16(e->first);
    w.counts(e->second);
  }
  return w.take();
}

ARModel ARModel::deserialize(const std::string& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw std::invalid_argument("not an islock model (v1) file");
  ARModel m;
  m.cb_size_ = static_cast<int>(r.u32());
  m.cfg_.smoothing = r.f64();
  for (double& x : m.cfg_.weights) x = r.f64();
  m.cfg_.position_keyed = r.u8() != 0;
  m.train_h_ = r.i32();
  m.train_w_ = r.i32();

  const std::uint64_t n3 = r.u64();
  m.neighborhood_.reserve(n3);
  for (std::uint64_t i = 0; i < n3; ++i) {
    NeighborhoodKey k;
    k.prompt = r.u16();
    k.row = r.u16();
    k.col = r.u16();
    k.west = r.u32();
    k.north = r.u32();
    k.northwest = r.u32();
    m.neighborhood_.emplace(k, r.counts());
  }
  const std::uint64_t n1 = r.u64();
  for (std::uint64_t i = 0; i < n1; ++i) {
    WestKey k;
    k.prompt = r.u16();
    k.west = r.u32();
    m.west_.emplace(k, r.counts());
  }
  const std::uint64_t n0 = r.u64();
  for (std::uint64_t i = 0; i < n0; ++i) {
    const std::uint16_t p = r.u16();
    m.unigram_.emplace(p, r.counts());
  }
  if (!r.done()) throw std::invalid_argument("trailing bytes in model file");
  return m;
}

void ARModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ARModel ARModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace islock
