#include "islock/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "islock/json_format.hpp"
#include "islock/rng.hpp"

namespace islock {

std::string to_string(DistanceMetric m) { return m == DistanceMetric::euclidean_sq ? "euclidean_sq" : "cosine_dist"; }
std::string to_string(CandidateMode m) { return m == CandidateMode::top_k ? "top_k" : "sample_k"; }
std::string to_string(ReferenceMode m) { return m == ReferenceMode::greedy ? "greedy" : "stochastic"; }

DistanceMetric parse_metric(const std::string& s) {
  if (s == "euclidean_sq" || s == "euclidean") return DistanceMetric::euclidean_sq;
  if (s == "cosine_dist" || s == "cosine") return DistanceMetric::cosine_dist;
  throw std::invalid_argument("unknown metric '" + s + "'");
}

CandidateMode parse_candidate_mode(const std::string& s) {
  if (s == "top_k" || s == "top-k") return CandidateMode::top_k;
  if (s == "sample_k" || s == "sample-k") return CandidateMode::sample_k;
  throw std::invalid_argument("unknown candidate mode '" + s + "'");
}

ReferenceMode parse_reference_mode(const std::string& s) {
  if (s == "greedy") return ReferenceMode::greedy;
  if (s == "stochastic") return ReferenceMode::stochastic;
  throw std::invalid_argument("unknown reference mode '" + s + "'");
}

void DecodeConfig::validate() const {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (!(tau >= 0.0)) throw std::invalid_argument("tau must be >= 0 or inf");
  if (fixed_window && *fixed_window < 1) throw std::invalid_argument("fixed window must be >= 1");
}

int window_size(int i, int N, int K, double alpha) {
  if (N < 1) throw std::invalid_argument("window_size: N must be >= 1");
  if (i < 0 || i > N) throw std::invalid_argument("window_size: i must lie in [0, N]");
  const double progress = static_cast<double>(i) / static_cast<double>(N);
  const double raw = static_cast<double>(K) * (1.0 - alpha * progress);
  return std::max(1, static_cast<int>(std::floor(raw + 1e-9)));
}

int effective_window(int i, int N, const DecodeConfig& cfg) {
  if (cfg.fixed_window) return *cfg.fixed_window;
  return window_size(i, N, cfg.K, cfg.alpha);
}

double token_distance(const Codebook& cb, TokenId candidate, TokenId anchor, DistanceMetric metric) {
  const auto a = cb.embed(candidate);
  const auto b = cb.embed(anchor);
  if (metric == DistanceMetric::euclidean_sq) return squared_distance(a, b);
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (candidate == anchor) return 0.0;
  return std::max(0.0, 1.0 - dot / (std::sqrt(na) * std::sqrt(nb)));
}

StepTrace select_token(const std::vector<TokenProb>& candidates, TokenId anchor, int i, int N,
                       const DecodeConfig& cfg, const Codebook& cb) {
  if (candidates.empty()) throw std::invalid_argument("select_token: empty candidate list");
  StepTrace step;
  step.position = i;
  step.window_size = effective_window(i, N, cfg);
  step.candidates.reserve(candidates.size());
  for (const auto& [tok, prob] : candidates)
    step.candidates.push_back({tok, prob, token_distance(cb, tok, anchor, cfg.metric)});

  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(step.window_size), candidates.size());
  std::size_t best = 0;
  for (std::size_t k = 1; k < window; ++k) {
    const auto& c = step.candidates[k];
    const auto& b = step.candidates[best];
    if (c.distance < b.distance || (c.distance == b.distance && (c.probability > b.probability ||
                                                                  (c.probability == b.probability && c.token < b.token))))
      best = k;
  }
  if (step.candidates[best].distance <= cfg.tau) {
    step.chosen = step.candidates[best].token;
    return step;
  }
  std::size_t top = 0;
  for (std::size_t k = 1; k < step.candidates.size(); ++k) {
    const auto& c = step.candidates[k];
    const auto& t = step.candidates[top];
    if (c.probability > t.probability || (c.probability == t.probability && c.token < t.token)) top = k;
  }
  step.chosen = step.candidates[top].token;
  step.used_fallback = true;
  return step;
}

TokenGrid generate_reference(const ARModel& m, const Prompt& prompt, int h, int w, const DecodeConfig& cfg) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("generate_reference: empty grid");
  TokenGrid g(h, w);
  Engine rng(static_cast<std::uint64_t>(cfg.rng_seed));
  const int N = h * w;
  for (int i = 0; i < N; ++i) {
    const Context ctx = make_context(g.tokens, h, w, i, prompt);
    const auto dist = m.next_dist(ctx);
    g.tokens[static_cast<std::size_t>(i)] =
        cfg.reference_mode == ReferenceMode::greedy ? top_k_of(dist, 1).front().first : sample_one(dist, rng);
  }
  return g;
}

TokenGrid npm_decode(const ARModel& m, const Prompt& prompt_edit, int h, int w, const DecodeConfig& cfg) {
  return generate_reference(m, prompt_edit, h, w, cfg);
}

std::vector<TokenProb> acquire_candidates(const ARModel& m, const Context& ctx, const DecodeConfig& cfg) {
  if (cfg.candidate_mode == CandidateMode::top_k) return m.top_k(ctx, cfg.K);
  const auto step_seed = derive_seed({static_cast<std::uint64_t>(cfg.rng_seed), static_cast<std::uint64_t>(ctx.position)});
  return m.sample_k(ctx, cfg.K, static_cast<std::int64_t>(step_seed));
}

DecodeResult islock_decode(const ARModel& m, const Codebook& cb, const Prompt& prompt_edit, const TokenGrid& anchor,
                           const DecodeConfig& cfg) {
  cfg.validate();
  if (anchor.size() == 0) throw std::invalid_argument("islock_decode: empty anchor grid");
  if (m.cb_size() != cb.size()) throw std::invalid_argument("islock_decode: model and codebook sizes differ");
  for (TokenId t : anchor.tokens)
    if (t >= static_cast<TokenId>(cb.size())) throw std::invalid_argument("islock_decode: anchor token outside codebook");

  DecodeResult res{TokenGrid(anchor.height, anchor.width), {}, anchor};
  const int N = static_cast<int>(anchor.size());
  res.trace.reserve(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const Context ctx = make_context(res.grid.tokens, anchor.height, anchor.width, i, prompt_edit);
    StepTrace step = select_token(acquire_candidates(m, ctx, cfg), anchor.tokens[static_cast<std::size_t>(i)], i, N, cfg, cb);
    res.grid.tokens[static_cast<std::size_t>(i)] = step.chosen;
    res.trace.push_back(std::move(step));
  }
  return res;
}

bool trace_step_sound(const StepTrace& step, int N, const DecodeConfig& cfg) {
  if (step.candidates.empty()) return false;
  if (step.window_size != effective_window(step.position, N, cfg)) return false;
  const auto& cs = step.candidates;
  const auto chosen = std::find_if(cs.begin(), cs.end(), [&](const Candidate& c) { return c.token == step.chosen; });
  if (chosen == cs.end()) return false;
  const std::size_t window = std::min<std::size_t>(static_cast<std::size_t>(step.window_size), cs.size());
  double min_d = kInf;
  for (std::size_t k = 0; k < window; ++k) min_d = std::min(min_d, cs[k].distance);
  if (!step.used_fallback) {
    const auto pos = static_cast<std::size_t>(chosen - cs.begin());
    return pos < window && chosen->distance == min_d && min_d <= cfg.tau;
  }
  if (!(min_d > cfg.tau)) return false;
  for (const auto& c : cs)
    if (c.probability > chosen->probability) return false;
  return true;
}

nlohmann::json step_to_json(const StepTrace& step) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& c : step.candidates)
    cands.push_back({c.token, canonical_number(c.probability), canonical_number(c.distance)});
  return {{"position", step.position},
          {"window_size", step.window_size},
          {"candidates", std::move(cands)},
          {"chosen", step.chosen},
          {"used_fallback", step.used_fallback}};
}

std::string trace_to_jsonl(const std::vector<StepTrace>& trace) {
  std::string out;
  for (const auto& s : trace) out += step_to_json(s).dump() + "\n";
  return out;
}

}  // namespace islock
