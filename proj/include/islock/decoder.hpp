#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "islock/armodel.hpp"
#include "islock/codebook.hpp"
#include "islock/grid.hpp"
#include "islock/scene.hpp"

namespace islock {

enum class DistanceMetric { euclidean_sq, cosine_dist };
enum class CandidateMode { top_k, sample_k };
enum class ReferenceMode { greedy, stochastic };

std::string to_string(DistanceMetric m);
std::string to_string(CandidateMode m);
std::string to_string(ReferenceMode m);
DistanceMetric parse_metric(const std::string& s);
CandidateMode parse_candidate_mode(const std::string& s);
ReferenceMode parse_reference_mode(const std::string& s);

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Structure-locking decode parameters. Defaults are the LlamaGen settings
/// (K = 150, τ = 1.0, α = 0.6, squared Euclidean distance).
struct DecodeConfig {
  int K = 150;
  double tau = 1.0;  // may be +inf
  double alpha = 0.6;
  DistanceMetric metric = DistanceMetric::euclidean_sq;
  CandidateMode candidate_mode = CandidateMode::top_k;
  ReferenceMode reference_mode = ReferenceMode::greedy;
  std::int64_t rng_seed = 0;
  /// When set, every step uses this window size instead of the shrinking schedule.
  std::optional<int> fixed_window;

  void validate() const;
};

struct Candidate {
  TokenId token = 0;
  double probability = 0.0;
  double distance = 0.0;
  bool operator==(const Candidate&) const = default;
};

struct StepTrace {
  int position = 0;
  int window_size = 0;  // schedule value, before clipping to the candidate count
  std::vector<Candidate> candidates;
  TokenId chosen = 0;
  bool used_fallback = false;
  bool operator==(const StepTrace&) const = default;
};

struct DecodeResult {
  TokenGrid grid;
  std::vector<StepTrace> trace;
  TokenGrid anchor;
};

/// max(1, ⌊K·(1 − α·i/N)⌋). A 1e-9 slack absorbs binary rounding of α·i/N so
/// that exact products such as 150·0.7 land on 105.
int window_size(int i, int N, int K, double alpha);

/// Window used at step i under cfg (fixed or scheduled).
int effective_window(int i, int N, const DecodeConfig& cfg);

/// euclidean_sq: ‖a − b‖²;  cosine_dist: 1 − a·b / (‖a‖‖b‖).
double token_distance(const Codebook& cb, TokenId candidate, TokenId anchor, DistanceMetric metric);

/// Anchor token matching with threshold fallback for one step.
/// The window is the first effective_window(i, N, cfg) candidates. If the
/// smallest anchor distance inside it is ≤ τ, the nearest candidate wins
/// (ties: higher probability, then lower id). Otherwise the most probable of
/// all candidates wins (ties: lower id) and used_fallback is set.
StepTrace select_token(const std::vector<TokenProb>& candidates, TokenId anchor, int i, int N,
                       const DecodeConfig& cfg, const Codebook& cb);

/// Raster generation under `prompt`: argmax per step (greedy) or one seeded
/// categorical draw per step (stochastic).
TokenGrid generate_reference(const ARModel& m, const Prompt& prompt, int h, int w, const DecodeConfig& cfg);

/// Naive prompt modification baseline: reference generation under the edit
/// prompt with the same seed.
TokenGrid npm_decode(const ARModel& m, const Prompt& prompt_edit, int h, int w, const DecodeConfig& cfg);

/// Candidates for step `position` given the decoded prefix.
std::vector<TokenProb> acquire_candidates(const ARModel& m, const Context& ctx, const DecodeConfig& cfg);

DecodeResult islock_decode(const ARModel& m, const Codebook& cb, const Prompt& prompt_edit, const TokenGrid& anchor,
                           const DecodeConfig& cfg);

/// Re-checks a step's invariants from its recorded candidates alone.
bool trace_step_sound(const StepTrace& step, int N, const DecodeConfig& cfg);

nlohmann::json step_to_json(const StepTrace& step);
/// One JSON record per line.
std::string trace_to_jsonl(const std::vector<StepTrace>& trace);

}  // namespace islock
