#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "islock/armodel.hpp"
#include "islock/codebook.hpp"
#include "islock/decoder.hpp"
#include "islock/grid.hpp"
#include "islock/metrics.hpp"
#include "islock/scene.hpp"
#include "islock/stats.hpp"

namespace islock {

/// Everything needed to rebuild the codebook, corpus and model from scratch.
struct StackConfig {
  int cb_size = 96;
  int cb_dim = 32;
  std::int64_t cb_seed = 7;
  int height = 32;
  int width = 32;
  int n_per_prompt = 2;
  std::int64_t corpus_seed = 11;
  ModelConfig model;
};

struct Stack {
  Codebook codebook;
  Corpus corpus;
  ARModel model;
};

Stack build_stack(const StackConfig& cfg);

/// Decode settings shared by the experiment commands. K is scaled to the toy
/// vocabulary (half of it) so that fixed windows K/3, 2K/3 and K differ.
DecodeConfig experiment_decode_config();

/// "0-59", "3,5,8" or a mix ("0-9,20"). Order is preserved, duplicates kept.
std::vector<std::int64_t> parse_seed_list(const std::string& text);

enum class EditKind { color, object, style, background };
std::string to_string(EditKind k);
EditKind parse_edit_kind(const std::string& s);

struct EditPair {
  std::int64_t seed = 0;
  EditKind kind = EditKind::color;
  Prompt org;
  Prompt edit;
  bool operator==(const EditPair&) const = default;
};

/// Default edit mix: color, object and style (background edits have no
/// background to preserve).
std::vector<EditKind> default_edit_kinds();

/// Seeded source prompt, edit kind drawn from `kinds`, and one attribute of
/// that kind moved to a different value.
EditPair make_edit_pair(std::int64_t seed, std::span<const EditKind> kinds);
std::vector<EditPair> make_edit_pairs(std::span<const std::int64_t> seeds, std::span<const EditKind> kinds);

/// Anchor (reference generation under the source prompt, rng_seed = pair seed)
/// and its foreground region (positions holding any foreground token).
struct EditCase {
  EditPair pair;
  TokenGrid anchor;
  RegionMask mask;
};

EditCase prepare_case(const ARModel& m, const EditPair& pair, int h, int w, const DecodeConfig& cfg);

/// Fraction of background (mask-false) positions where `result` equals the anchor.
double background_match(const TokenGrid& anchor, const TokenGrid& result, const RegionMask& mask);

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

bool all_passed(std::span<const Check> checks);
nlohmann::json checks_to_json(std::span<const Check> checks);

// ---------------------------------------------------------------------------
// Perturbation sensitivity

enum class PerturbRange { first, last };
std::string to_string(PerturbRange r);

/// Replaces the tokens of the first or last `fraction` of raster positions by
/// seeded uniform draws over the vocabulary, then regenerates every later
/// position greedily under `prompt`. A zero-length range returns `base`.
/// Throws invalid_argument when the grid has fewer than 5 tokens.
TokenGrid perturb_and_regenerate(const ARModel& m, const Prompt& prompt, const TokenGrid& base, PerturbRange range,
                                 std::int64_t seed, double fraction = 0.2);

struct PerturbRecord {
  std::int64_t seed = 0;
  Prompt prompt;
  double early = 0.0;  // 1 − SSIM(base, first-range variant)
  double late = 0.0;   // 1 − SSIM(base, last-range variant)
};

struct SensitivityReport {
  double fraction = 0.2;
  std::vector<PerturbRecord> records;
  double early_mean = 0.0, early_sd = 0.0;
  double late_mean = 0.0, late_sd = 0.0;
  stats::WilcoxonResult wilcoxon;  // early > late
  std::vector<Check> checks;
};

inline constexpr int kMinPerturbSeeds = 30;

/// One prompt per seed; base = greedy reference. Requires ≥ 30 seeds.
SensitivityReport run_perturbation_study(const ARModel& m, const Codebook& cb, std::span<const std::int64_t> seeds,
                                         int h, int w, double fraction = 0.2,
                                         const std::filesystem::path* export_dir = nullptr);
nlohmann::json to_json(const SensitivityReport& r);

// ---------------------------------------------------------------------------
// Edit sweeps

struct SweepRow {
  std::string label;
  std::optional<int> window;  // fixed window, or schedule when empty
  double tau = 0.0;
  double structure_mean = 0.0;
  double fidelity_mean = 0.0;
  double ratio = 0.0;  // structure_mean / fidelity_mean
  double bg_ssim_mean = 0.0;
  double bg_match_mean = 0.0;
  double fallback_rate = 0.0;  // fraction of all steps taking the fallback
  std::vector<double> structure;
  std::vector<double> fidelity;
  std::vector<double> bg_match;
};

struct WindowAblation {
  DecodeConfig cfg;
  std::vector<EditPair> pairs;
  std::vector<SweepRow> fixed;  // ascending window size
  SweepRow dynamic;
  double spearman_structure = 0.0;  // window size vs row mean
  double spearman_fidelity = 0.0;
  std::vector<Check> checks;
};

/// Fixed windows of K/3, 2K/3 and K when `windows` is empty.
WindowAblation run_window_ablation(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h,
                                   int w, std::vector<int> windows, const DecodeConfig& cfg,
                                   const std::filesystem::path* export_dir = nullptr);
nlohmann::json to_json(const WindowAblation& r);

struct TauAblation {
  DecodeConfig cfg;
  std::vector<EditPair> pairs;
  std::vector<SweepRow> rows;  // ascending τ
  /// Steps where replaying a recorded trace under a larger τ falls back while
  /// the recorded selection did not. Always 0 for a sound decoder.
  long superset_violations = 0;
  std::vector<Check> checks;
};

inline const std::vector<double> kDefaultTaus{0.25, 0.5, 1.0, 2.0, kInf};

TauAblation run_tau_ablation(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h, int w,
                             std::vector<double> taus, const DecodeConfig& cfg,
                             const std::filesystem::path* export_dir = nullptr);
nlohmann::json to_json(const TauAblation& r);

struct MethodSummary {
  std::string method;
  double structure_mean = 0.0;
  double bg_ssim_mean = 0.0;
  double bg_psnr_mean = 0.0;
  double bg_mse_mean = 0.0;
  double bg_match_mean = 0.0;
  double fidelity_mean = 0.0;
  std::vector<double> structure;
  std::vector<double> bg_ssim;
};

struct NpmComparison {
  DecodeConfig cfg;
  std::vector<EditPair> pairs;
  MethodSummary npm;
  MethodSummary islock;
  double anchor_fidelity_mean = 0.0;
  stats::WilcoxonResult structure_test;  // NPM > ISLock
  stats::WilcoxonResult bg_ssim_test;    // ISLock > NPM
  std::vector<Check> checks;
};

inline constexpr int kMinPairedEdits = 50;

NpmComparison run_npm_comparison(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h, int w,
                                 const DecodeConfig& cfg, const std::filesystem::path* export_dir = nullptr);
nlohmann::json to_json(const NpmComparison& r);

nlohmann::json decode_config_to_json(const DecodeConfig& cfg);

}  // namespace islock
