// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.
//
//   islock_acceptance <path-to-islock_cli> <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "islock/experiments.hpp"
#include "islock/json_format.hpp"
#include "islock/rng.hpp"

namespace fs = std::filesystem;
using namespace islock;

namespace {

// Pinned tolerances.
constexpr double kFixedPointMin = 0.99;
constexpr double kMetricOracleTol = 1e-9;
constexpr int kSelectTrials = 1000;
constexpr int kFixedPointPrompts = 100;
constexpr int kMetricImages = 100;
const char* const kExperimentSeeds = "0-59";

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const std::function<Outcome()>& run) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = run();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!o.passed) ++failures;
  std::printf("[%s] criterion %d: %s -- %s (%.1fs)\n", o.passed ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
              secs);
  std::fflush(stdout);
}

std::string num(double x) { return canonical_number(x).dump(); }

std::string failed_checks(const std::vector<Check>& checks) {
  std::string out;
  for (const auto& c : checks) {
    out += (out.empty() ? "" : "; ") + std::string(c.passed ? "ok " : "FAILED ") + c.name;
    if (!c.detail.empty()) out += " [" + c.detail + "]";
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome criterion_schedule() {
  const int N = 1000;
  const int a = window_size(0, N, 150, 0.6), b = window_size(N / 2, N, 150, 0.6), c = window_size(N, N, 150, 0.6);
  return {a == 150 && b == 105 && c == 60,
          std::to_string(a) + " / " + std::to_string(b) + " / " + std::to_string(c) + " (want 150 / 105 / 60)"};
}

// Independent selection rule: rank the whole window lexicographically by
// (distance, -probability, id); fall back to the most probable candidate.
std::pair<TokenId, bool> brute_select(const std::vector<TokenProb>& cands, TokenId anchor, int W, double tau,
                                      DistanceMetric metric, const Codebook& cb) {
  auto dist = [&](TokenId t) {
    const auto x = cb.embed(t), y = cb.embed(anchor);
    double dot = 0, nx = 0, ny = 0, sq = 0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      sq += (x[k] - y[k]) * (x[k] - y[k]);
      dot += x[k] * y[k];
      nx += x[k] * x[k];
      ny += y[k] * y[k];
    }
    if (metric == DistanceMetric::euclidean_sq) return sq;
    return t == anchor ? 0.0 : std::max(0.0, 1.0 - dot / (std::sqrt(nx) * std::sqrt(ny)));
  };
  std::vector<std::tuple<double, double, TokenId>> win;
  for (int k = 0; k < std::min<int>(W, static_cast<int>(cands.size())); ++k)
    win.emplace_back(dist(cands[static_cast<std::size_t>(k)].first), -cands[static_cast<std::size_t>(k)].second,
                     cands[static_cast<std::size_t>(k)].first);
  const auto best = *std::min_element(win.begin(), win.end());
  if (std::get<0>(best) <= tau) return {std::get<2>(best), false};
  std::vector<std::pair<double, TokenId>> all;
  for (const auto& [t, p] : cands) all.emplace_back(-p, t);
  return {std::min_element(all.begin(), all.end())->second, true};
}

Outcome criterion_select_oracle(const Codebook& cb) {
  Engine rng(0xACCE55);
  const std::vector<double> taus{0.0, 0.25, 0.5, 1.0, 2.0, kInf};
  long configs = 0, agree = 0;
  for (int trial = 0; trial < kSelectTrials; ++trial) {
    const int n = 1 + static_cast<int>(uniform_below(rng, 150));
    std::vector<TokenId> pool(static_cast<std::size_t>(cb.size()));
    std::iota(pool.begin(), pool.end(), TokenId{0});
    for (std::size_t i = pool.size() - 1; i > 0; --i) std::swap(pool[i], pool[uniform_below(rng, i + 1)]);
    std::vector<TokenProb> cands;
    for (int k = 0; k < std::min(n, cb.size()); ++k)
      cands.emplace_back(pool[static_cast<std::size_t>(k)], static_cast<double>(1 + uniform_below(rng, 6)) / 64.0);
    std::stable_sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    const TokenId anchor = uniform_below(rng, 2) == 0 ? cands[uniform_below(rng, cands.size())].first
                                                      : static_cast<TokenId>(uniform_below(rng, cb.size()));
    const int N = 1024;
    const int pos = static_cast<int>(uniform_below(rng, N));
    for (auto metric : {DistanceMetric::euclidean_sq, DistanceMetric::cosine_dist})
      for (double tau : taus)
        for (int wmode = 0; wmode < 5; ++wmode) {
          DecodeConfig cfg;
          cfg.K = n;
          cfg.metric = metric;
          cfg.tau = tau;
          if (wmode < 4) cfg.fixed_window = std::max(1, wmode == 0 ? 1 : wmode * n / 3);
          const int W = effective_window(pos, N, cfg);
          const auto [want, fb] = brute_select(cands, anchor, W, tau, metric, cb);
          const StepTrace got = select_token(cands, anchor, pos, N, cfg, cb);
          ++configs;
          agree += got.chosen == want && got.used_fallback == fb ? 1 : 0;
        }
  }
  return {agree == configs, std::to_string(agree) + " / " + std::to_string(configs) + " selections agree over " +
                                std::to_string(kSelectTrials) + " candidate sets"};
}

Outcome criterion_fixed_point(const Stack& s) {
  DecodeConfig cfg = experiment_decode_config();
  cfg.tau = 1.0;
  cfg.candidate_mode = CandidateMode::top_k;
  cfg.reference_mode = ReferenceMode::greedy;
  const int h = s.model.train_height(), w = s.model.train_width();
  long match = 0, total = 0, in_window = 0, in_window_kept = 0;
  for (int i = 0; i < kFixedPointPrompts; ++i) {
    const Prompt p = prompt_from_index(i * kPromptCount / kFixedPointPrompts);
    const TokenGrid anchor = generate_reference(s.model, p, h, w, cfg);
    const DecodeResult r = islock_decode(s.model, s.codebook, p, anchor, cfg);
    for (std::size_t k = 0; k < anchor.size(); ++k) match += r.grid.tokens[k] == anchor.tokens[k] ? 1 : 0;
    total += static_cast<long>(anchor.size());
    for (const auto& step : r.trace) {
      const TokenId a = anchor.tokens[static_cast<std::size_t>(step.position)];
      const std::size_t win = std::min<std::size_t>(static_cast<std::size_t>(step.window_size), step.candidates.size());
      const bool present = std::any_of(step.candidates.begin(), step.candidates.begin() + static_cast<std::ptrdiff_t>(win),
                                       [&](const Candidate& c) { return c.token == a; });
      if (!present) continue;
      ++in_window;
      in_window_kept += step.chosen == a ? 1 : 0;
    }
  }
  const double rate = static_cast<double>(match) / static_cast<double>(total);
  return {rate >= kFixedPointMin && in_window_kept == in_window,
          "token match " + num(rate) + " (min " + num(kFixedPointMin) + "), anchor kept on " +
              std::to_string(in_window_kept) + " / " + std::to_string(in_window) + " in-window steps"};
}

Outcome criterion_perturb(const Stack& s) {
  const auto seeds = parse_seed_list(kExperimentSeeds);
  const auto r = run_perturbation_study(s.model, s.codebook, seeds, s.model.train_height(), s.model.train_width());
  return {all_passed(r.checks), "early " + num(r.early_mean) + " +- " + num(r.early_sd) + ", late " +
                                    num(r.late_mean) + " +- " + num(r.late_sd) + "; " + failed_checks(r.checks)};
}

std::vector<EditPair> experiment_pairs() {
  return make_edit_pairs(parse_seed_list(kExperimentSeeds), default_edit_kinds());
}

Outcome criterion_window(const Stack& s) {
  const auto r = run_window_ablation(s.model, s.codebook, experiment_pairs(), s.model.train_height(),
                                     s.model.train_width(), {}, experiment_decode_config());
  std::string rows;
  for (const auto& row : r.fixed)
    rows += "W=" + std::to_string(*row.window) + " S=" + num(row.structure_mean) + " F=" + num(row.fidelity_mean) +
            " S/F=" + num(row.ratio) + ", ";
  rows += "dynamic S=" + num(r.dynamic.structure_mean) + " F=" + num(r.dynamic.fidelity_mean) +
          " S/F=" + num(r.dynamic.ratio);
  return {all_passed(r.checks), rows + "; " + failed_checks(r.checks)};
}

Outcome criterion_tau(const Stack& s) {
  const auto r = run_tau_ablation(s.model, s.codebook, experiment_pairs(), s.model.train_height(),
                                  s.model.train_width(), kDefaultTaus, experiment_decode_config());
  std::string rows;
  for (const auto& row : r.rows)
    rows += "tau=" + num(row.tau) + " fallback=" + num(row.fallback_rate) + " bg_match=" + num(row.bg_match_mean) + ", ";
  return {all_passed(r.checks), rows + failed_checks(r.checks)};
}

Outcome criterion_npm(const Stack& s) {
  const auto r = run_npm_comparison(s.model, s.codebook, experiment_pairs(), s.model.train_height(),
                                    s.model.train_width(), experiment_decode_config());
  return {all_passed(r.checks), "structure ISLock " + num(r.islock.structure_mean) + " vs NPM " +
                                    num(r.npm.structure_mean) + ", bg SSIM ISLock " + num(r.islock.bg_ssim_mean) +
                                    " vs NPM " + num(r.npm.bg_ssim_mean) + "; " + failed_checks(r.checks)};
}

// Scalar oracles written independently of the library: one-pass moment sums.
double oracle_mse(const PixelGrid& a, const PixelGrid& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

double oracle_ssim(const PixelGrid& a, const PixelGrid& b) {
  const double c1 = 6.5025, c2 = 58.5225;
  double total = 0;
  int windows = 0;
  for (int r0 = 0; r0 + 8 <= a.height; ++r0)
    for (int c0 = 0; c0 + 8 <= a.width; ++c0) {
      double acc = 0;
      for (int ch = 0; ch < 3; ++ch) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int r = r0; r < r0 + 8; ++r)
          for (int c = c0; c < c0 + 8; ++c) {
            const double x = a.at(r, c, ch), y = b.at(r, c, ch);
            sx += x;
            sy += y;
            sxx += x * x;
            syy += y * y;
            sxy += x * y;
          }
        const double mx = sx / 64, my = sy / 64;
        const double vx = sxx / 64 - mx * mx, vy = syy / 64 - my * my, cxy = sxy / 64 - mx * my;
        acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
      total += acc / 3;
      ++windows;
    }
  return total / windows;
}

Outcome criterion_metrics() {
  Engine rng(0x5EED);
  auto random_image = [&](int h, int w) {
    PixelGrid img(h, w);
    for (auto& v : img.data) v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    return img;
  };
  int self_ok = 0, oracle_ok = 0;
  double worst = 0;
  for (int i = 0; i < kMetricImages; ++i) {
    const int h = 8 + static_cast<int>(uniform_below(rng, 25)), w = 8 + static_cast<int>(uniform_below(rng, 25));
    const PixelGrid x = random_image(h, w);
    self_ok += ssim(x, x) == 1.0 && mse(x, x) == 0.0 && std::isinf(psnr(x, x)) && psnr(x, x) > 0 ? 1 : 0;
    // Partially correlated partner so SSIM spans a useful range.
    PixelGrid y = x;
    for (auto& v : y.data)
      if (uniform_below(rng, 3) == 0) v = static_cast<std::uint8_t>(uniform_below(rng, 256));
    const double m = oracle_mse(x, y);
    const double e1 = std::abs(mse(x, y) - m);
    const double e2 = std::abs(psnr(x, y) - 10.0 * std::log10(255.0 * 255.0 / m));
    const double e3 = std::abs(ssim(x, y) - oracle_ssim(x, y));
    worst = std::max({worst, e1, e2, e3});
    oracle_ok += e1 <= kMetricOracleTol && e2 <= kMetricOracleTol && e3 <= kMetricOracleTol ? 1 : 0;
  }
  return {self_ok == kMetricImages && oracle_ok == kMetricImages,
          "self " + std::to_string(self_ok) + "/" + std::to_string(kMetricImages) + ", oracle " +
              std::to_string(oracle_ok) + "/" + std::to_string(kMetricImages) + ", worst abs error " + num(worst)};
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return files;
}

int run_cli(const std::string& cli, const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd \"" + dir.string() + "\" && \"" + cli + "\" " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Outcome criterion_determinism(const std::string& cli, const fs::path& scratch) {
  const std::string seeds = std::string(" --seed-list ") + kExperimentSeeds;
  const std::vector<std::string> commands{
      "train --out train.json",
      "gen --prompt 3:2:1:0 --out-grid gen_grid.json --out-image gen.ppm --out gen.json",
      "gen --prompt 5:1:3:2 --reference-mode stochastic --seed 4 --out-grid gen2_grid.json --out gen2.json",
      "edit --prompt-org 3:2:1:0 --prompt-edit 3:6:1:0 --k 48 --tau inf --alpha 0.6 --metric euclidean_sq "
      "--candidate-mode top_k --seed 1 --out-grid edit_grid.json --out-image edit.ppm --out-trace edit_trace.jsonl "
      "--out edit.json",
      "edit --prompt-org 1:0:2:3 --prompt-edit 4:0:2:3 --k 48 --tau 0.5 --metric cosine_dist "
      "--candidate-mode sample_k --seed 9 --out-grid edit2_grid.json --out-trace edit2_trace.jsonl --out edit2.json",
      "report --source gen_grid.json --result edit_grid.json --prompt-edit 3:6:1:0 --out report.json",
      "perturb" + seeds + " --out perturb.json --export-images img_perturb",
      "ablate-window" + seeds + " --out window.json --export-images img_window",
      "ablate-tau" + seeds + " --out tau.json --export-images img_tau",
      "compare" + seeds + " --out compare.json --export-images img_compare",
  };
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = scratch / ("run" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& c : commands)
      if (run_cli(cli, dir, c) != 0) return {false, "command failed: " + c};
    runs.push_back(snapshot(dir));
  }
  long json = 0, ppm = 0, other = 0;
  for (const auto& [name, _] : runs[0]) {
    if (name.ends_with(".ppm")) ++ppm;
    else if (name.ends_with(".json") || name.ends_with(".jsonl")) ++json;
    else ++other;
  }
  const bool same = runs[0] == runs[1];
  std::string diff;
  if (!same)
    for (const auto& [name, bytes] : runs[0]) {
      auto it = runs[1].find(name);
      if (it == runs[1].end() || it->second != bytes) {
        diff = ", first difference: " + name;
        break;
      }
    }
  return {same && ppm > 0 && json > 0, std::to_string(commands.size()) + " commands x2, " + std::to_string(json) +
                                           " JSON + " + std::to_string(ppm) + " PPM + " + std::to_string(other) +
                                           " other files " + (same ? "byte-identical" : "DIFFER") + diff};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <islock_cli> <scratch-dir>\n", argv[0]);
    return 2;
  }
  const std::string cli = fs::absolute(argv[1]).string();
  const fs::path scratch = fs::absolute(argv[2]);
  fs::create_directories(scratch);

  const Stack stack = build_stack(StackConfig{});

  report(1, "window schedule exactness", criterion_schedule);
  report(2, "selection oracle equivalence", [&] { return criterion_select_oracle(stack.codebook); });
  report(3, "anchor fixed point", [&] { return criterion_fixed_point(stack); });
  report(4, "perturbation sensitivity ordering", [&] { return criterion_perturb(stack); });
  report(5, "window ablation trend", [&] { return criterion_window(stack); });
  report(6, "tau ablation monotonicity", [&] { return criterion_tau(stack); });
  report(7, "ISLock vs NPM ordering", [&] { return criterion_npm(stack); });
  report(8, "metric self-consistency", criterion_metrics);
  report(9, "CLI determinism", [&] { return criterion_determinism(cli, scratch); });

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
