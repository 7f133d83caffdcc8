#include "islock/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "islock/json_format.hpp"
#include "islock/parallel.hpp"
#include "islock/rng.hpp"

namespace islock {

namespace {

constexpr double kSignificance = 0.05;
constexpr double kEarlyLateFactor = 2.0;
constexpr double kDynamicRatioSlack = 1.05;
constexpr double kTrendSlack = 1e-12;

double safe_ratio(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

std::string fmt(double x) { return canonical_number(x).dump(); }

nlohmann::json prompt_json(const Prompt& p) { return {p.object, p.color, p.background, p.style}; }

nlohmann::json wilcoxon_json(const stats::WilcoxonResult& w) {
  return {{"n_nonzero", w.n_nonzero},
          {"w_plus", canonical_number(w.w_plus)},
          {"z", canonical_number(w.z)},
          {"p_value", canonical_number(w.p_value)}};
}

void export_grid(const std::filesystem::path* dir, const Codebook& cb, const std::string& name, const TokenGrid& g) {
  if (!dir) return;
  std::filesystem::create_directories(*dir);
  write_ppm(cb.decode_grid(g), *dir / (name + ".ppm"));
}

std::string case_name(const EditPair& p) { return "seed" + std::to_string(p.seed); }

std::vector<EditCase> prepare_cases(const ARModel& m, std::span<const EditPair> pairs, int h, int w,
                                    const DecodeConfig& cfg) {
  std::vector<EditCase> cases(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t i) { cases[i] = prepare_case(m, pairs[i], h, w, cfg); });
  return cases;
}

struct CaseOutcome {
  double structure = 0.0;
  double fidelity = 0.0;
  double bg_ssim = 0.0;
  double bg_match = 0.0;
  long fallbacks = 0;
  long steps = 0;
};

CaseOutcome score(const Codebook& cb, const EditCase& c, const DecodeResult& r) {
  const MetricReport rep = make_report(cb, c.anchor, r.grid, c.mask, c.pair.edit);
  CaseOutcome o;
  o.structure = rep.structure_proxy;
  o.fidelity = rep.edit_fidelity;
  o.bg_ssim = rep.bg_ssim;
  o.bg_match = background_match(c.anchor, r.grid, c.mask);
  for (const auto& s : r.trace) o.fallbacks += s.used_fallback ? 1 : 0;
  o.steps = static_cast<long>(r.trace.size());
  return o;
}

SweepRow summarize(std::string label, std::optional<int> window, double tau, const std::vector<CaseOutcome>& outs) {
  SweepRow row;
  row.label = std::move(label);
  row.window = window;
  row.tau = tau;
  std::vector<double> bg_ssim;
  long fallbacks = 0, steps = 0;
  for (const auto& o : outs) {
    row.structure.push_back(o.structure);
    row.fidelity.push_back(o.fidelity);
    row.bg_match.push_back(o.bg_match);
    bg_ssim.push_back(o.bg_ssim);
    fallbacks += o.fallbacks;
    steps += o.steps;
  }
  row.structure_mean = stats::mean(row.structure);
  row.fidelity_mean = stats::mean(row.fidelity);
  row.ratio = safe_ratio(row.structure_mean, row.fidelity_mean);
  row.bg_ssim_mean = stats::mean(bg_ssim);
  row.bg_match_mean = stats::mean(row.bg_match);
  row.fallback_rate = steps == 0 ? 0.0 : static_cast<double>(fallbacks) / static_cast<double>(steps);
  return row;
}

nlohmann::json row_json(const SweepRow& r) {
  nlohmann::json j = {{"label", r.label},
                      {"tau", canonical_number(r.tau)},
                      {"structure_proxy_mean", canonical_number(r.structure_mean)},
                      {"edit_fidelity_mean", canonical_number(r.fidelity_mean)},
                      {"structure_fidelity_ratio", canonical_number(r.ratio)},
                      {"bg_ssim_mean", canonical_number(r.bg_ssim_mean)},
                      {"bg_token_match_mean", canonical_number(r.bg_match_mean)},
                      {"fallback_rate", canonical_number(r.fallback_rate)}};
  j["window"] = r.window ? nlohmann::json(*r.window) : nlohmann::json("schedule");
  return j;
}

nlohmann::json pairs_json(std::span<const EditPair> pairs) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : pairs)
    a.push_back({{"seed", p.seed}, {"kind", to_string(p.kind)}, {"org", prompt_json(p.org)}, {"edit", prompt_json(p.edit)}});
  return a;
}

}  // namespace

Stack build_stack(const StackConfig& cfg) {
  Codebook cb(cfg.cb_size, cfg.cb_dim, cfg.cb_seed);
  Corpus corpus = corpus_build(cb, cfg.height, cfg.width, cfg.n_per_prompt, cfg.corpus_seed);
  ARModel model = ARModel::train(corpus, cb.size(), cfg.model);
  return {std::move(cb), std::move(corpus), std::move(model)};
}

DecodeConfig experiment_decode_config() {
  DecodeConfig cfg;
  cfg.K = 48;
  return cfg;
}

std::vector<std::int64_t> parse_seed_list(const std::string& text) {
  auto parse_int = [&](std::string_view s) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
      throw std::invalid_argument("bad seed list '" + text + "'");
    return v;
  };
  std::vector<std::int64_t> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = rest.substr(0, comma);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    const auto dash = item.find('-', 1);
    if (dash == std::string_view::npos) {
      out.push_back(parse_int(item));
      continue;
    }
    const std::int64_t lo = parse_int(item.substr(0, dash));
    const std::int64_t hi = parse_int(item.substr(dash + 1));
    if (hi < lo) throw std::invalid_argument("bad seed range in '" + text + "'");
    for (std::int64_t s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

std::string to_string(EditKind k) {
  switch (k) {
    case EditKind::color: return "color";
    case EditKind::object: return "object";
    case EditKind::style: return "style";
    case EditKind::background: return "background";
  }
  return "?";
}

EditKind parse_edit_kind(const std::string& s) {
  if (s == "color") return EditKind::color;
  if (s == "object") return EditKind::object;
  if (s == "style") return EditKind::style;
  if (s == "background") return EditKind::background;
  throw std::invalid_argument("unknown edit kind '" + s + "'");
}

std::vector<EditKind> default_edit_kinds() { return {EditKind::color, EditKind::object, EditKind::style}; }

EditPair make_edit_pair(std::int64_t seed, std::span<const EditKind> kinds) {
  if (kinds.empty()) throw std::invalid_argument("make_edit_pair: no edit kinds");
  Engine rng(derive_seed({static_cast<std::uint64_t>(seed), 0x45444954ULL}));
  EditPair p;
  p.seed = seed;
  p.org = prompt_from_index(static_cast<int>(uniform_below(rng, kPromptCount)));
  p.kind = kinds[uniform_below(rng, kinds.size())];
  p.edit = p.org;
  auto shift = [&](int value, int cardinality) {
    return static_cast<int>((value + 1 + static_cast<int>(uniform_below(rng, cardinality - 1))) % cardinality);
  };
  switch (p.kind) {
    case EditKind::color: p.edit.color = shift(p.org.color, kColors); break;
    case EditKind::object: p.edit.object = shift(p.org.object, kObjects); break;
    case EditKind::style: p.edit.style = shift(p.org.style, kStyles); break;
    case EditKind::background: p.edit.background = shift(p.org.background, kBackgrounds); break;
  }
  return p;
}

std::vector<EditPair> make_edit_pairs(std::span<const std::int64_t> seeds, std::span<const EditKind> kinds) {
  std::vector<EditPair> out;
  out.reserve(seeds.size());
  for (auto s : seeds) out.push_back(make_edit_pair(s, kinds));
  return out;
}

EditCase prepare_case(const ARModel& m, const EditPair& pair, int h, int w, const DecodeConfig& cfg) {
  DecodeConfig c = cfg;
  c.rng_seed = pair.seed;
  EditCase ec;
  ec.pair = pair;
  ec.anchor = generate_reference(m, pair.org, h, w, c);
  ec.mask = object_mask(ec.anchor);
  if (ec.mask.count() == 0) throw empty_region_error("anchor for seed " + std::to_string(pair.seed) + " has no object");
  return ec;
}

double background_match(const TokenGrid& anchor, const TokenGrid& result, const RegionMask& mask) {
  if (anchor.height != result.height || anchor.width != result.width || mask.height != anchor.height ||
      mask.width != anchor.width)
    throw std::invalid_argument("background_match: dimensions differ");
  std::size_t n = 0, same = 0;
  for (std::size_t i = 0; i < anchor.tokens.size(); ++i) {
    if (mask.bits[i]) continue;
    ++n;
    same += anchor.tokens[i] == result.tokens[i] ? 1 : 0;
  }
  if (n == 0) throw empty_region_error("background_match: no background positions");
  return static_cast<double>(same) / static_cast<double>(n);
}

bool all_passed(std::span<const Check> checks) {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json checks_to_json(std::span<const Check> checks) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& c : checks) a.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return a;
}

nlohmann::json decode_config_to_json(const DecodeConfig& cfg) {
  nlohmann::json j = {{"K", cfg.K},
                      {"tau", canonical_number(cfg.tau)},
                      {"alpha", canonical_number(cfg.alpha)},
                      {"metric", to_string(cfg.metric)},
                      {"candidate_mode", to_string(cfg.candidate_mode)},
                      {"reference_mode", to_string(cfg.reference_mode)},
                      {"rng_seed", cfg.rng_seed}};
  j["fixed_window"] = cfg.fixed_window ? nlohmann::json(*cfg.fixed_window) : nlohmann::json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------

std::string to_string(PerturbRange r) { return r == PerturbRange::first ? "first" : "last"; }

TokenGrid perturb_and_regenerate(const ARModel& m, const Prompt& prompt, const TokenGrid& base, PerturbRange range,
                                 std::int64_t seed, double fraction) {
  const int N = static_cast<int>(base.size());
  if (N < 5) throw std::invalid_argument("perturb_and_regenerate: grid needs at least 5 tokens");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("perturb_and_regenerate: fraction outside [0, 1]");
  const int len = static_cast<int>(std::floor(fraction * N + 1e-9));
  if (len == 0) return base;
  const int lo = range == PerturbRange::first ? 0 : N - len;
  const int hi = lo + len;

  TokenGrid out = base;
  Engine rng(derive_seed({static_cast<std::uint64_t>(seed), static_cast<std::uint64_t>(range), 0x50455254ULL}));
  for (int i = lo; i < hi; ++i)
    out.tokens[static_cast<std::size_t>(i)] = static_cast<TokenId>(uniform_below(rng, static_cast<std::uint64_t>(m.cb_size())));
  for (int i = hi; i < N; ++i) {
    const Context ctx = make_context(out.tokens, out.height, out.width, i, prompt);
    out.tokens[static_cast<std::size_t>(i)] = m.top_k(ctx, 1).front().first;
  }
  return out;
}

SensitivityReport run_perturbation_study(const ARModel& m, const Codebook& cb, std::span<const std::int64_t> seeds,
                                         int h, int w, double fraction, const std::filesystem::path* export_dir) {
  if (static_cast<int>(seeds.size()) < kMinPerturbSeeds)
    throw std::invalid_argument("perturbation study needs at least " + std::to_string(kMinPerturbSeeds) + " seeds");
  SensitivityReport rep;
  rep.fraction = fraction;
  rep.records.resize(seeds.size());
  const DecodeConfig greedy;
  parallel_for(seeds.size(), [&](std::size_t i) {
    PerturbRecord& r = rep.records[i];
    r.seed = seeds[i];
    Engine rng(derive_seed({static_cast<std::uint64_t>(r.seed), 0x50524D54ULL}));
    r.prompt = prompt_from_index(static_cast<int>(uniform_below(rng, kPromptCount)));
    const TokenGrid base = generate_reference(m, r.prompt, h, w, greedy);
    const TokenGrid early = perturb_and_regenerate(m, r.prompt, base, PerturbRange::first, r.seed, fraction);
    const TokenGrid late = perturb_and_regenerate(m, r.prompt, base, PerturbRange::last, r.seed, fraction);
    const PixelGrid img = cb.decode_grid(base);
    r.early = 1.0 - ssim(img, cb.decode_grid(early));
    r.late = 1.0 - ssim(img, cb.decode_grid(late));
    const std::string name = "seed" + std::to_string(r.seed);
    export_grid(export_dir, cb, name + "_base", base);
    export_grid(export_dir, cb, name + "_early", early);
    export_grid(export_dir, cb, name + "_late", late);
  });
  std::vector<double> e, l;
  for (const auto& r : rep.records) {
    e.push_back(r.early);
    l.push_back(r.late);
  }
  rep.early_mean = stats::mean(e);
  rep.early_sd = stats::sample_stddev(e);
  rep.late_mean = stats::mean(l);
  rep.late_sd = stats::sample_stddev(l);
  rep.wilcoxon = stats::wilcoxon_greater(e, l);

  rep.checks.push_back({"seed count >= 50", rep.records.size() >= static_cast<std::size_t>(kMinPairedEdits),
                        std::to_string(rep.records.size()) + " seeds"});
  rep.checks.push_back({"early mean > late mean", rep.early_mean > rep.late_mean,
                        fmt(rep.early_mean) + " vs " + fmt(rep.late_mean)});
  rep.checks.push_back({"wilcoxon early > late p < 0.05", rep.wilcoxon.p_value < kSignificance,
                        "p = " + fmt(rep.wilcoxon.p_value)});
  rep.checks.push_back({"early mean >= 2 x late mean", rep.early_mean >= kEarlyLateFactor * rep.late_mean,
                        "ratio " + fmt(safe_ratio(rep.early_mean, rep.late_mean))});
  return rep;
}

nlohmann::json to_json(const SensitivityReport& r) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& x : r.records)
    recs.push_back({{"seed", x.seed},
                    {"prompt", prompt_json(x.prompt)},
                    {"delta_ssim_early", canonical_number(x.early)},
                    {"delta_ssim_late", canonical_number(x.late)}});
  return {{"experiment", "perturb"},
          {"fraction", canonical_number(r.fraction)},
          {"early_delta_ssim", {{"mean", canonical_number(r.early_mean)}, {"sd", canonical_number(r.early_sd)}}},
          {"late_delta_ssim", {{"mean", canonical_number(r.late_mean)}, {"sd", canonical_number(r.late_sd)}}},
          {"wilcoxon_early_gt_late", wilcoxon_json(r.wilcoxon)},
          {"records", std::move(recs)},
          {"checks", checks_to_json(r.checks)},
          {"passed", all_passed(r.checks)}};
}

// ---------------------------------------------------------------------------

WindowAblation run_window_ablation(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h,
                                   int w, std::vector<int> windows, const DecodeConfig& cfg,
                                   const std::filesystem::path* export_dir) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("window ablation: no edit pairs");
  if (windows.empty()) windows = {std::max(1, cfg.K / 3), std::max(1, 2 * cfg.K / 3), cfg.K};
  std::sort(windows.begin(), windows.end());
  if (windows.front() < 1) throw std::invalid_argument("window ablation: window sizes must be >= 1");

  const auto cases = prepare_cases(m, pairs, h, w, cfg);
  const std::size_t rows = windows.size() + 1;  // last row = schedule
  std::vector<std::vector<CaseOutcome>> outs(rows, std::vector<CaseOutcome>(cases.size()));
  parallel_for(cases.size(), [&](std::size_t i) {
    const EditCase& c = cases[i];
    export_grid(export_dir, cb, case_name(c.pair) + "_anchor", c.anchor);
    for (std::size_t r = 0; r < rows; ++r) {
      DecodeConfig rc = cfg;
      rc.rng_seed = c.pair.seed;
      rc.fixed_window = r < windows.size() ? std::optional<int>(windows[r]) : std::nullopt;
      const DecodeResult res = islock_decode(m, cb, c.pair.edit, c.anchor, rc);
      outs[r][i] = score(cb, c, res);
      const std::string label = r < windows.size() ? "w" + std::to_string(windows[r]) : "dynamic";
      export_grid(export_dir, cb, case_name(c.pair) + "_" + label, res.grid);
    }
  });

  WindowAblation ab;
  ab.cfg = cfg;
  ab.pairs.assign(pairs.begin(), pairs.end());
  for (std::size_t r = 0; r < windows.size(); ++r)
    ab.fixed.push_back(summarize("fixed " + std::to_string(windows[r]), windows[r], cfg.tau, outs[r]));
  ab.dynamic = summarize("dynamic", std::nullopt, cfg.tau, outs.back());

  std::vector<double> ws, sm, fm;
  for (const auto& row : ab.fixed) {
    ws.push_back(static_cast<double>(*row.window));
    sm.push_back(row.structure_mean);
    fm.push_back(row.fidelity_mean);
  }
  bool structure_decreasing = true, fidelity_nonincreasing = true;
  for (std::size_t r = 1; r < ab.fixed.size(); ++r) {
    structure_decreasing = structure_decreasing && sm[r] < sm[r - 1];
    fidelity_nonincreasing = fidelity_nonincreasing && fm[r] <= fm[r - 1] + kTrendSlack;
  }
  if (ab.fixed.size() >= 2) {
    ab.spearman_structure = stats::spearman(ws, sm);
    ab.spearman_fidelity = stats::spearman(ws, fm);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& row : ab.fixed) best = std::min(best, row.ratio);

  ab.checks.push_back({"pair count >= 50", pairs.size() >= static_cast<std::size_t>(kMinPairedEdits),
                       std::to_string(pairs.size()) + " pairs"});
  ab.checks.push_back({"at least 3 fixed windows", ab.fixed.size() >= 3, std::to_string(ab.fixed.size()) + " windows"});
  ab.checks.push_back({"structure mean strictly decreasing in window",
                       structure_decreasing && ab.spearman_structure < 0.0,
                       "spearman " + fmt(ab.spearman_structure)});
  ab.checks.push_back({"fidelity mean non-increasing in window",
                       fidelity_nonincreasing && ab.spearman_fidelity <= 0.0,
                       "spearman " + fmt(ab.spearman_fidelity)});
  ab.checks.push_back({"dynamic ratio <= 1.05 x best fixed ratio", ab.dynamic.ratio <= kDynamicRatioSlack * best,
                       fmt(ab.dynamic.ratio) + " vs best " + fmt(best)});
  return ab;
}

nlohmann::json to_json(const WindowAblation& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.fixed) rows.push_back(row_json(row));
  return {{"experiment", "ablate-window"},
          {"decode", decode_config_to_json(r.cfg)},
          {"pairs", pairs_json(r.pairs)},
          {"fixed", std::move(rows)},
          {"dynamic", row_json(r.dynamic)},
          {"spearman_window_structure", canonical_number(r.spearman_structure)},
          {"spearman_window_fidelity", canonical_number(r.spearman_fidelity)},
          {"checks", checks_to_json(r.checks)},
          {"passed", all_passed(r.checks)}};
}

// ---------------------------------------------------------------------------

TauAblation run_tau_ablation(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h, int w,
                             std::vector<double> taus, const DecodeConfig& cfg,
                             const std::filesystem::path* export_dir) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("tau ablation: no edit pairs");
  if (taus.empty()) taus = kDefaultTaus;
  if (!std::is_sorted(taus.begin(), taus.end())) throw std::invalid_argument("tau ablation: tau values must ascend");
  for (double t : taus)
    if (!(t >= 0.0)) throw std::invalid_argument("tau ablation: tau values must be >= 0");

  const auto cases = prepare_cases(m, pairs, h, w, cfg);
  std::vector<std::vector<CaseOutcome>> outs(taus.size(), std::vector<CaseOutcome>(cases.size()));
  std::vector<long> violations(cases.size(), 0);
  parallel_for(cases.size(), [&](std::size_t i) {
    const EditCase& c = cases[i];
    const int N = static_cast<int>(c.anchor.size());
    export_grid(export_dir, cb, case_name(c.pair) + "_anchor", c.anchor);
    for (std::size_t t = 0; t < taus.size(); ++t) {
      DecodeConfig rc = cfg;
      rc.rng_seed = c.pair.seed;
      rc.tau = taus[t];
      const DecodeResult res = islock_decode(m, cb, c.pair.edit, c.anchor, rc);
      outs[t][i] = score(cb, c, res);
      export_grid(export_dir, cb, case_name(c.pair) + "_tau" + fmt(taus[t]), res.grid);
      // Replay every recorded step under each larger τ: a step that falls back
      // there must also have fallen back here.
      for (const auto& step : res.trace) {
        if (step.used_fallback) continue;
        for (std::size_t u = t + 1; u < taus.size(); ++u) {
          DecodeConfig larger = rc;
          larger.tau = taus[u];
          std::vector<TokenProb> cands;
          for (const auto& cd : step.candidates) cands.emplace_back(cd.token, cd.probability);
          if (select_token(cands, c.anchor.tokens[static_cast<std::size_t>(step.position)], step.position, N, larger, cb)
                  .used_fallback)
            ++violations[i];
        }
      }
    }
  });

  TauAblation ab;
  ab.cfg = cfg;
  ab.pairs.assign(pairs.begin(), pairs.end());
  for (std::size_t t = 0; t < taus.size(); ++t)
    ab.rows.push_back(summarize("tau " + fmt(taus[t]), cfg.fixed_window, taus[t], outs[t]));
  for (long v : violations) ab.superset_violations += v;

  bool fallback_nonincreasing = true, match_nondecreasing = true;
  for (std::size_t t = 1; t < ab.rows.size(); ++t) {
    fallback_nonincreasing = fallback_nonincreasing && ab.rows[t].fallback_rate <= ab.rows[t - 1].fallback_rate + kTrendSlack;
    match_nondecreasing = match_nondecreasing && ab.rows[t].bg_match_mean + kTrendSlack >= ab.rows[t - 1].bg_match_mean;
  }
  ab.checks.push_back({"pair count >= 50", pairs.size() >= static_cast<std::size_t>(kMinPairedEdits),
                       std::to_string(pairs.size()) + " pairs"});
  ab.checks.push_back({"fallback superset property per trace", ab.superset_violations == 0,
                       std::to_string(ab.superset_violations) + " violations"});
  ab.checks.push_back({"fallback rate non-increasing in tau", fallback_nonincreasing, ""});
  if (std::isinf(taus.back()))
    ab.checks.push_back({"tau = inf never falls back", ab.rows.back().fallback_rate == 0.0,
                         "rate " + fmt(ab.rows.back().fallback_rate)});
  ab.checks.push_back({"background token match non-decreasing in tau", match_nondecreasing, ""});
  return ab;
}

nlohmann::json to_json(const TauAblation& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back(row_json(row));
  return {{"experiment", "ablate-tau"},
          {"decode", decode_config_to_json(r.cfg)},
          {"pairs", pairs_json(r.pairs)},
          {"rows", std::move(rows)},
          {"superset_violations", r.superset_violations},
          {"checks", checks_to_json(r.checks)},
          {"passed", all_passed(r.checks)}};
}

// ---------------------------------------------------------------------------

NpmComparison run_npm_comparison(const ARModel& m, const Codebook& cb, std::span<const EditPair> pairs, int h, int w,
                                 const DecodeConfig& cfg, const std::filesystem::path* export_dir) {
  cfg.validate();
  if (pairs.empty()) throw std::invalid_argument("npm comparison: no edit pairs");
  const auto cases = prepare_cases(m, pairs, h, w, cfg);
  std::vector<MetricReport> npm(cases.size()), isl(cases.size());
  std::vector<double> npm_match(cases.size()), isl_match(cases.size()), anchor_fid(cases.size());
  parallel_for(cases.size(), [&](std::size_t i) {
    const EditCase& c = cases[i];
    DecodeConfig rc = cfg;
    rc.rng_seed = c.pair.seed;
    const TokenGrid baseline = npm_decode(m, c.pair.edit, h, w, rc);
    const DecodeResult res = islock_decode(m, cb, c.pair.edit, c.anchor, rc);
    npm[i] = make_report(cb, c.anchor, baseline, c.mask, c.pair.edit);
    isl[i] = make_report(cb, c.anchor, res.grid, c.mask, c.pair.edit);
    npm_match[i] = background_match(c.anchor, baseline, c.mask);
    isl_match[i] = background_match(c.anchor, res.grid, c.mask);
    anchor_fid[i] = edit_fidelity(c.anchor, c.pair.edit, cb, c.mask);
    export_grid(export_dir, cb, case_name(c.pair) + "_anchor", c.anchor);
    export_grid(export_dir, cb, case_name(c.pair) + "_islock", res.grid);
    export_grid(export_dir, cb, case_name(c.pair) + "_npm", baseline);
  });

  auto summarize_method = [](std::string name, const std::vector<MetricReport>& reps, const std::vector<double>& match) {
    MethodSummary s;
    s.method = std::move(name);
    std::vector<double> psnr, mse, fid;
    for (const auto& r : reps) {
      s.structure.push_back(r.structure_proxy);
      s.bg_ssim.push_back(r.bg_ssim);
      psnr.push_back(r.bg_psnr);
      mse.push_back(r.bg_mse);
      fid.push_back(r.edit_fidelity);
    }
    s.structure_mean = stats::mean(s.structure);
    s.bg_ssim_mean = stats::mean(s.bg_ssim);
    s.bg_psnr_mean = stats::mean(psnr);
    s.bg_mse_mean = stats::mean(mse);
    s.bg_match_mean = stats::mean(match);
    s.fidelity_mean = stats::mean(fid);
    return s;
  };

  NpmComparison cmp;
  cmp.cfg = cfg;
  cmp.pairs.assign(pairs.begin(), pairs.end());
  cmp.npm = summarize_method("NPM", npm, npm_match);
  cmp.islock = summarize_method("ISLock", isl, isl_match);
  cmp.anchor_fidelity_mean = stats::mean(anchor_fid);
  cmp.structure_test = stats::wilcoxon_greater(cmp.npm.structure, cmp.islock.structure);
  cmp.bg_ssim_test = stats::wilcoxon_greater(cmp.islock.bg_ssim, cmp.npm.bg_ssim);

  cmp.checks.push_back({"pair count >= 50", pairs.size() >= static_cast<std::size_t>(kMinPairedEdits),
                        std::to_string(pairs.size()) + " pairs"});
  cmp.checks.push_back({"ISLock structure mean < NPM structure mean",
                        cmp.islock.structure_mean < cmp.npm.structure_mean,
                        fmt(cmp.islock.structure_mean) + " vs " + fmt(cmp.npm.structure_mean)});
  cmp.checks.push_back({"wilcoxon NPM structure > ISLock p < 0.05", cmp.structure_test.p_value < kSignificance,
                        "p = " + fmt(cmp.structure_test.p_value)});
  cmp.checks.push_back({"ISLock bg SSIM mean > NPM bg SSIM mean", cmp.islock.bg_ssim_mean > cmp.npm.bg_ssim_mean,
                        fmt(cmp.islock.bg_ssim_mean) + " vs " + fmt(cmp.npm.bg_ssim_mean)});
  cmp.checks.push_back({"wilcoxon ISLock bg SSIM > NPM p < 0.05", cmp.bg_ssim_test.p_value < kSignificance,
                        "p = " + fmt(cmp.bg_ssim_test.p_value)});
  return cmp;
}

nlohmann::json to_json(const NpmComparison& r) {
  auto method = [](const MethodSummary& s) {
    return nlohmann::json{{"method", s.method},
                          {"structure_proxy_mean", canonical_number(s.structure_mean)},
                          {"bg_ssim_mean", canonical_number(s.bg_ssim_mean)},
                          {"bg_psnr_mean", canonical_number(s.bg_psnr_mean)},
                          {"bg_mse_mean", canonical_number(s.bg_mse_mean)},
                          {"bg_token_match_mean", canonical_number(s.bg_match_mean)},
                          {"edit_fidelity_mean", canonical_number(s.fidelity_mean)}};
  };
  return {{"experiment", "compare"},
          {"decode", decode_config_to_json(r.cfg)},
          {"pairs", pairs_json(r.pairs)},
          {"methods", {method(r.npm), method(r.islock)}},
          {"anchor_edit_fidelity_mean", canonical_number(r.anchor_fidelity_mean)},
          {"wilcoxon_structure_npm_gt_islock", wilcoxon_json(r.structure_test)},
          {"wilcoxon_bg_ssim_islock_gt_npm", wilcoxon_json(r.bg_ssim_test)},
          {"checks", checks_to_json(r.checks)},
          {"passed", all_passed(r.checks)}};
}

}  // namespace islock
