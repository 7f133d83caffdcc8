#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "islock/armodel.hpp"
#include "islock/codebook.hpp"
#include "islock/decoder.hpp"
#include "islock/experiments.hpp"
#include "islock/json_format.hpp"
#include "islock/metrics.hpp"
#include "islock/scene.hpp"

namespace fs = std::filesystem;
using namespace islock;

namespace {

double parse_real(const std::string& s) {
  if (s == "inf" || s == "+inf" || s == "INF" || s == "+INF") return kInf;
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::vector<double> parse_real_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(item));
  return out;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

std::vector<EditKind> parse_kinds(const std::string& s) {
  std::vector<EditKind> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_edit_kind(item));
  return out;
}

void emit(const nlohmann::json& j, const std::string& out) {
  const std::string text = canonical_dump(j);
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text(out, text);
}

int finish_checks(const std::vector<Check>& checks, bool assert_mode) {
  for (const auto& c : checks)
    std::cerr << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : " (" + c.detail + ")") << "\n";
  return assert_mode && !all_passed(checks) ? 1 : 0;
}

struct ModelArgs {
  std::string model = "islock.model";
  std::string codebook = "codebook.json";

  void add(CLI::App* app) {
    app->add_option("--model", model, "model file written by train")->capture_default_str();
    app->add_option("--codebook", codebook, "codebook file written by train")->capture_default_str();
  }

  std::pair<ARModel, Codebook> load() const {
    ARModel m = ARModel::load(model);
    Codebook cb = Codebook::load(codebook);
    if (m.cb_size() != cb.size()) throw std::invalid_argument("model and codebook sizes differ");
    return {std::move(m), std::move(cb)};
  }
};

struct DecodeArgs {
  int K = experiment_decode_config().K;
  std::string tau = "1.0";
  double alpha = 0.6;
  std::string metric = "euclidean_sq";
  std::string candidate_mode = "top_k";
  std::string reference_mode = "greedy";
  std::int64_t seed = 0;

  void add(CLI::App* app, bool with_seed) {
    app->add_option("--k", K, "candidate count")->capture_default_str();
    app->add_option("--tau", tau, "distance threshold (inf allowed)")->capture_default_str();
    app->add_option("--alpha", alpha, "window decay")->capture_default_str();
    app->add_option("--metric", metric, "euclidean_sq | cosine_dist")->capture_default_str();
    app->add_option("--candidate-mode", candidate_mode, "top_k | sample_k")->capture_default_str();
    app->add_option("--reference-mode", reference_mode, "greedy | stochastic")->capture_default_str();
    if (with_seed) app->add_option("--seed", seed, "rng seed")->capture_default_str();
  }

  DecodeConfig config() const {
    DecodeConfig c;
    c.K = K;
    c.tau = parse_real(tau);
    c.alpha = alpha;
    c.metric = parse_metric(metric);
    c.candidate_mode = parse_candidate_mode(candidate_mode);
    c.reference_mode = parse_reference_mode(reference_mode);
    c.rng_seed = seed;
    c.validate();
    return c;
  }
};

struct ExperimentArgs {
  std::string seed_list = "0-59";
  std::string out;
  std::string export_dir;
  bool assert_mode = false;

  void add(CLI::App* app) {
    app->add_option("--seed-list", seed_list, "seeds, e.g. 0-59 or 1,4,9")->capture_default_str();
    app->add_option("--out", out, "JSON report path (stdout when omitted)");
    app->add_option("--export-images", export_dir, "directory for PPM dumps");
    app->add_flag("--assert", assert_mode, "exit nonzero when a trend check fails");
  }

  std::optional<fs::path> export_path() const {
    if (export_dir.empty()) return std::nullopt;
    return fs::path(export_dir);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ISLock: anchor token matching for training-free autoregressive image editing"};
  app.require_subcommand(1);

  // train ------------------------------------------------------------------
  StackConfig stack;
  std::string train_model = "islock.model", train_codebook = "codebook.json", train_corpus, train_out;
  auto* train = app.add_subcommand("train", "build codebook and corpus, fit the model");
  train->add_option("--cb-size", stack.cb_size, "codebook size")->capture_default_str();
  train->add_option("--cb-dim", stack.cb_dim, "embedding dimension")->capture_default_str();
  train->add_option("--cb-seed", stack.cb_seed, "codebook seed")->capture_default_str();
  train->add_option("--height", stack.height, "grid height")->capture_default_str();
  train->add_option("--width", stack.width, "grid width")->capture_default_str();
  train->add_option("--n-per-prompt", stack.n_per_prompt, "variants per prompt")->capture_default_str();
  train->add_option("--corpus-seed", stack.corpus_seed, "corpus seed")->capture_default_str();
  train->add_option("--smoothing", stack.model.smoothing, "additive smoothing")->capture_default_str();
  train->add_option("--model", train_model, "model output path")->capture_default_str();
  train->add_option("--codebook", train_codebook, "codebook output path")->capture_default_str();
  train->add_option("--corpus-out", train_corpus, "also write the corpus (JSON lines)");
  train->add_option("--out", train_out, "JSON summary path (stdout when omitted)");

  // gen --------------------------------------------------------------------
  ModelArgs gen_model;
  DecodeArgs gen_decode;
  std::string gen_prompt, gen_grid, gen_image, gen_out;
  auto* gen = app.add_subcommand("gen", "generate a reference image for a prompt");
  gen_model.add(gen);
  gen->add_option("--prompt", gen_prompt, "object:color:background:style")->required();
  gen->add_option("--seed", gen_decode.seed, "rng seed (stochastic mode)")->capture_default_str();
  gen->add_option("--reference-mode", gen_decode.reference_mode, "greedy | stochastic")->capture_default_str();
  gen->add_option("--out-grid", gen_grid, "token grid JSON");
  gen->add_option("--out-image", gen_image, "PPM image");
  gen->add_option("--out", gen_out, "JSON summary path (stdout when omitted)");

  // edit -------------------------------------------------------------------
  ModelArgs edit_model;
  DecodeArgs edit_decode;
  std::string edit_org, edit_prompt, edit_anchor, edit_grid, edit_image, edit_trace, edit_out;
  auto* edit = app.add_subcommand("edit", "edit an anchor image with anchor token matching");
  edit_model.add(edit);
  edit_decode.add(edit, true);
  edit->add_option("--prompt-org", edit_org, "source prompt object:color:background:style")->required();
  edit->add_option("--prompt-edit", edit_prompt, "edit prompt object:color:background:style")->required();
  edit->add_option("--anchor", edit_anchor, "anchor grid JSON (generated from --prompt-org when omitted)");
  edit->add_option("--out-grid", edit_grid, "edited token grid JSON");
  edit->add_option("--out-image", edit_image, "edited PPM image");
  edit->add_option("--out-trace", edit_trace, "per-step trace (JSON lines)");
  edit->add_option("--out", edit_out, "metric report JSON (stdout when omitted)");

  // perturb ----------------------------------------------------------------
  ModelArgs pert_model;
  ExperimentArgs pert_exp;
  double pert_fraction = 0.2;
  auto* perturb = app.add_subcommand("perturb", "early vs late token perturbation study");
  pert_model.add(perturb);
  pert_exp.add(perturb);
  perturb->add_option("--fraction", pert_fraction, "perturbed share of the sequence")->capture_default_str();

  // ablate-window ------------------------------------------------------------
  ModelArgs win_model;
  DecodeArgs win_decode;
  ExperimentArgs win_exp;
  std::string win_sizes, win_kinds = "color,object,style";
  auto* ablate_window = app.add_subcommand("ablate-window", "fixed windows against the shrinking schedule");
  win_model.add(ablate_window);
  win_decode.add(ablate_window, false);
  win_exp.add(ablate_window);
  ablate_window->add_option("--windows", win_sizes, "fixed window sizes (default K/3,2K/3,K)");
  ablate_window->add_option("--edit-kinds", win_kinds, "edit kinds to draw from")->capture_default_str();

  // ablate-tau -------------------------------------------------------------
  ModelArgs tau_model;
  DecodeArgs tau_decode;
  ExperimentArgs tau_exp;
  std::string tau_values = "0.25,0.5,1.0,2.0,inf", tau_kinds = "color,object,style";
  auto* ablate_tau = app.add_subcommand("ablate-tau", "threshold sweep");
  tau_model.add(ablate_tau);
  tau_decode.add(ablate_tau, false);
  tau_exp.add(ablate_tau);
  ablate_tau->add_option("--taus", tau_values, "ascending thresholds")->capture_default_str();
  ablate_tau->add_option("--edit-kinds", tau_kinds, "edit kinds to draw from")->capture_default_str();

  // compare ----------------------------------------------------------------
  ModelArgs cmp_model;
  DecodeArgs cmp_decode;
  ExperimentArgs cmp_exp;
  std::string cmp_kinds = "color,object,style";
  auto* compare = app.add_subcommand("compare", "ISLock against naive prompt modification");
  cmp_model.add(compare);
  cmp_decode.add(compare, false);
  cmp_exp.add(compare);
  compare->add_option("--edit-kinds", cmp_kinds, "edit kinds to draw from")->capture_default_str();

  // report -----------------------------------------------------------------
  std::string rep_codebook = "codebook.json", rep_source, rep_result, rep_prompt, rep_out;
  auto* report = app.add_subcommand("report", "metric report for a source/result grid pair");
  report->add_option("--codebook", rep_codebook, "codebook file")->capture_default_str();
  report->add_option("--source", rep_source, "source (anchor) grid JSON")->required();
  report->add_option("--result", rep_result, "result grid JSON")->required();
  report->add_option("--prompt-edit", rep_prompt, "edit prompt object:color:background:style")->required();
  report->add_option("--out", rep_out, "JSON report path (stdout when omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      const Stack s = build_stack(stack);
      s.codebook.save(train_codebook);
      s.model.save(train_model);
      if (!train_corpus.empty()) save_corpus(s.corpus, train_corpus);
      char hash[17];
      std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(corpus_hash(s.corpus)));
      emit({{"codebook", {{"size", stack.cb_size}, {"dim", stack.cb_dim}, {"seed", stack.cb_seed}}},
            {"corpus", {{"height", stack.height}, {"width", stack.width}, {"n_per_prompt", stack.n_per_prompt},
                        {"seed", stack.corpus_seed}, {"count", s.corpus.size()}, {"hash", hash}}},
            {"model", {{"smoothing", canonical_number(stack.model.smoothing)},
                       {"neighborhood_contexts", s.model.neighborhood_contexts()}}}},
           train_out);
      return 0;
    }

    if (*gen) {
      const auto [m, cb] = gen_model.load();
      const Prompt p = parse_prompt(gen_prompt);
      DecodeConfig c;
      c.reference_mode = parse_reference_mode(gen_decode.reference_mode);
      c.rng_seed = gen_decode.seed;
      const TokenGrid g = generate_reference(m, p, m.train_height(), m.train_width(), c);
      if (!gen_grid.empty()) save_grid(g, gen_grid);
      if (!gen_image.empty()) write_ppm(cb.decode_grid(g), gen_image);
      const RegionMask mask = object_mask(g);
      const TokenGrid modal = modal_render(p, cb, g.height, g.width).grid;
      std::size_t same = 0;
      for (std::size_t i = 0; i < g.tokens.size(); ++i) same += g.tokens[i] == modal.tokens[i] ? 1 : 0;
      emit({{"prompt", to_string(p)},
            {"reference_mode", to_string(c.reference_mode)},
            {"seed", c.rng_seed},
            {"object_area", mask.count()},
            {"modal_token_accuracy", canonical_number(static_cast<double>(same) / static_cast<double>(g.size()))}},
           gen_out);
      return 0;
    }

    if (*edit) {
      const auto [m, cb] = edit_model.load();
      const DecodeConfig c = edit_decode.config();
      const Prompt org = parse_prompt(edit_org);
      const Prompt pe = parse_prompt(edit_prompt);
      const TokenGrid anchor =
          edit_anchor.empty() ? generate_reference(m, org, m.train_height(), m.train_width(), c) : load_grid(edit_anchor);
      const DecodeResult res = islock_decode(m, cb, pe, anchor, c);
      if (!edit_grid.empty()) save_grid(res.grid, edit_grid);
      if (!edit_image.empty()) write_ppm(cb.decode_grid(res.grid), edit_image);
      if (!edit_trace.empty()) write_text(edit_trace, trace_to_jsonl(res.trace));
      long fallbacks = 0;
      for (const auto& s : res.trace) fallbacks += s.used_fallback ? 1 : 0;
      nlohmann::json j = {{"prompt_org", to_string(org)},
                          {"prompt_edit", to_string(pe)},
                          {"decode", decode_config_to_json(c)},
                          {"fallback_steps", fallbacks},
                          {"steps", res.trace.size()}};
      const RegionMask mask = object_mask(anchor);
      if (mask.count() > 0) {
        j["metrics"] = report_to_json(make_report(cb, anchor, res.grid, mask, pe));
        if (mask.count() < anchor.size())
          j["bg_token_match"] = canonical_number(background_match(anchor, res.grid, mask));
      }
      emit(j, edit_out);
      return 0;
    }

    if (*perturb) {
      const auto [m, cb] = pert_model.load();
      const auto seeds = parse_seed_list(pert_exp.seed_list);
      const auto dir = pert_exp.export_path();
      const auto rep = run_perturbation_study(m, cb, seeds, m.train_height(), m.train_width(), pert_fraction,
                                              dir ? &*dir : nullptr);
      emit(to_json(rep), pert_exp.out);
      return finish_checks(rep.checks, pert_exp.assert_mode);
    }

    if (*ablate_window) {
      const auto [m, cb] = win_model.load();
      const auto pairs = make_edit_pairs(parse_seed_list(win_exp.seed_list), parse_kinds(win_kinds));
      const auto dir = win_exp.export_path();
      const auto rep = run_window_ablation(m, cb, pairs, m.train_height(), m.train_width(),
                                           win_sizes.empty() ? std::vector<int>{} : parse_int_list(win_sizes),
                                           win_decode.config(), dir ? &*dir : nullptr);
      emit(to_json(rep), win_exp.out);
      return finish_checks(rep.checks, win_exp.assert_mode);
    }

    if (*ablate_tau) {
      const auto [m, cb] = tau_model.load();
      const auto pairs = make_edit_pairs(parse_seed_list(tau_exp.seed_list), parse_kinds(tau_kinds));
      const auto dir = tau_exp.export_path();
      const auto rep = run_tau_ablation(m, cb, pairs, m.train_height(), m.train_width(), parse_real_list(tau_values),
                                        tau_decode.config(), dir ? &*dir : nullptr);
      emit(to_json(rep), tau_exp.out);
      return finish_checks(rep.checks, tau_exp.assert_mode);
    }

    if (*compare) {
      const auto [m, cb] = cmp_model.load();
      const auto pairs = make_edit_pairs(parse_seed_list(cmp_exp.seed_list), parse_kinds(cmp_kinds));
      const auto dir = cmp_exp.export_path();
      const auto rep = run_npm_comparison(m, cb, pairs, m.train_height(), m.train_width(), cmp_decode.config(),
                                          dir ? &*dir : nullptr);
      emit(to_json(rep), cmp_exp.out);
      return finish_checks(rep.checks, cmp_exp.assert_mode);
    }

    if (*report) {
      const Codebook cb = Codebook::load(rep_codebook);
      const TokenGrid source = load_grid(rep_source);
      const TokenGrid result = load_grid(rep_result);
      const RegionMask mask = object_mask(source);
      emit(report_to_json(make_report(cb, source, result, mask, parse_prompt(rep_prompt))), rep_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
