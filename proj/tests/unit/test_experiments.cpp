#include "doctest.h"
#include "fixture.hpp"
#include "islock/json_format.hpp"

using namespace islock;

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("3") == std::vector<std::int64_t>{3});
  CHECK(parse_seed_list("0-3,9") == std::vector<std::int64_t>{0, 1, 2, 3, 9});
  CHECK(parse_seed_list("-2") == std::vector<std::int64_t>{-2});
  CHECK_THROWS_AS(parse_seed_list("5-2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_seed_list("x"), std::invalid_argument);
  CHECK_THROWS_AS(parse_seed_list(""), std::invalid_argument);
}

TEST_CASE("edit pairs change exactly the chosen attribute") {
  const auto kinds = default_edit_kinds();
  std::vector<int> seen(4, 0);
  for (std::int64_t s = 0; s < 300; ++s) {
    const EditPair p = make_edit_pair(s, kinds);
    CHECK(p == make_edit_pair(s, kinds));
    ++seen[static_cast<int>(p.kind)];
    const int diffs = (p.org.object != p.edit.object) + (p.org.color != p.edit.color) +
                      (p.org.background != p.edit.background) + (p.org.style != p.edit.style);
    CHECK(diffs == 1);
    CHECK(is_valid(p.edit));
    switch (p.kind) {
      case EditKind::color: CHECK(p.org.color != p.edit.color); break;
      case EditKind::object: CHECK(p.org.object != p.edit.object); break;
      case EditKind::style: CHECK(p.org.style != p.edit.style); break;
      case EditKind::background: CHECK(p.org.background != p.edit.background); break;
    }
  }
  CHECK(seen[static_cast<int>(EditKind::background)] == 0);
  for (int k = 0; k < 3; ++k) CHECK(seen[k] > 50);
}

TEST_CASE("perturb_and_regenerate") {
  const auto& s = testing::default_stack();
  const Prompt p{3, 4, 2, 1};
  const TokenGrid base = generate_reference(s.model, p, 32, 32, {});
  const TokenGrid late = perturb_and_regenerate(s.model, p, base, PerturbRange::last, 5);
  const int N = static_cast<int>(base.size());
  const int len = N / 5;
  for (int i = 0; i < N - len; ++i) CHECK(late.tokens[static_cast<std::size_t>(i)] == base.tokens[static_cast<std::size_t>(i)]);
  CHECK_FALSE(late == base);
  const TokenGrid early = perturb_and_regenerate(s.model, p, base, PerturbRange::first, 5);
  CHECK(early == perturb_and_regenerate(s.model, p, base, PerturbRange::first, 5));
  CHECK(perturb_and_regenerate(s.model, p, base, PerturbRange::first, 5, 0.0) == base);
  CHECK(perturb_and_regenerate(s.model, p, base, PerturbRange::last, 5, 0.0) == base);
  CHECK_THROWS_AS(perturb_and_regenerate(s.model, p, TokenGrid(2, 2, 0), PerturbRange::first, 1), std::invalid_argument);
  // Regeneration after the first range is greedy, so it continues exactly
  // as greedy decoding would from the perturbed prefix.
  TokenGrid manual = early;
  for (int i = len; i < N; ++i) {
    const Context ctx = make_context(manual.tokens, 32, 32, i, p);
    manual.tokens[static_cast<std::size_t>(i)] = s.model.top_k(ctx, 1).front().first;
  }
  CHECK(manual == early);
}

TEST_CASE("perturbation study needs enough seeds and is reproducible") {
  const auto& s = testing::default_stack();
  const auto few = parse_seed_list("0-28");
  CHECK_THROWS_AS(run_perturbation_study(s.model, s.codebook, few, 32, 32), std::invalid_argument);
  const auto seeds = parse_seed_list("0-29");
  const auto a = run_perturbation_study(s.model, s.codebook, seeds, 32, 32);
  const auto b = run_perturbation_study(s.model, s.codebook, seeds, 32, 32);
  CHECK(canonical_dump(to_json(a)) == canonical_dump(to_json(b)));
  for (const auto& r : a.records) {
    CHECK(r.early >= 0.0);
    CHECK(r.early <= 2.0);
    CHECK(r.late >= 0.0);
    CHECK(r.late <= 2.0);
  }
}

TEST_CASE("sweeps are reproducible and internally consistent") {
  const auto& s = testing::default_stack();
  const auto seeds = parse_seed_list("100-111");
  const auto pairs = make_edit_pairs(seeds, default_edit_kinds());
  const DecodeConfig cfg = experiment_decode_config();

  const auto t1 = run_tau_ablation(s.model, s.codebook, pairs, 32, 32, {}, cfg);
  const auto t2 = run_tau_ablation(s.model, s.codebook, pairs, 32, 32, {}, cfg);
  CHECK(canonical_dump(to_json(t1)) == canonical_dump(to_json(t2)));
  REQUIRE(t1.rows.size() == kDefaultTaus.size());
  CHECK(t1.rows.back().fallback_rate == 0.0);
  CHECK(t1.superset_violations == 0);
  CHECK_THROWS_AS(run_tau_ablation(s.model, s.codebook, pairs, 32, 32, {1.0, 0.5}, cfg), std::invalid_argument);

  const auto w = run_window_ablation(s.model, s.codebook, pairs, 32, 32, {}, cfg);
  REQUIRE(w.fixed.size() == 3u);
  CHECK(*w.fixed[0].window == 16);
  CHECK(*w.fixed[2].window == 48);
  CHECK_FALSE(w.dynamic.window.has_value());

  // The dynamic row and the τ = 1 row run the same decode.
  const auto& tau1 = t1.rows[2];
  CHECK(tau1.tau == 1.0);
  CHECK(w.dynamic.structure == tau1.structure);
  CHECK(w.dynamic.fidelity == tau1.fidelity);

  const auto c = run_npm_comparison(s.model, s.codebook, pairs, 32, 32, cfg);
  CHECK(canonical_dump(to_json(c)) == canonical_dump(to_json(run_npm_comparison(s.model, s.codebook, pairs, 32, 32, cfg))));
  CHECK(c.islock.structure == w.dynamic.structure);
}

TEST_CASE("no-op edits preserve the background exactly") {
  const auto& s = testing::default_stack();
  std::vector<EditPair> pairs;
  for (std::int64_t seed = 0; seed < 10; ++seed) {
    EditPair p = make_edit_pair(seed, default_edit_kinds());
    p.edit = p.org;
    pairs.push_back(p);
  }
  const auto c = run_npm_comparison(s.model, s.codebook, pairs, 32, 32, experiment_decode_config());
  CHECK(c.islock.bg_match_mean == 1.0);
  CHECK(c.islock.structure_mean == 0.0);
  CHECK(c.npm.bg_match_mean == 1.0);
}

TEST_CASE("color edits: ISLock keeps more background than NPM and both move toward the edit") {
  const auto& s = testing::default_stack();
  const std::vector<EditKind> kinds{EditKind::color};
  const auto seeds = parse_seed_list("0-59");
  const auto c = run_npm_comparison(s.model, s.codebook, make_edit_pairs(seeds, kinds), 32, 32,
                                    experiment_decode_config());
  CHECK(c.islock.bg_match_mean > c.npm.bg_match_mean);
  CHECK(c.islock.fidelity_mean > c.anchor_fidelity_mean);
  CHECK(c.npm.fidelity_mean > c.anchor_fidelity_mean);
}
