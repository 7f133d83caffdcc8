#include <filesystem>
#include <set>

#include "doctest.h"
#include "islock/scene.hpp"

using namespace islock;

namespace {

const Codebook& cb() {
  static const Codebook c(96, 8, 7);
  return c;
}

std::vector<Prompt> all_prompts() {
  std::vector<Prompt> out;
  for (int i = 0; i < kPromptCount; ++i) out.push_back(prompt_from_index(i));
  return out;
}

}  // namespace

TEST_CASE("prompt index is a bijection and parsing round trips") {
  std::set<Prompt> seen;
  for (int i = 0; i < kPromptCount; ++i) {
    const Prompt p = prompt_from_index(i);
    CHECK(prompt_index(p) == i);
    CHECK(parse_prompt(to_string(p)) == p);
    seen.insert(p);
  }
  CHECK(seen.size() == static_cast<std::size_t>(kPromptCount));
  CHECK(parse_prompt("3:1:2:0") == Prompt{3, 1, 2, 0});
  CHECK_THROWS_AS(parse_prompt("3:1:2"), std::invalid_argument);
  CHECK_THROWS_AS(parse_prompt("8:0:0:0"), std::invalid_argument);
  CHECK_THROWS_AS(parse_prompt("a:b:c:d"), std::invalid_argument);
}

TEST_CASE("attribute tokens stay in their blocks") {
  for (const Prompt& p : all_prompts()) {
    for (TokenId t : foreground_tokens(p)) {
      CHECK(t < 64u);
      CHECK(is_foreground_token(t));
      CHECK(t / 8 == static_cast<TokenId>(p.color));
    }
    for (TokenId t : background_tokens(p)) {
      CHECK(t >= 64u);
      CHECK(t < static_cast<TokenId>(kRequiredCodebookSize));
      CHECK_FALSE(is_foreground_token(t));
    }
  }
  // Within one color and style, objects get distinct tokens.
  for (int c = 0; c < kColors; ++c)
    for (int s = 0; s < kStyles; ++s) {
      std::set<TokenId> ts;
      for (int o = 0; o < kObjects; ++o) ts.insert(foreground_token(o, c, s));
      CHECK(ts.size() == static_cast<std::size_t>(kObjects));
    }
}

TEST_CASE("scene_render is deterministic and the mask is the silhouette") {
  for (int i = 0; i < kPromptCount; i += 37) {
    const Prompt p = prompt_from_index(i);
    const Scene a = scene_render(p, cb(), 32, 32, 1234 + i);
    const Scene b = scene_render(p, cb(), 32, 32, 1234 + i);
    CHECK(a.grid == b.grid);
    CHECK(a.mask == b.mask);
    const Layout l = jittered_layout(32, 32, 1234 + i);
    const auto fg = foreground_tokens(p);
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        CHECK(a.mask.at(r, c) == silhouette_contains(p.object, l, r, c));
        CHECK(is_foreground_token(a.grid.at(r, c)) == a.mask.at(r, c));
      }
    CHECK(foreground_mask(a.grid, p) == a.mask);
    CHECK(object_mask(a.grid) == a.mask);
  }
}

TEST_CASE("background edits leave the object, color edits leave the background") {
  for (int i = 0; i < kPromptCount; i += 5) {
    const Prompt p = prompt_from_index(i);
    const std::int64_t seed = 77 + i;
    const Scene base = scene_render(p, cb(), 24, 28, seed);

    Prompt bg = p;
    bg.background = (p.background + 1) % kBackgrounds;
    const Scene sb = scene_render(bg, cb(), 24, 28, seed);
    bool outside_differs = false;
    for (std::size_t k = 0; k < base.grid.size(); ++k) {
      if (base.mask.bits[k]) CHECK(sb.grid.tokens[k] == base.grid.tokens[k]);
      else outside_differs = outside_differs || sb.grid.tokens[k] != base.grid.tokens[k];
    }
    CHECK(outside_differs);

    Prompt col = p;
    col.color = (p.color + 3) % kColors;
    const Scene sc = scene_render(col, cb(), 24, 28, seed);
    bool inside_differs = false;
    for (std::size_t k = 0; k < base.grid.size(); ++k) {
      if (!base.mask.bits[k]) CHECK(sc.grid.tokens[k] == base.grid.tokens[k]);
      else inside_differs = inside_differs || sc.grid.tokens[k] != base.grid.tokens[k];
    }
    CHECK(inside_differs);
  }
}

TEST_CASE("mask area stays within [5%, 60%] for every object, size and jitter") {
  // Jitter only shifts the canonical box by d in {-1, 0, 1}; enumerate all of them.
  for (int h = kMinSceneSide; h <= 48; h += 3)
    for (int w = kMinSceneSide; w <= 48; w += 5)
      for (int d = -1; d <= 1; ++d) {
        Layout l = canonical_layout(h, w);
        l.top = std::clamp(l.top + d, 0, h - 2 * l.half_h);
        l.left = std::clamp(l.left + d, 0, w - 2 * l.half_w);
        for (int o = 0; o < kObjects; ++o) {
          int area = 0;
          for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) area += silhouette_contains(o, l, r, c) ? 1 : 0;
          const double frac = static_cast<double>(area) / (h * w);
          CHECK(frac >= 0.05);
          CHECK(frac <= 0.60);
        }
      }
  for (std::int64_t seed = 0; seed < 200; ++seed) {
    const Layout l = jittered_layout(32, 32, seed);
    const Layout c = canonical_layout(32, 32);
    CHECK(l.half_h == c.half_h);
    CHECK(std::abs(l.top - c.top) <= 1);
    CHECK(l.top - c.top == l.left - c.left);
  }
}

TEST_CASE("scene_render rejects small grids, small codebooks and bad prompts") {
  CHECK_THROWS_AS(scene_render({}, cb(), 7, 32, 0), std::invalid_argument);
  CHECK_THROWS_AS(scene_render({}, cb(), 32, 7, 0), std::invalid_argument);
  CHECK_THROWS_AS(scene_render({}, Codebook(79, 8, 1), 32, 32, 0), std::invalid_argument);
  CHECK_THROWS_AS(scene_render({0, 0, 4, 0}, cb(), 32, 32, 0), std::invalid_argument);
}

TEST_CASE("corpus covers every prompt in order and is reproducible") {
  const Corpus c = corpus_build(cb(), 16, 16, 2, 11);
  REQUIRE(c.size() == 2048u);
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c[i].prompt == prompt_from_index(static_cast<int>(i / 2)));
    CHECK(c[i].grid.size() == 256u);
  }
  CHECK(corpus_hash(c) == corpus_hash(corpus_build(cb(), 16, 16, 2, 11)));
  CHECK(corpus_hash(c) != corpus_hash(corpus_build(cb(), 16, 16, 2, 12)));
  CHECK_THROWS_AS(corpus_build(cb(), 16, 16, 0, 11), std::invalid_argument);
}

TEST_CASE("corpus and grid files round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "islock_scene_test";
  std::filesystem::create_directories(dir);
  const Corpus c = corpus_build(cb(), 8, 8, 1, 3);
  save_corpus(c, dir / "corpus.jsonl");
  CHECK(load_corpus(dir / "corpus.jsonl") == c);
  save_grid(c[17].grid, dir / "grid.json");
  CHECK(load_grid(dir / "grid.json") == c[17].grid);
  const PixelGrid img = cb().decode_grid(c[17].grid);
  CHECK(decode_ppm(encode_ppm(img)) == img);
  CHECK(encode_ppm(img).rfind("P6\n8 8\n255\n", 0) == 0);
  std::filesystem::remove_all(dir);
}
