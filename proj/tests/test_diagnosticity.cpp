#include "doctest.h"

#include <cmath>
#include <map>

#include "mmscope/diagnosticity.hpp"
#include "mmscope/errors.hpp"
#include "mmscope/rng.hpp"
#include "test_helpers.hpp"

using namespace mmscope;

namespace {

BBox random_box(rng::Engine& g) {
  const double x = rng::uniform(g, 0.0, 50.0);
  const double y = rng::uniform(g, 0.0, 50.0);
  return {x, y, x + rng::uniform(g, 1.0, 40.0),
          y + rng::uniform(g, 1.0, 40.0)};
}

// Monte-Carlo area oracle over the joint bounding region.
std::pair<double, double> mc_iou_containment(const BBox& a, const BBox& b,
                                             std::size_t points,
                                             std::uint64_t seed) {
  const double lo_x = std::min(a.x_min, b.x_min);
  const double hi_x = std::max(a.x_max, b.x_max);
  const double lo_y = std::min(a.y_min, b.y_min);
  const double hi_y = std::max(a.y_max, b.y_max);
  rng::Engine g(seed);
  std::size_t in_a = 0, in_b = 0, in_both = 0;
  for (std::size_t i = 0; i < points; ++i) {
    const double x = rng::uniform(g, lo_x, hi_x);
    const double y = rng::uniform(g, lo_y, hi_y);
    const bool hit_a =
        x >= a.x_min && x <= a.x_max && y >= a.y_min && y <= a.y_max;
    const bool hit_b =
        x >= b.x_min && x <= b.x_max && y >= b.y_min && y <= b.y_max;
    in_a += hit_a;
    in_b += hit_b;
    in_both += hit_a && hit_b;
  }
  const double uni = static_cast<double>(in_a + in_b - in_both);
  const double iou = uni == 0.0 ? 0.0 : static_cast<double>(in_both) / uni;
  const double cont =
      in_a == 0 ? 0.0
                : static_cast<double>(in_both) / static_cast<double>(in_a);
  return {iou, cont};
}

std::vector<SampleRecord> planted_corpus(std::uint64_t seed) {
  const std::vector<std::string> scenes{"station", "road", "sea"};
  const std::vector<std::string> objects{"train", "car", "boat", "person"};
  // presence probability per (scene, object)
  const double probs[3][4] = {{0.9, 0.1, 0.05, 0.6},
                              {0.1, 0.9, 0.05, 0.6},
                              {0.05, 0.1, 0.9, 0.6}};
  rng::Engine g(seed);
  std::vector<SampleRecord> corpus;
  for (int i = 0; i < 300; ++i) {
    SampleRecord rec;
    rec.sample_id = "p" + std::to_string(i);
    const std::size_t s = rng::below(g, scenes.size());
    rec.scene_type = scenes[s];
    for (std::size_t o = 0; o < objects.size(); ++o) {
      if (rng::u01(g) < probs[s][o]) {
        rec.object_tags.push_back({objects[o], {0, 0, 1, 1}});
      }
    }
    corpus.push_back(std::move(rec));
  }
  return corpus;
}

}  // namespace

TEST_SUITE("diagnosticity") {

TEST_CASE("bbox iou worked values") {
  const BBox a{0, 0, 2, 2};
  CHECK(bbox_iou(a, a) == doctest::Approx(1.0));
  CHECK(bbox_iou(a, BBox{1, 1, 3, 3}) ==
        doctest::Approx(1.0 / 7.0).epsilon(1e-12));
  CHECK(bbox_iou(a, BBox{5, 5, 6, 6}) == 0.0);
  CHECK(bbox_iou(BBox{1, 1, 3, 3}, a) ==
        doctest::Approx(bbox_iou(a, BBox{1, 1, 3, 3})).epsilon(1e-15));
}

TEST_CASE("containment worked values") {
  CHECK(containment_fraction(BBox{1, 1, 2, 2}, BBox{0, 0, 4, 4}) ==
        doctest::Approx(1.0));
  CHECK(containment_fraction(BBox{1, 1, 2, 2}, BBox{5, 5, 6, 6}) == 0.0);
  CHECK(containment_fraction(BBox{0, 0, 2, 2}, BBox{0, 0, 1, 2}) ==
        doctest::Approx(0.5));
}

TEST_CASE("geometry matches a Monte-Carlo oracle") {
  rng::Engine g(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const BBox a = random_box(g);
    const BBox b = random_box(g);
    const auto [iou_mc, cont_mc] = mc_iou_containment(a, b, 200000, 55 + trial);
    CHECK(bbox_iou(a, b) == doctest::Approx(iou_mc).epsilon(0.02));
    CHECK(containment_fraction(a, b) ==
          doctest::Approx(cont_mc).epsilon(0.02));
  }
}

TEST_CASE("assignment rules") {
  const BBox tag{0, 0, 10, 10};

  SUBCASE("identical boxes pick the IoU rule") {
    const Assignments a = assign_labels_to_features(
        std::vector<BBox>{tag}, std::vector<ObjectTag>{{"dog", tag}});
    REQUIRE(a.items.size() == 1);
    CHECK(a.items[0].rule == TagRule::IouRule);
    CHECK(a.items[0].label == "dog");
    CHECK(a.coverage == doctest::Approx(1.0));
  }

  SUBCASE("containment catches nested boxes with low IoU") {
    const BBox vf{1, 1, 6, 6};  // area 25, inside 100 -> IoU 0.25
    const Assignments a = assign_labels_to_features(
        std::vector<BBox>{vf}, std::vector<ObjectTag>{{"dog", tag}});
    REQUIRE(a.items.size() == 1);
    CHECK(a.items[0].rule == TagRule::ContainmentRule);
    CHECK(a.items[0].containment == doctest::Approx(1.0));
  }

  SUBCASE("zero features define coverage one") {
    const Assignments a = assign_labels_to_features(
        std::vector<BBox>{}, std::vector<ObjectTag>{{"dog", tag}});
    CHECK(a.items.empty());
    CHECK(a.coverage == 1.0);
  }

  SUBCASE("no candidate leaves the feature unassigned") {
    const Assignments a = assign_labels_to_features(
        std::vector<BBox>{{100, 100, 101, 101}},
        std::vector<ObjectTag>{{"dog", tag}});
    CHECK(a.items[0].rule == TagRule::Unassigned);
    CHECK(a.coverage == 0.0);
  }
}

TEST_CASE("crafted 50-feature fixture covers 74 percent") {
  const BBox tag{0, 0, 10, 10};
  std::vector<BBox> features;
  for (int i = 0; i < 37; ++i) {
    // Small jitters that stay above the IoU threshold.
    const double d = 0.01 * i;
    features.push_back({d, 0, 10 + d, 10});
  }
  for (int i = 0; i < 13; ++i) {
    features.push_back(
        {100.0 + 2 * i, 100.0, 101.0 + 2 * i, 101.0});
  }
  REQUIRE(features.size() == 50);
  const Assignments a = assign_labels_to_features(
      features, std::vector<ObjectTag>{{"dog", tag}});
  CHECK(a.coverage == doctest::Approx(0.74));
}

TEST_CASE("raising thresholds never raises coverage") {
  rng::Engine g(808);
  std::vector<BBox> features;
  std::vector<ObjectTag> tags;
  for (int i = 0; i < 40; ++i) features.push_back(random_box(g));
  for (int i = 0; i < 8; ++i) {
    tags.push_back({"t" + std::to_string(i), random_box(g)});
  }
  const double base =
      assign_labels_to_features(features, tags, 0.3, 0.5).coverage;
  CHECK(assign_labels_to_features(features, tags, 0.5, 0.5).coverage <=
        base);
  CHECK(assign_labels_to_features(features, tags, 0.3, 0.8).coverage <=
        base);
}

TEST_CASE("pmi worked values") {
  // 20 images: scene s1 in 10, object o in 10, co-occurring in 5.
  std::vector<SampleRecord> corpus;
  auto add = [&](const std::string& scene, bool with_o) {
    SampleRecord rec;
    rec.sample_id = "i" + std::to_string(corpus.size());
    rec.scene_type = scene;
    if (with_o) rec.object_tags.push_back({"o", {0, 0, 1, 1}});
    rec.object_tags.push_back({"filler", {0, 0, 1, 1}});
    corpus.push_back(std::move(rec));
  };
  for (int i = 0; i < 5; ++i) add("s1", true);
  for (int i = 0; i < 5; ++i) add("s1", false);
  for (int i = 0; i < 5; ++i) add("s2", true);
  for (int i = 0; i < 5; ++i) add("s2", false);

  const PmiTable independent = pmi_table(corpus, 1);
  CHECK(independent.entries.at({"s1", "o"}).pmi ==
        doctest::Approx(0.0).epsilon(1e-12));

  // o only within s1: 5 of 20 images, s1 in 10 -> 1 bit.
  corpus.clear();
  for (int i = 0; i < 5; ++i) add("s1", true);
  for (int i = 0; i < 5; ++i) add("s1", false);
  for (int i = 0; i < 10; ++i) add("s2", false);
  const PmiTable exclusive = pmi_table(corpus, 1);
  CHECK(exclusive.entries.at({"s1", "o"}).pmi ==
        doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(pmi_table(std::vector<SampleRecord>{}, 1), Error);
}

TEST_CASE("pmi matches the full-scan oracle in all formulations") {
  const std::vector<SampleRecord> corpus = planted_corpus(400);
  const PmiTable table = pmi_table(corpus, 3);
  REQUIRE_FALSE(table.entries.empty());

  for (const auto& [key, entry] : table.entries) {
    // Independent recount.
    long joint = 0, scene_count = 0, object_count = 0;
    for (const SampleRecord& rec : corpus) {
      const bool in_scene = *rec.scene_type == key.first;
      bool has_object = false;
      for (const ObjectTag& tag : rec.object_tags) {
        if (tag.label == key.second) has_object = true;
      }
      scene_count += in_scene;
      object_count += has_object;
      joint += in_scene && has_object;
    }
    CHECK(entry.joint_count == joint);
    CHECK(entry.scene_count == scene_count);
    CHECK(entry.object_count == object_count);
    const double total = static_cast<double>(corpus.size());
    const double expect =
        std::log2((joint / total) /
                  ((scene_count / total) * (object_count / total)));
    CHECK(entry.pmi == doctest::Approx(expect).epsilon(1e-12));

    // Same value from the conditional formulations.
    const double via_object = std::log2(
        (static_cast<double>(joint) / scene_count) / (object_count / total));
    const double via_scene = std::log2(
        (static_cast<double>(joint) / object_count) / (scene_count / total));
    CHECK(entry.pmi == doctest::Approx(via_object).epsilon(1e-12));
    CHECK(entry.pmi == doctest::Approx(via_scene).epsilon(1e-12));
  }
}

TEST_CASE("pmi support cutoff omits rare pairs") {
  const std::vector<SampleRecord> corpus = planted_corpus(401);
  const PmiTable strict = pmi_table(corpus, 40);
  for (const auto& [key, entry] : strict.entries) {
    CHECK(entry.joint_count >= 40);
  }
}

TEST_CASE("top informative ranks the planted object first") {
  const std::vector<SampleRecord> corpus = planted_corpus(402);
  const PmiTable table = pmi_table(corpus, 3);
  const std::map<std::string, std::string> expected{
      {"station", "train"}, {"road", "car"}, {"sea", "boat"}};
  for (const auto& [scene, object] : expected) {
    const RankedList top = top_informative(table, scene, 2);
    REQUIRE_FALSE(top.items.empty());
    CHECK(top.items[0] == object);
  }
  CHECK(top_informative(table, "station", 0).items.empty());
  CHECK_THROWS_AS(top_informative(table, "desert", 3), Error);
}

TEST_CASE("ablation pads labels and their features") {
  InputLayout layout;
  layout.tokens = {
      {0, TokenKind::CLS, "[CLS]", {}, {}},
      {1, TokenKind::LABEL, "dog", 0, BBox{0, 0, 10, 10}},
      {2, TokenKind::LABEL, "cat", 1, BBox{20, 20, 30, 30}},
      {3, TokenKind::SEP, "[SEP]", {}, {}},
      {4, TokenKind::VISUAL, "", {}, BBox{0, 0, 10, 10}},
      {5, TokenKind::VISUAL, "", {}, BBox{20, 20, 30, 30}},
      {6, TokenKind::VISUAL, "", {}, BBox{50, 50, 60, 60}},
  };
  SampleRecord rec;
  rec.sample_id = "s0";
  rec.scene_type = "house";
  rec.object_tags = {{"dog", {0, 0, 10, 10}}, {"cat", {20, 20, 30, 30}}};
  rec.visual_boxes = {{0, 0, 10, 10}, {20, 20, 30, 30}, {50, 50, 60, 60}};

  const Assignments assignments =
      assign_labels_to_features(rec.visual_boxes, rec.object_tags);
  REQUIRE(assignments.items[0].label == "dog");
  REQUIRE(assignments.items[1].label == "cat");
  REQUIRE(assignments.items[2].rule == TagRule::Unassigned);

  SUBCASE("single object") {
    const std::vector<std::string> objects{"dog"};
    const auto [plan, rewritten] =
        apply_ablation(rec, layout, assignments.items, objects);
    CHECK(plan.ablated_objects == std::vector<std::string>{"dog"});
    CHECK(plan.label_positions_to_pad == std::vector<int>{1});
    CHECK(plan.visual_positions_to_pad == std::vector<int>{4});
    CHECK(rewritten.tokens[1].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[1].surface.empty());
    CHECK(rewritten.tokens[4].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[2].kind == TokenKind::LABEL);
    CHECK(rewritten.tokens[5].kind == TokenKind::VISUAL);
    CHECK(rewritten.tokens[6].kind == TokenKind::VISUAL);
    CHECK(rewritten.seq_len() == layout.seq_len());

    // Re-applying the same plan changes nothing further.
    const auto [plan2, again] =
        apply_ablation(rec, rewritten, assignments.items, objects);
    CHECK(plan2.ablated_objects.empty());
    CHECK(plan2.missing_objects == std::vector<std::string>{"dog"});
    for (int i = 0; i < again.seq_len(); ++i) {
      CHECK(again.tokens[static_cast<std::size_t>(i)].kind ==
            rewritten.tokens[static_cast<std::size_t>(i)].kind);
    }
  }

  SUBCASE("absent object is reported, not fatal") {
    const std::vector<std::string> objects{"zebra"};
    const auto [plan, rewritten] =
        apply_ablation(rec, layout, assignments.items, objects);
    CHECK(plan.ablated_objects.empty());
    CHECK(plan.missing_objects == std::vector<std::string>{"zebra"});
    CHECK(plan.label_positions_to_pad.empty());
    CHECK(plan.visual_positions_to_pad.empty());
  }

  SUBCASE("ablate everything; unassigned features survive") {
    const std::vector<std::string> objects{"dog", "cat"};
    const auto [plan, rewritten] =
        apply_ablation(rec, layout, assignments.items, objects);
    CHECK(rewritten.tokens[1].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[2].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[4].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[5].kind == TokenKind::PAD);
    CHECK(rewritten.tokens[6].kind == TokenKind::VISUAL);
    // No double counting across objects.
    CHECK(plan.label_positions_to_pad.size() +
              plan.visual_positions_to_pad.size() ==
          4);
  }
}

TEST_CASE("change rate uses normalized captions") {
  std::map<std::string, std::string> before, after;
  for (int i = 0; i < 10; ++i) {
    const std::string id = "s" + std::to_string(i);
    before[id] = "a photo of a dog";
    after[id] = i < 2 ? "a photo of a cat" : "a photo of a dog";
  }
  CHECK(change_rate(before, after) == doctest::Approx(0.2));
  CHECK(change_rate(before, before) == 0.0);

  after = before;
  after["s0"] = "  A Photo   of a dog \t";
  CHECK(change_rate(before, after) == 0.0);

  after.erase("s1");
  after["other"] = "x";
  CHECK_THROWS_AS(change_rate(before, after), Error);
}

TEST_CASE("confidence shift statistics") {
  SUBCASE("all unchanged and equal") {
    std::vector<ShiftPair> pairs(4, {0.8, 0.8, false});
    const ShiftStats s = confidence_shift(pairs);
    CHECK(s.n_unchanged == 4);
    CHECK(s.change_rate == 0.0);
    CHECK(s.mean_shift == 0.0);
    CHECK(s.std_shift == 0.0);
  }

  SUBCASE("sign convention: higher confidence after gives negative shift") {
    const std::vector<ShiftPair> pairs{{0.9, 0.95, false}};
    const ShiftStats s = confidence_shift(pairs);
    REQUIRE(s.shifts.size() == 1);
    CHECK(s.shifts[0] == doctest::Approx(-0.05));
  }

  SUBCASE("matches a two-pass oracle") {
    rng::Engine g(66);
    std::vector<ShiftPair> pairs;
    for (int i = 0; i < 64; ++i) {
      pairs.push_back({rng::uniform(g, 0.2, 1.0), rng::uniform(g, 0.2, 1.0),
                       rng::u01(g) < 0.3});
    }
    const ShiftStats s = confidence_shift(pairs);
    std::vector<double> expect;
    for (const ShiftPair& p : pairs) {
      if (!p.changed) expect.push_back(p.before - p.after);
    }
    double mean = 0.0;
    for (double v : expect) mean += v;
    mean /= static_cast<double>(expect.size());
    double ss = 0.0;
    for (double v : expect) ss += (v - mean) * (v - mean);
    CHECK(s.n_unchanged == expect.size());
    CHECK(s.mean_shift == doctest::Approx(mean).epsilon(1e-12));
    CHECK(s.std_shift ==
          doctest::Approx(
              std::sqrt(ss / static_cast<double>(expect.size())))
              .epsilon(1e-12));
    CHECK(s.change_rate ==
          doctest::Approx(1.0 - static_cast<double>(expect.size()) /
                                    static_cast<double>(pairs.size())));
  }

  SUBCASE("errors") {
    const std::vector<ShiftPair> all_changed{{0.9, 0.8, true}};
    CHECK_THROWS_AS(confidence_shift(all_changed), Error);
    const std::vector<ShiftPair> bad_conf{{1.5, 0.8, false}};
    CHECK_THROWS_AS(confidence_shift(bad_conf), Error);
  }
}

}  // TEST_SUITE
