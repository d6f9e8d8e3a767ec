#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "spk/cascade.hpp"
#include "support.hpp"

using namespace spk;

namespace {

StreamSpec toy_spec() {
  // stuff {1,2}, objects {3,4,5}, parts: 7 under 3; 8,9 under 4
  return StreamSpec({1, 2}, {3, 4, 5}, {{3, {7}}, {4, {8, 9}}}, 6);
}

}  // namespace

TEST_CASE("stream spec derives channels, checks overlap, round-trips TSV") {
  StreamSpec spec = toy_spec();
  CHECK(spec.stuff_channel_count() == 3);
  CHECK(spec.foreground_channel() == 2);
  CHECK(spec.object_channel_count() == 3);
  CHECK(spec.part_channel_count() == 3);
  CHECK(spec.stuff_channel(2) == 1);
  CHECK(spec.object_channel(5) == 2);
  CHECK_FALSE(spec.stuff_channel(3).has_value());
  CHECK(spec.parts_of_object(4)->size() == 2);
  CHECK(spec.parts_of_object(5) == nullptr);

  std::istringstream in(spec.to_tsv());
  StreamSpec loaded = StreamSpec::load_tsv(in);
  CHECK(loaded.stuff_ids() == spec.stuff_ids());
  CHECK(loaded.object_ids() == spec.object_ids());
  CHECK(loaded.foreground_id() == spec.foreground_id());
  CHECK(loaded.parts_by_object() == spec.parts_by_object());

  CHECK_THROWS_AS(StreamSpec({1, 2}, {2, 3}, {}, 9), ValidationError);
  CHECK_THROWS_AS(StreamSpec({1}, {2}, {{2, {}}}, 9), ValidationError);
  CHECK_THROWS_AS(StreamSpec({1}, {2}, {}, 2), ValidationError);
}

TEST_CASE("stream spec from taxonomy follows macro classes") {
  testsupport::ToyWorld world;
  std::vector<LabelId> benchmark;
  for (LabelId id = 1; id <= world.taxonomy.label_count(); ++id) {
    benchmark.push_back(id);
  }
  StreamSpec spec = StreamSpec::from_taxonomy(world.taxonomy, benchmark);
  CHECK(spec.stuff_ids() == std::vector<LabelId>{world.wall, world.sky});
  CHECK(spec.is_object(world.car));
  CHECK(spec.foreground_id() == world.taxonomy.dictionary_size());
  REQUIRE(spec.parts_of_object(world.car) != nullptr);
  CHECK(spec.parts_of_object(world.car)->size() == 2);  // wheel, door
}

TEST_CASE("stuff target remapping passes stuff and collapses objects") {
  StreamSpec spec = toy_spec();
  SECTION("all-stuff mask is unchanged") {
    LabelMask gt(2, 2, 1);
    CHECK(remap_targets_stuff(gt, spec) == gt);
  }
  SECTION("all-object mask becomes constant foreground") {
    LabelMask gt(2, 2, 4);
    LabelMask expect(2, 2, spec.foreground_id());
    CHECK(remap_targets_stuff(gt, spec) == expect);
  }
  SECTION("mixed mask follows the per-pixel rule") {
    std::mt19937_64 rng(61);
    LabelMask gt = testsupport::random_mask(rng, 7, 7, 5);
    LabelMask out = remap_targets_stuff(gt, spec);
    for (std::size_t i = 0; i < gt.size(); ++i) {
      LabelId expect = gt[i] == kVoidLabel ? kVoidLabel
                       : spec.is_stuff(gt[i]) ? gt[i]
                                              : spec.foreground_id();
      REQUIRE(out[i] == expect);
    }
  }
  SECTION("non-benchmark labels are rejected") {
    LabelMask gt(1, 1, 42);
    CHECK_THROWS_AS(remap_targets_stuff(gt, spec), ValidationError);
  }
}

TEST_CASE("objectness extracts the foreground slice") {
  StreamSpec spec = toy_spec();
  std::mt19937_64 rng(67);
  ScoreMap stuff = testsupport::random_normalized_scores<float>(rng, 5, 4, 3);
  ScoreMap fg = objectness(stuff, spec);
  REQUIRE(fg.channels() == 1);
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      REQUIRE(fg.at(r, c, 0) == stuff.at(r, c, 2));
    }
  }
  ScoreMap wrong(5, 4, 2);
  CHECK_THROWS_AS(objectness(wrong, spec), ValidationError);
}

TEST_CASE("masked cross entropy handles uniform logits and full masks") {
  SECTION("uniform logits cost ln C per unmasked pixel") {
    ScoreGrid<double> logits(3, 3, 5, 0.7);
    Grid<std::uint32_t> targets(3, 3, 2);
    ByteMask ignore(3, 3, 0);
    auto result = masked_cross_entropy(logits, targets, ignore);
    CHECK(result.unmasked == 9);
    CHECK_THAT(result.loss, Catch::Matchers::WithinAbs(std::log(5.0), 1e-12));
  }
  SECTION("fully masked input has zero loss and zero gradient") {
    ScoreGrid<double> logits(2, 2, 3, 1.0);
    Grid<std::uint32_t> targets(2, 2, 0);
    ByteMask ignore(2, 2, 1);
    auto result = masked_cross_entropy(logits, targets, ignore);
    CHECK(result.loss == 0.0);
    CHECK(result.unmasked == 0);
    for (double g : result.gradient.data()) REQUIRE(g == 0.0);
  }
  SECTION("out-of-range target on an unmasked pixel throws") {
    ScoreGrid<double> logits(1, 1, 3, 0.0);
    Grid<std::uint32_t> targets(1, 1, 3);
    ByteMask ignore(1, 1, 0);
    CHECK_THROWS_AS(masked_cross_entropy(logits, targets, ignore),
                    ValidationError);
  }
}

TEST_CASE("analytic gradient matches central finite differences") {
  std::mt19937_64 rng(71);
  for (int iter = 0; iter < 20; ++iter) {
    std::size_t h = 1 + rng() % 4;
    std::size_t w = 1 + rng() % 4;
    std::size_t channels = 2 + rng() % 5;
    auto logits = testsupport::random_logits<double>(rng, h, w, channels);
    Grid<std::uint32_t> targets(h, w);
    ByteMask ignore(h, w);
    for (std::size_t i = 0; i < targets.size(); ++i) {
      targets[i] = std::uint32_t(rng() % channels);
      ignore[i] = rng() % 3 == 0 ? 1 : 0;
    }
    auto analytic = masked_cross_entropy(logits, targets, ignore);
    auto numeric =
        testsupport::finite_difference_gradient(logits, targets, ignore);
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double a = analytic.gradient.data()[i];
      double n = numeric.data()[i];
      REQUIRE_THAT(a, Catch::Matchers::WithinAbs(n, 1e-6) ||
                          Catch::Matchers::WithinRel(n, 1e-6));
    }
  }
}

TEST_CASE("loss ignores logits on masked pixels and their gradient is zero") {
  std::mt19937_64 rng(73);
  auto logits = testsupport::random_logits<double>(rng, 4, 4, 4);
  Grid<std::uint32_t> targets(4, 4, 1);
  ByteMask ignore(4, 4, 0);
  for (std::size_t i = 0; i < ignore.size(); ++i) ignore[i] = rng() % 2;
  auto base = masked_cross_entropy(logits, targets, ignore);
  auto mutated_logits = logits;
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      if (!ignore(r, c)) continue;
      for (std::size_t k = 0; k < 4; ++k) {
        mutated_logits.at(r, c, k) = double(rng() % 100) - 50.0;
      }
      for (std::size_t k = 0; k < 4; ++k) {
        REQUIRE(base.gradient.at(r, c, k) == 0.0);
      }
    }
  }
  auto mutated = masked_cross_entropy(mutated_logits, targets, ignore);
  CHECK(mutated.loss == base.loss);
}

TEST_CASE("total loss sums streams and masks each stream's pixels") {
  StreamSpec spec = toy_spec();
  LabelMask gt(2, 3, kVoidLabel);
  gt(0, 0) = 1;  // stuff
  gt(0, 1) = 2;  // stuff
  gt(0, 2) = 3;  // object with part 7
  gt(1, 0) = 4;  // object
  gt(1, 1) = 5;  // object
  // gt(1,2) stays void
  std::mt19937_64 rng(79);
  auto stuff_logits = testsupport::random_logits<double>(rng, 2, 3, 3);
  auto object_logits = testsupport::random_logits<double>(rng, 2, 3, 3);
  SECTION("two-stream call has no part loss") {
    LossReport report = total_loss(gt, stuff_logits, object_logits, spec);
    CHECK_FALSE(report.has_part_stream);
    CHECK(report.part == 0.0);
    CHECK(report.stuff_unmasked == 5);   // void masked
    CHECK(report.object_unmasked == 3);  // stuff and void masked
    CHECK_THAT(report.total,
               Catch::Matchers::WithinAbs(report.stuff + report.object, 1e-15));
  }
  SECTION("three-stream call adds the part loss") {
    LabelMask gt_parts(2, 3, kVoidLabel);
    gt_parts(0, 2) = 7;
    auto part_logits = testsupport::random_logits<double>(rng, 2, 3, 3);
    LossReport report =
        total_loss(gt, stuff_logits, object_logits, spec, &part_logits, &gt_parts);
    CHECK(report.has_part_stream);
    CHECK(report.part_unmasked == 1);
    CHECK_THAT(report.total, Catch::Matchers::WithinAbs(
                                 report.stuff + report.object + report.part, 1e-15));
  }
  SECTION("image with no object pixels has zero object loss") {
    LabelMask stuff_only(2, 3, 1);
    LossReport report = total_loss(stuff_only, stuff_logits, object_logits, spec);
    CHECK(report.object == 0.0);
    CHECK(report.object_unmasked == 0);
  }
  SECTION("saturated one-hot logits drive every stream loss to near zero") {
    auto one_hot_stuff = ScoreGrid<double>(2, 3, 3, 0.0);
    auto one_hot_object = ScoreGrid<double>(2, 3, 3, 0.0);
    auto [stuff_t, stuff_m] = stuff_targets(gt, spec);
    auto [object_t, object_m] = object_targets(gt, spec);
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        if (!stuff_m(r, c)) one_hot_stuff.at(r, c, stuff_t(r, c)) = 20.0;
        if (!object_m(r, c)) one_hot_object.at(r, c, object_t(r, c)) = 20.0;
      }
    }
    LossReport report = total_loss(gt, one_hot_stuff, one_hot_object, spec);
    // -log softmax at a 20-vs-0 gap: bounded by (C-1) e^{-20}
    CHECK(report.stuff < 2 * std::exp(-20.0) * 3);
    CHECK(report.object < 2 * std::exp(-20.0) * 3);
  }
}

TEST_CASE("hard fusion follows the per-pixel gate rule") {
  StreamSpec spec = toy_spec();
  std::mt19937_64 rng(83);
  for (int iter = 0; iter < 50; ++iter) {
    auto stuff = testsupport::random_normalized_scores<float>(rng, 6, 5, 3);
    auto objects = testsupport::random_normalized_scores<float>(rng, 6, 5, 3);
    LabelMask fused = fuse_scene(stuff, objects, spec, FusionMode::Hard);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        // brute-force restatement of the rule
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
          if (stuff.at(r, c, k) > stuff.at(r, c, best)) best = k;
        }
        LabelId expect;
        if (best != spec.foreground_channel()) {
          expect = spec.stuff_label_at(best);
        } else {
          std::size_t ob = 0;
          for (std::size_t k = 1; k < 3; ++k) {
            if (objects.at(r, c, k) > objects.at(r, c, ob)) ob = k;
          }
          expect = spec.object_label_at(ob);
        }
        REQUIRE(fused(r, c) == expect);
      }
    }
  }
}

TEST_CASE("fusion gates are sound") {
  StreamSpec spec = toy_spec();
  std::mt19937_64 rng(89);
  SECTION("zero objectness means the object stream never matters") {
    auto stuff = testsupport::random_normalized_scores<float>(rng, 8, 8, 3);
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        // renormalize mass onto the stuff channels
        float fg = stuff.at(r, c, 2);
        stuff.at(r, c, 0) += fg / 2;
        stuff.at(r, c, 1) += fg / 2;
        stuff.at(r, c, 2) = 0.0f;
      }
    }
    auto objects_a = testsupport::random_normalized_scores<float>(rng, 8, 8, 3);
    auto objects_b = testsupport::random_normalized_scores<float>(rng, 8, 8, 3);
    LabelMask fused_a = fuse_scene(stuff, objects_a, spec, FusionMode::Hard);
    LabelMask fused_b = fuse_scene(stuff, objects_b, spec, FusionMode::Hard);
    REQUIRE(fused_a == fused_b);
    for (std::size_t i = 0; i < fused_a.size(); ++i) {
      REQUIRE(spec.is_stuff(fused_a[i]));
    }
  }
  SECTION("one-hot foreground yields exactly the object argmax") {
    ScoreMap stuff(4, 4, 3, 0.0f);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) stuff.at(r, c, 2) = 1.0f;
    }
    stuff.set_normalized(true);
    auto objects = testsupport::random_normalized_scores<float>(rng, 4, 4, 3);
    LabelMask fused = fuse_scene(stuff, objects, spec, FusionMode::Hard);
    for (std::size_t r = 0; r < 4; ++r) {
      for (std::size_t c = 0; c < 4; ++c) {
        std::size_t ob = 0;
        for (std::size_t k = 1; k < 3; ++k) {
          if (objects.at(r, c, k) > objects.at(r, c, ob)) ob = k;
        }
        REQUIRE(fused(r, c) == spec.object_label_at(ob));
      }
    }
  }
  SECTION("changing object scores where stuff wins never changes the output") {
    auto stuff = testsupport::random_normalized_scores<float>(rng, 8, 8, 3);
    auto objects = testsupport::random_normalized_scores<float>(rng, 8, 8, 3);
    LabelMask fused = fuse_scene(stuff, objects, spec, FusionMode::Hard);
    auto mutated = objects;
    for (std::size_t r = 0; r < 8; ++r) {
      for (std::size_t c = 0; c < 8; ++c) {
        auto px = stuff.pixel(r, c);
        if (argmax(std::span<const float>(px)) != spec.foreground_channel()) {
          auto mp = mutated.pixel(r, c);
          std::reverse(mp.begin(), mp.end());
        }
      }
    }
    LabelMask refused = fuse_scene(stuff, mutated, spec, FusionMode::Hard);
    REQUIRE(refused == fused);
  }
}

TEST_CASE("soft fusion weights object scores by objectness") {
  StreamSpec spec = toy_spec();
  ScoreMap stuff(1, 2, 3, 0.0f);
  ScoreMap objects(1, 2, 3, 0.0f);
  // pixel 0: stuff 1 wins outright
  stuff.at(0, 0, 1) = 0.6f;
  stuff.at(0, 0, 0) = 0.1f;
  stuff.at(0, 0, 2) = 0.3f;
  objects.at(0, 0, 0) = 1.0f;
  // pixel 1: objectness 0.9 x object score 0.8 beats stuff 0.1
  stuff.at(0, 1, 0) = 0.1f;
  stuff.at(0, 1, 2) = 0.9f;
  objects.at(0, 1, 1) = 0.8f;
  objects.at(0, 1, 0) = 0.2f;
  stuff.set_normalized(true);
  objects.set_normalized(true);
  LabelMask fused = fuse_scene(stuff, objects, spec, FusionMode::Soft);
  CHECK(fused(0, 0) == 2);  // stuff channel 1
  CHECK(fused(0, 1) == 4);  // object channel 1
}

TEST_CASE("degenerate spec with no objects reduces fusion to stuff argmax") {
  StreamSpec spec({1, 2, 3}, {}, {}, 4);
  std::mt19937_64 rng(97);
  for (FusionMode mode : {FusionMode::Hard, FusionMode::Soft}) {
    auto stuff = testsupport::random_normalized_scores<float>(rng, 6, 6, 4);
    ScoreMap objects(6, 6, 0);
    LabelMask fused = fuse_scene(stuff, objects, spec, mode);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t c = 0; c < 6; ++c) {
        auto px = stuff.pixel(r, c);
        std::size_t best = 0;
        for (std::size_t k = 1; k < 3; ++k) {
          if (px[k] > px[best]) best = k;
        }
        REQUIRE(fused(r, c) == spec.stuff_label_at(best));
      }
    }
  }
}

TEST_CASE("positive rescaling of logits never changes the fused labels") {
  StreamSpec spec = toy_spec();
  std::mt19937_64 rng(101);
  auto stuff_logits = testsupport::random_logits<double>(rng, 5, 5, 3);
  auto object_logits = testsupport::random_logits<double>(rng, 5, 5, 3);
  auto softmax_of = [](const ScoreGrid<double>& logits) {
    ScoreGrid<double> out(logits.height(), logits.width(), logits.channels());
    for (std::size_t r = 0; r < logits.height(); ++r) {
      for (std::size_t c = 0; c < logits.width(); ++c) {
        auto x = logits.pixel(r, c);
        double m = *std::max_element(x.begin(), x.end());
        double z = 0;
        auto o = out.pixel(r, c);
        for (std::size_t k = 0; k < x.size(); ++k) {
          o[k] = std::exp(x[k] - m);
          z += o[k];
        }
        for (auto& v : o) v /= z;
      }
    }
    out.set_normalized(true);
    return out;
  };
  LabelMask base = fuse_scene(softmax_of(stuff_logits), softmax_of(object_logits),
                              spec, FusionMode::Hard);
  auto scaled_stuff = stuff_logits;
  auto scaled_objects = object_logits;
  for (auto& v : scaled_stuff.data()) v *= 3.5;
  for (auto& v : scaled_objects.data()) v *= 3.5;
  LabelMask scaled = fuse_scene(softmax_of(scaled_stuff),
                                softmax_of(scaled_objects), spec, FusionMode::Hard);
  CHECK(scaled == base);
}

TEST_CASE("part segmentation thresholds argmax over the object's channels") {
  StreamSpec spec = toy_spec();
  LabelMask scene(2, 3, kVoidLabel);
  scene(0, 0) = 1;  // stuff
  scene(0, 1) = 3;  // object with part list {7}
  scene(0, 2) = 4;  // object with part list {8, 9}
  scene(1, 0) = 5;  // object without parts
  scene(1, 1) = 4;
  scene(1, 2) = 4;
  ScoreMap object_scores(2, 3, 3, 0.0f);
  object_scores.set_normalized(true);

  std::map<LabelId, ScoreMap> part_scores;
  ScoreMap for3(2, 3, 2, 0.0f);  // channels: part 7, no-part
  for3.at(0, 1, 0) = 1.0f;
  part_scores.emplace(3, for3);
  ScoreMap for4(2, 3, 3, 0.0f);  // channels: part 8, part 9, no-part
  for4.at(0, 2, 1) = 0.9f;  // part 9, above threshold
  for4.at(1, 1, 0) = 0.2f;  // part 8, below threshold
  for4.at(1, 2, 2) = 1.0f;  // no-part dominates, parts score 0
  part_scores.emplace(4, for4);

  PartSegmentation seg =
      segment_parts(object_scores, scene, part_scores, spec, 0.3);
  CHECK(seg.parts(0, 0) == kVoidLabel);
  CHECK(seg.parts(0, 1) == 7);
  CHECK(seg.parts(0, 2) == 9);
  CHECK(seg.parts(1, 0) == kVoidLabel);
  CHECK(seg.parts(1, 1) == kVoidLabel);  // 0.2 < 0.3
  CHECK(seg.parts(1, 2) == kVoidLabel);  // no-part wins
  CHECK(seg.missing_scores.empty());

  SECTION("unreachable threshold leaves everything no-part") {
    // strictly sub-one scores never reach a threshold of 1.0
    ScoreMap weak3(2, 3, 2, 0.5f);
    ScoreMap weak4(2, 3, 3, 0.4f);
    std::map<LabelId, ScoreMap> weak{{3, weak3}, {4, weak4}};
    PartSegmentation none = segment_parts(object_scores, scene, weak, spec, 1.0);
    for (std::size_t i = 0; i < none.parts.size(); ++i) {
      REQUIRE(none.parts[i] == kVoidLabel);
    }
  }
  SECTION("missing score map is reported and falls to no-part") {
    std::map<LabelId, ScoreMap> only3{{3, for3}};
    PartSegmentation partial =
        segment_parts(object_scores, scene, only3, spec, 0.3);
    CHECK(partial.parts(0, 1) == 7);
    CHECK(partial.parts(0, 2) == kVoidLabel);
    REQUIRE(partial.missing_scores == std::vector<LabelId>{4});
  }
  SECTION("random inputs match a per-pixel brute force") {
    std::mt19937_64 rng(103);
    std::map<LabelId, ScoreMap> random_scores;
    random_scores.emplace(
        3, testsupport::random_normalized_scores<float>(rng, 2, 3, 2));
    random_scores.emplace(
        4, testsupport::random_normalized_scores<float>(rng, 2, 3, 3));
    PartSegmentation out =
        segment_parts(object_scores, scene, random_scores, spec, 0.3);
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 3; ++c) {
        LabelId o = scene(r, c);
        const std::vector<LabelId>* parts = spec.parts_of_object(o);
        LabelId expect = kVoidLabel;
        if (parts != nullptr) {
          const ScoreMap& m = random_scores.at(o);
          std::size_t best = 0;
          for (std::size_t k = 1; k < parts->size(); ++k) {
            if (m.at(r, c, k) > m.at(r, c, best)) best = k;
          }
          if (m.at(r, c, best) >= 0.3f) expect = (*parts)[best];
        }
        REQUIRE(out.parts(r, c) == expect);
      }
    }
  }
}

TEST_CASE("hierarchical output remaps the scene per level") {
  testsupport::ToyWorld world;
  LabelMask scene(1, 4);
  scene(0, 0) = world.cabinet;
  scene(0, 1) = world.desk;
  scene(0, 2) = world.car;
  scene(0, 3) = world.wall;
  auto levels = hierarchical_output(scene, world.taxonomy, {0, 1});
  REQUIRE(levels.size() == 2);
  CHECK(levels[0](0, 0) == world.furniture);
  CHECK(levels[0](0, 1) == world.furniture);
  CHECK(levels[0](0, 2) == world.conveyance);
  CHECK(levels[0](0, 3) == world.wall);
  CHECK(levels[1] == scene);  // max depth is 1, so level 1 is the identity

  SECTION("levels equal composing the remap per pixel") {
    std::mt19937_64 rng(107);
    LabelMask random = testsupport::random_mask(rng, 6, 6, 11);
    auto merged = hierarchical_output(random, world.taxonomy, {0});
    LabelRemap remap = world.taxonomy.merge_to_level(0);
    for (std::size_t i = 0; i < random.size(); ++i) {
      // ancestor walk oracle
      LabelId cur = random[i];
      if (cur != kVoidLabel) {
        while (world.taxonomy.hypernym(cur) != kVoidLabel) {
          cur = world.taxonomy.hypernym(cur);
        }
      }
      REQUIRE(merged[0][i] == cur);
      REQUIRE(merged[0][i] == remap.apply(random[i]));
    }
  }
  SECTION("unsorted levels are rejected") {
    CHECK_THROWS_AS(hierarchical_output(scene, world.taxonomy, {2, 0}),
                    ValidationError);
  }
}
