#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "spk/consistency.hpp"
#include "support.hpp"

using namespace spk;

namespace {

struct Annotation {
  LabelMask labels;
  InstanceMap instances;
  Annotation(std::size_t h, std::size_t w)
      : labels(h, w, kVoidLabel), instances(h, w, 0) {}

  void rect(std::size_t r0, std::size_t c0, std::size_t r1, std::size_t c1,
            LabelId label, std::uint32_t inst) {
    for (std::size_t r = r0; r < r1; ++r) {
      for (std::size_t c = c0; c < c1; ++c) {
        labels(r, c) = label;
        instances(r, c) = inst;
      }
    }
  }

  SegmentSet segments() const { return SegmentSet::from_masks(labels, instances); }
};

ConsistencyCounts run(const Annotation& a, const Annotation& b) {
  return compare_annotations(a.labels, a.instances, b.labels, b.instances);
}

}  // namespace

TEST_CASE("identical annotations agree everywhere") {
  Annotation a(8, 8);
  a.rect(0, 0, 8, 8, 1, 0);
  a.rect(2, 2, 5, 5, 3, 1);
  ConsistencyCounts counts = run(a, a);
  CHECK(counts.agreement == 64);
  CHECK(counts.quality == 0);
  CHECK(counts.naming == 0);
  CHECK(counts.quantity == 0);
  CHECK(counts.residual == 0);

  SegmentSet s = a.segments();
  MatchResult matches = match_segments(s, s);
  CHECK(matches.matches.size() == s.segments().size());
  for (const SegmentMatch& m : matches.matches) CHECK(m.iou == 1.0);
}

TEST_CASE("an empty annotation leaves the other side unmatched") {
  Annotation a(4, 4);
  a.rect(0, 0, 2, 2, 5, 1);
  Annotation empty(4, 4);
  MatchResult matches = match_segments(a.segments(), empty.segments());
  CHECK(matches.matches.empty());
  CHECK(matches.unmatched_a.size() == 1);
  CHECK(matches.unmatched_b.empty());
}

TEST_CASE("greedy matching prefers the higher-IoU pair") {
  // b's segment overlaps two candidates in a; IoUs are 0.8 and 0.6
  Annotation a(1, 20);
  a.rect(0, 0, 1, 10, 1, 1);   // candidate X: cols 0..9
  a.rect(0, 10, 1, 20, 1, 2);  // candidate Y: cols 10..19
  Annotation b(1, 20);
  // one segment covering cols 1..10: overlap 9 with X (IoU 9/11),
  // overlap 1 with Y (IoU 1/19, below tau) -> X wins, Y unmatched
  b.rect(0, 1, 1, 11, 1, 1);
  MatchResult matches = match_segments(a.segments(), b.segments());
  REQUIRE(matches.matches.size() == 1);
  CHECK(matches.matches[0].a == 0);
  CHECK(matches.matches[0].intersection == 9);
  CHECK(matches.unmatched_a == std::vector<std::size_t>{1});
}

TEST_CASE("renaming a segment is pure naming error") {
  Annotation a(6, 6);
  a.rect(0, 0, 6, 6, 1, 0);
  a.rect(1, 1, 4, 4, 2, 1);  // car
  Annotation b(6, 6);
  b.rect(0, 0, 6, 6, 1, 0);
  b.rect(1, 1, 4, 4, 3, 1);  // same pixels, renamed to truck
  ConsistencyCounts counts = run(a, b);
  CHECK(counts.naming == 9);
  CHECK(counts.agreement == 36 - 9);
  CHECK(counts.quality == 0);
  CHECK(counts.quantity == 0);
  CHECK(counts.residual == 0);
}

TEST_CASE("eroding a matched segment is pure quality error") {
  // 8x8 object eroded to 6x6 keeps IoU at 36/64, above the match threshold
  Annotation a(10, 10);
  a.rect(0, 0, 10, 10, 1, 0);
  a.rect(1, 1, 9, 9, 4, 1);
  Annotation b(10, 10);
  b.rect(0, 0, 10, 10, 1, 0);
  b.rect(2, 2, 8, 8, 4, 1);
  ConsistencyCounts counts = run(a, b);
  CHECK(counts.quality == 64 - 36);
  CHECK(counts.agreement == 100 - 28);
  CHECK(counts.naming == 0);
  CHECK(counts.quantity == 0);

  SECTION("erosion below the match threshold becomes quantity") {
    // no background, so nothing rescues the broken match into quality
    Annotation bare(8, 8);
    bare.rect(1, 1, 6, 6, 4, 1);
    Annotation core(8, 8);
    core.rect(3, 3, 4, 4, 4, 1);  // IoU 1/25 < tau, pair discarded
    ConsistencyCounts broken = run(bare, core);
    CHECK(broken.quality == 0);
    CHECK(broken.quantity == 24);
    CHECK(broken.agreement == 64 - 24);
  }
}

TEST_CASE("deleting a segment is pure quantity error") {
  Annotation a(6, 6);
  a.rect(0, 0, 6, 6, 2, 0);
  a.rect(2, 2, 4, 4, 5, 1);
  Annotation b(6, 6);
  b.rect(0, 0, 6, 6, 2, 0);
  b.rect(2, 2, 4, 4, kVoidLabel, 0);  // the object is missing, left unlabeled
  ConsistencyCounts counts = run(a, b);
  CHECK(counts.quantity == 4);
  CHECK(counts.agreement == 32);
  CHECK(counts.quality == 0);
  CHECK(counts.naming == 0);
  CHECK(counts.residual == 0);
}

TEST_CASE("unlabeled regions on both sides count as agreement") {
  Annotation a(4, 4);
  a.rect(0, 0, 2, 2, 1, 1);
  Annotation b(4, 4);
  b.rect(0, 0, 2, 2, 1, 1);
  ConsistencyCounts counts = run(a, b);
  CHECK(counts.agreement == 16);
}

TEST_CASE("decomposition is symmetric and complete on random perturbed pairs") {
  std::mt19937_64 rng(53);
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t h = 6 + rng() % 10;
    std::size_t w = 6 + rng() % 10;
    Annotation a(h, w);
    a.rect(0, 0, h, w, 1, 0);
    std::uint32_t inst = 1;
    for (int k = 0; k < 4; ++k) {
      std::size_t r0 = rng() % (h - 2);
      std::size_t c0 = rng() % (w - 2);
      std::size_t r1 = r0 + 1 + rng() % (h - r0 - 1);
      std::size_t c1 = c0 + 1 + rng() % (w - c0 - 1);
      a.rect(r0, c0, r1, c1, LabelId(2 + rng() % 5), inst++);
    }
    // perturb: shift one rectangle, rename another, drop a third
    Annotation b = a;
    for (std::size_t i = 0; i < b.labels.size(); ++i) {
      if (rng() % 17 == 0) {
        b.labels[i] = LabelId(1 + rng() % 6);
        b.instances[i] = b.labels[i] == 1 ? 0 : inst;
      }
    }
    ConsistencyCounts ab = run(a, b);
    ConsistencyCounts ba = run(b, a);
    REQUIRE(ab.agreement + ab.quality + ab.naming + ab.quantity + ab.residual ==
            h * w);
    REQUIRE(ab.agreement == ba.agreement);
    REQUIRE(ab.quality == ba.quality);
    REQUIRE(ab.naming == ba.naming);
    REQUIRE(ab.quantity == ba.quantity);
    REQUIRE(ab.residual == ba.residual);
  }
}

TEST_CASE("corpus report aggregates per-image rows with mean and median") {
  Annotation a(4, 4);
  a.rect(0, 0, 4, 4, 1, 0);
  Annotation b = a;
  b.rect(0, 0, 2, 2, 2, 1);  // naming/quantity mass on image 2's pair
  ConsistencyReport report;
  report.add({"img0", run(a, a)});
  report.add({"img1", run(a, b)});
  auto json = consistency_report_to_json(report);
  CHECK(json["images"] == 2);
  CHECK(json["per_image"].size() == 2);
  CHECK(json["per_image"][0]["agreement"] == 1.0);
  REQUIRE(json.contains("mean"));
  REQUIRE(json.contains("median"));
  double mean_agree = json["mean"]["agreement"].get<double>();
  CHECK(mean_agree > 0.7);
  CHECK(mean_agree < 1.0);
}
