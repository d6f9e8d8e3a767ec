#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/json_out.hpp"

namespace spk {

// A run of pixels within one row, [col_begin, col_end).
struct PixelSpan {
  std::uint32_t row = 0;
  std::uint32_t col_begin = 0;
  std::uint32_t col_end = 0;
};

struct Segment {
  LabelId label = kVoidLabel;
  std::uint32_t instance = 0;
  std::vector<PixelSpan> spans;
  std::uint64_t pixels = 0;
};

// One annotation of an image as disjoint segments. A segment is the set of
// pixels sharing a (label, instance) key; stuff regions share instance 0,
// giving one segment per stuff label. Segments are indexed by order of first
// appearance in row-major scan.
class SegmentSet {
 public:
  SegmentSet() = default;

  static SegmentSet from_masks(const LabelMask& labels,
                               const InstanceMap& instances) {
    if (!labels.same_shape(instances)) {
      throw ValidationError("label mask and instance map shapes differ");
    }
    SegmentSet out;
    out.height_ = labels.height();
    out.width_ = labels.width();
    std::map<std::pair<LabelId, std::uint32_t>, std::size_t> index;
    for (std::size_t r = 0; r < labels.height(); ++r) {
      std::size_t c = 0;
      while (c < labels.width()) {
        LabelId label = labels(r, c);
        std::uint32_t inst = instances(r, c);
        std::size_t end = c + 1;
        while (end < labels.width() && labels(r, end) == label &&
               instances(r, end) == inst) {
          ++end;
        }
        if (label != kVoidLabel) {
          auto key = std::make_pair(label, inst);
          auto it = index.find(key);
          if (it == index.end()) {
            it = index.emplace(key, out.segments_.size()).first;
            out.segments_.push_back(Segment{label, inst, {}, 0});
          }
          Segment& seg = out.segments_[it->second];
          seg.spans.push_back({std::uint32_t(r), std::uint32_t(c), std::uint32_t(end)});
          seg.pixels += end - c;
        }
        c = end;
      }
    }
    return out;
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<Segment>& segments() const { return segments_; }

  // Segment index per pixel, -1 where no segment (void).
  Grid<std::int32_t> index_map() const {
    Grid<std::int32_t> map(height_, width_, -1);
    for (std::size_t s = 0; s < segments_.size(); ++s) {
      for (const PixelSpan& span : segments_[s].spans) {
        for (std::uint32_t c = span.col_begin; c < span.col_end; ++c) {
          map(span.row, c) = std::int32_t(s);
        }
      }
    }
    return map;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<Segment> segments_;
};

struct SegmentMatch {
  std::size_t a = 0;
  std::size_t b = 0;
  std::uint64_t intersection = 0;
  double iou = 0.0;
};

struct MatchResult {
  std::vector<SegmentMatch> matches;
  std::vector<std::size_t> unmatched_a;
  std::vector<std::size_t> unmatched_b;
};

inline constexpr double kDefaultMatchIou = 0.5;

// Greedy one-to-one matching by descending pairwise IoU; candidate pairs
// below `tau` are discarded. IoU ties are compared exactly on the underlying
// integer fractions and broken by ascending (a, b) index pair.
inline MatchResult match_segments(const SegmentSet& a, const SegmentSet& b,
                                  double tau = kDefaultMatchIou) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ValidationError("annotations cover different image dimensions");
  }
  Grid<std::int32_t> ia = a.index_map();
  Grid<std::int32_t> ib = b.index_map();
  std::map<std::pair<std::int32_t, std::int32_t>, std::uint64_t> overlap;
  for (std::size_t i = 0; i < ia.size(); ++i) {
    if (ia[i] >= 0 && ib[i] >= 0) ++overlap[{ia[i], ib[i]}];
  }
  struct Candidate {
    std::size_t a, b;
    std::uint64_t inter, uni;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(overlap.size());
  for (const auto& [pair, inter] : overlap) {
    std::uint64_t uni = a.segments()[pair.first].pixels +
                        b.segments()[pair.second].pixels - inter;
    // inter/uni >= tau, compared without division
    if (double(inter) >= tau * double(uni)) {
      candidates.push_back({std::size_t(pair.first), std::size_t(pair.second),
                            inter, uni});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& x, const Candidate& y) {
              // x.iou > y.iou  <=>  x.inter * y.uni > y.inter * x.uni
              __uint128_t lhs = __uint128_t(x.inter) * y.uni;
              __uint128_t rhs = __uint128_t(y.inter) * x.uni;
              if (lhs != rhs) return lhs > rhs;
              if (x.a != y.a) return x.a < y.a;
              return x.b < y.b;
            });
  MatchResult result;
  std::vector<std::uint8_t> used_a(a.segments().size(), 0);
  std::vector<std::uint8_t> used_b(b.segments().size(), 0);
  for (const Candidate& c : candidates) {
    if (used_a[c.a] || used_b[c.b]) continue;
    used_a[c.a] = used_b[c.b] = 1;
    result.matches.push_back(
        {c.a, c.b, c.inter, double(c.inter) / double(c.uni)});
  }
  for (std::size_t i = 0; i < used_a.size(); ++i) {
    if (!used_a[i]) result.unmatched_a.push_back(i);
  }
  for (std::size_t i = 0; i < used_b.size(); ++i) {
    if (!used_b[i]) result.unmatched_b.push_back(i);
  }
  return result;
}

// Pixel-exact decomposition of the disagreement between two annotations of
// one image. Every pixel lands in exactly one bucket.
struct ConsistencyCounts {
  std::uint64_t agreement = 0;
  std::uint64_t quality = 0;   // boundary variation between same-label matches
  std::uint64_t naming = 0;    // matched segments carrying different labels
  std::uint64_t quantity = 0;  // segment present on exactly one side
  std::uint64_t residual = 0;
  std::uint64_t total = 0;

  void merge(const ConsistencyCounts& other) {
    agreement += other.agreement;
    quality += other.quality;
    naming += other.naming;
    quantity += other.quantity;
    residual += other.residual;
    total += other.total;
  }
};

struct ConsistencyFractions {
  double agreement = 0, quality = 0, naming = 0, quantity = 0, residual = 0;
};

inline ConsistencyFractions fractions(const ConsistencyCounts& c) {
  if (c.total == 0) throw ValidationError("empty image in consistency report");
  double t = double(c.total);
  return {double(c.agreement) / t, double(c.quality) / t, double(c.naming) / t,
          double(c.quantity) / t, double(c.residual) / t};
}

// Attribution rules, applied in priority order to each disagreeing pixel:
//   1. inside the symmetric difference of a matched same-label pair -> quality
//   2. inside a matched pair carrying different labels             -> naming
//   3. inside an unmatched segment on exactly one side             -> quantity
//   4. anything else                                                -> residual
// Unlabeled pixels on both sides count as agreement.
inline ConsistencyCounts decompose(const SegmentSet& a, const SegmentSet& b,
                                   const MatchResult& matches) {
  Grid<std::int32_t> ia = a.index_map();
  Grid<std::int32_t> ib = b.index_map();
  std::vector<std::int32_t> partner_a(a.segments().size(), -1);
  std::vector<std::int32_t> partner_b(b.segments().size(), -1);
  std::vector<std::uint8_t> same_label_a(a.segments().size(), 0);
  std::vector<std::uint8_t> same_label_b(b.segments().size(), 0);
  for (const SegmentMatch& m : matches.matches) {
    partner_a[m.a] = std::int32_t(m.b);
    partner_b[m.b] = std::int32_t(m.a);
    bool same = a.segments()[m.a].label == b.segments()[m.b].label;
    same_label_a[m.a] = same;
    same_label_b[m.b] = same;
  }
  ConsistencyCounts counts;
  counts.total = ia.size();
  for (std::size_t i = 0; i < ia.size(); ++i) {
    std::int32_t sa = ia[i];
    std::int32_t sb = ib[i];
    LabelId la = sa >= 0 ? a.segments()[sa].label : kVoidLabel;
    LabelId lb = sb >= 0 ? b.segments()[sb].label : kVoidLabel;
    if (la == lb) {
      ++counts.agreement;
      continue;
    }
    bool a_matched = sa >= 0 && partner_a[sa] >= 0;
    bool b_matched = sb >= 0 && partner_b[sb] >= 0;
    if ((a_matched && same_label_a[sa]) || (b_matched && same_label_b[sb])) {
      ++counts.quality;
    } else if (a_matched || b_matched) {
      ++counts.naming;
    } else if ((sa >= 0) != (sb >= 0)) {
      ++counts.quantity;
    } else {
      ++counts.residual;
    }
  }
  return counts;
}

struct ImageConsistency {
  std::string id;
  ConsistencyCounts counts;
};

struct ConsistencyReport {
  std::vector<ImageConsistency> per_image;
  ConsistencyCounts corpus;  // pixel-weighted totals

  void add(ImageConsistency image) {
    corpus.merge(image.counts);
    per_image.push_back(std::move(image));
  }
};

inline ConsistencyCounts compare_annotations(const LabelMask& labels_a,
                                             const InstanceMap& inst_a,
                                             const LabelMask& labels_b,
                                             const InstanceMap& inst_b,
                                             double tau = kDefaultMatchIou) {
  SegmentSet a = SegmentSet::from_masks(labels_a, inst_a);
  SegmentSet b = SegmentSet::from_masks(labels_b, inst_b);
  return decompose(a, b, match_segments(a, b, tau));
}

namespace detail {
inline double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}
}  // namespace detail

inline nlohmann::json consistency_report_to_json(const ConsistencyReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> agree, quality, naming, quantity;
  for (const ImageConsistency& image : report.per_image) {
    ConsistencyFractions f = fractions(image.counts);
    agree.push_back(f.agreement);
    quality.push_back(f.quality);
    naming.push_back(f.naming);
    quantity.push_back(f.quantity);
    rows.push_back({{"id", image.id},
                    {"agreement", json_number(f.agreement)},
                    {"quality", json_number(f.quality)},
                    {"naming", json_number(f.naming)},
                    {"quantity", json_number(f.quantity)},
                    {"residual", json_number(f.residual)},
                    {"pixels", image.counts.total}});
  }
  nlohmann::json out{{"schema_version", kSchemaVersion},
                     {"images", report.per_image.size()},
                     {"per_image", rows}};
  if (!report.per_image.empty()) {
    ConsistencyFractions f = fractions(report.corpus);
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return s / double(v.size());
    };
    out["pixel_weighted"] = {{"agreement", json_number(f.agreement)},
                             {"quality", json_number(f.quality)},
                             {"naming", json_number(f.naming)},
                             {"quantity", json_number(f.quantity)},
                             {"residual", json_number(f.residual)}};
    out["mean"] = {{"agreement", json_number(mean(agree))},
                   {"quality", json_number(mean(quality))},
                   {"naming", json_number(mean(naming))},
                   {"quantity", json_number(mean(quantity))}};
    out["median"] = {{"agreement", json_number(detail::median_of(agree))},
                     {"quality", json_number(detail::median_of(quality))},
                     {"naming", json_number(detail::median_of(naming))},
                     {"quantity", json_number(detail::median_of(quantity))}};
  }
  return out;
}

}  // namespace spk
