#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/json_out.hpp"
#include "spk/taxonomy.hpp"

namespace spk {

// C x C pixel-count matrix over benchmark class indices 1..C, the sufficient
// statistic for all four scene-parsing metrics. Column 0 is the reject
// column: predictions that map outside the benchmark on a labeled
// ground-truth pixel. Void ground truth is excluded and tallied in
// `ignored`. Counts are exact 64-bit integers; division happens only at
// report time.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(std::size_t num_classes)
      : num_classes_(num_classes),
        counts_((num_classes + 1) * (num_classes + 1), 0) {}

  std::size_t num_classes() const { return num_classes_; }
  std::uint64_t ignored() const { return ignored_; }

  std::uint64_t count(std::size_t gt, std::size_t pred) const {
    return counts_[gt * (num_classes_ + 1) + pred];
  }
  std::uint64_t& count(std::size_t gt, std::size_t pred) {
    return counts_[gt * (num_classes_ + 1) + pred];
  }

  void add_ignored(std::uint64_t n) { ignored_ += n; }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t v : counts_) sum += v;
    return sum;
  }

  // Ground-truth pixels of class i (t_i).
  std::uint64_t gt_pixels(std::size_t i) const {
    std::uint64_t sum = 0;
    for (std::size_t p = 0; p <= num_classes_; ++p) sum += count(i, p);
    return sum;
  }

  // Predicted pixels of class i (p_i); the reject column never counts here.
  std::uint64_t pred_pixels(std::size_t i) const {
    std::uint64_t sum = 0;
    for (std::size_t g = 1; g <= num_classes_; ++g) sum += count(g, i);
    return sum;
  }

  std::uint64_t diagonal(std::size_t i) const { return count(i, i); }

  std::uint64_t trace() const {
    std::uint64_t sum = 0;
    for (std::size_t i = 1; i <= num_classes_; ++i) sum += count(i, i);
    return sum;
  }

  // Element-wise sum; associative and commutative with the zero matrix as
  // identity, so shards can accumulate privately and merge.
  void merge(const ConfusionMatrix& other) {
    if (other.num_classes_ != num_classes_) {
      throw ValidationError("cannot merge confusion matrices of sizes " +
                            std::to_string(num_classes_) + " and " +
                            std::to_string(other.num_classes_));
    }
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    ignored_ += other.ignored_;
  }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::size_t num_classes_ = 0;
  std::vector<std::uint64_t> counts_;
  std::uint64_t ignored_ = 0;
};

// Adds one (gt, pred) mask pair. `class_map` sends benchmark labels into
// 1..C and everything else to void; void-mapped ground truth increments
// `ignored`, void-mapped predictions land in the reject column.
inline void accumulate(ConfusionMatrix& cm, const LabelMask& gt,
                       const LabelMask& pred, const LabelRemap& class_map) {
  if (!gt.same_shape(pred)) {
    throw ValidationError("ground truth is " + std::to_string(gt.height()) +
                          "x" + std::to_string(gt.width()) + " but prediction is " +
                          std::to_string(pred.height()) + "x" +
                          std::to_string(pred.width()));
  }
  for (std::size_t i = 0; i < gt.size(); ++i) {
    LabelId g = class_map.apply(gt[i]);
    if (g == kVoidLabel) {
      cm.add_ignored(1);
      continue;
    }
    LabelId p = class_map.apply(pred[i]);
    if (g > cm.num_classes() || p > cm.num_classes()) {
      throw ValidationError("class map emits index outside 1.." +
                            std::to_string(cm.num_classes()));
    }
    ++cm.count(g, p);
  }
}

inline std::optional<double> pixel_accuracy(const ConfusionMatrix& cm) {
  std::uint64_t total = cm.total();
  if (total == 0) return std::nullopt;
  return double(cm.trace()) / double(total);
}

// Per-class recall n_ii / t_i; absent when the class has no ground truth.
inline std::vector<std::optional<double>> per_class_accuracy(
    const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.num_classes() + 1);
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    std::uint64_t t = cm.gt_pixels(i);
    if (t > 0) out[i] = double(cm.diagonal(i)) / double(t);
  }
  return out;
}

inline std::optional<double> mean_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    std::uint64_t t = cm.gt_pixels(i);
    if (t == 0) continue;
    sum += double(cm.diagonal(i)) / double(t);
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

// Per-class IoU n_ii / (t_i + p_i - n_ii); absent when the class appears in
// neither ground truth nor prediction.
inline std::vector<std::optional<double>> per_class_iou(
    const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(cm.num_classes() + 1);
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    std::uint64_t t = cm.gt_pixels(i);
    std::uint64_t p = cm.pred_pixels(i);
    if (t + p == 0) continue;
    std::uint64_t inter = cm.diagonal(i);
    out[i] = double(inter) / double(t + p - inter);
  }
  return out;
}

inline std::optional<double> mean_iou(const ConfusionMatrix& cm) {
  auto ious = per_class_iou(cm);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    if (!ious[i]) continue;
    sum += *ious[i];
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

// IoU weighted by each class's share of the ground-truth pixel mass.
inline std::optional<double> weighted_iou(const ConfusionMatrix& cm) {
  std::uint64_t total_gt = 0;
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) total_gt += cm.gt_pixels(i);
  if (total_gt == 0) return std::nullopt;
  auto ious = per_class_iou(cm);
  double sum = 0.0;
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    std::uint64_t t = cm.gt_pixels(i);
    if (t == 0) continue;
    sum += double(t) / double(total_gt) * *ious[i];
  }
  return sum;
}

struct SplitMetrics {
  std::optional<double> mean_accuracy;
  std::optional<double> mean_iou;
  std::size_t class_count = 0;
};

// Per-class quantities averaged within each half of a partition of 1..C.
inline std::pair<SplitMetrics, SplitMetrics> split_report(
    const ConfusionMatrix& cm, const std::set<std::size_t>& stuff_ids,
    const std::set<std::size_t>& object_ids) {
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    bool in_stuff = stuff_ids.count(i) > 0;
    bool in_object = object_ids.count(i) > 0;
    if (in_stuff == in_object) {
      throw ValidationError("class index " + std::to_string(i) +
                            (in_stuff ? " appears in both splits"
                                      : " is missing from both splits"));
    }
  }
  if (stuff_ids.size() + object_ids.size() != cm.num_classes()) {
    throw ValidationError("split ids outside 1..C");
  }
  auto accs = per_class_accuracy(cm);
  auto ious = per_class_iou(cm);
  auto reduce = [&](const std::set<std::size_t>& ids) {
    SplitMetrics m;
    m.class_count = ids.size();
    double acc_sum = 0.0, iou_sum = 0.0;
    std::size_t acc_n = 0, iou_n = 0;
    for (std::size_t i : ids) {
      if (accs[i]) { acc_sum += *accs[i]; ++acc_n; }
      if (ious[i]) { iou_sum += *ious[i]; ++iou_n; }
    }
    if (acc_n) m.mean_accuracy = acc_sum / double(acc_n);
    if (iou_n) m.mean_iou = iou_sum / double(iou_n);
    return m;
  };
  return {reduce(stuff_ids), reduce(object_ids)};
}

struct MetricsReport {
  std::optional<double> pixel_accuracy;
  std::optional<double> mean_accuracy;
  std::optional<double> mean_iou;
  std::optional<double> weighted_iou;
  std::optional<double> challenge_score;  // (pixel accuracy + mean IoU) / 2
  std::vector<std::optional<double>> per_class_iou;       // index 0 unused
  std::vector<std::optional<double>> per_class_accuracy;  // index 0 unused
  std::size_t evaluated_class_count = 0;  // classes with t_i > 0
  std::uint64_t ignored = 0;
  std::uint64_t total = 0;
};

inline MetricsReport build_report(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.pixel_accuracy = pixel_accuracy(cm);
  r.mean_accuracy = mean_accuracy(cm);
  r.mean_iou = mean_iou(cm);
  r.weighted_iou = weighted_iou(cm);
  if (r.pixel_accuracy && r.mean_iou) {
    r.challenge_score = (*r.pixel_accuracy + *r.mean_iou) / 2.0;
  }
  r.per_class_iou = per_class_iou(cm);
  r.per_class_accuracy = per_class_accuracy(cm);
  for (std::size_t i = 1; i <= cm.num_classes(); ++i) {
    if (cm.gt_pixels(i) > 0) ++r.evaluated_class_count;
  }
  r.ignored = cm.ignored();
  r.total = cm.total();
  return r;
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json per_class = nlohmann::json::array();
  for (std::size_t i = 1; i < r.per_class_iou.size(); ++i) {
    per_class.push_back({{"class_index", i},
                         {"accuracy", json_number(r.per_class_accuracy[i])},
                         {"iou", json_number(r.per_class_iou[i])}});
  }
  return nlohmann::json{{"schema_version", kSchemaVersion},
                        {"pixel_accuracy", json_number(r.pixel_accuracy)},
                        {"mean_accuracy", json_number(r.mean_accuracy)},
                        {"mean_iou", json_number(r.mean_iou)},
                        {"weighted_iou", json_number(r.weighted_iou)},
                        {"challenge_score", json_number(r.challenge_score)},
                        {"evaluated_class_count", r.evaluated_class_count},
                        {"ignored_pixels", r.ignored},
                        {"total_pixels", r.total},
                        {"per_class", per_class}};
}

// Per-part-class accuracy over pixels with ground-truth part annotation.
// Accuracy is used instead of IoU because part annotation is not exhaustive.
struct PartAccuracy {
  std::vector<std::pair<LabelId, double>> per_part;  // ascending label id
  std::optional<double> macro_average;
};

inline PartAccuracy part_accuracy(const LabelMask& gt_parts,
                                  const LabelMask& pred_parts,
                                  const ByteMask& valid) {
  if (!gt_parts.same_shape(pred_parts) ||
      gt_parts.height() != valid.height() || gt_parts.width() != valid.width()) {
    throw ValidationError("part masks and validity mask must share one shape");
  }
  std::map<LabelId, std::pair<std::uint64_t, std::uint64_t>> counts;  // correct, total
  for (std::size_t i = 0; i < gt_parts.size(); ++i) {
    if (!valid[i] || gt_parts[i] == kVoidLabel) continue;
    auto& [correct, total] = counts[gt_parts[i]];
    ++total;
    if (pred_parts[i] == gt_parts[i]) ++correct;
  }
  PartAccuracy out;
  double sum = 0.0;
  for (const auto& [id, pair] : counts) {
    double acc = double(pair.first) / double(pair.second);
    out.per_part.emplace_back(id, acc);
    sum += acc;
  }
  if (!out.per_part.empty()) out.macro_average = sum / double(out.per_part.size());
  return out;
}

}  // namespace spk
