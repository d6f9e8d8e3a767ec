#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/json_out.hpp"
#include "spk/record.hpp"

namespace spk {

struct PerImageStat {
  std::string id;
  std::uint64_t instances = 0;        // scene-level instances
  std::uint64_t distinct_classes = 0; // distinct non-void scene labels
  std::uint64_t part_instances = 0;
  std::uint64_t part_classes = 0;
};

// Corpus-level counters. Everything is monoidal: stats computed on shards
// and merged (in shard order) equal stats computed globally.
class CorpusStats {
 public:
  void add(const ImageRecord& record) {
    ++images_;
    PerImageStat stat;
    stat.id = record.id;

    // Scene-level pixel mass and instances.
    std::map<std::uint32_t, LabelId> instance_label;
    std::set<LabelId> classes;
    for (std::size_t i = 0; i < record.labels.size(); ++i) {
      LabelId label = record.labels[i];
      std::uint32_t inst = record.instances[i];
      if (label == kVoidLabel) {
        if (inst != 0) {
          throw ValidationError("image " + record.id +
                                ": instance index on a void pixel");
        }
        continue;
      }
      ++pixel_count_[label];
      classes.insert(label);
      if (inst != 0) {
        auto [it, fresh] = instance_label.emplace(inst, label);
        if (!fresh && it->second != label) {
          throw ValidationError("image " + record.id + ": instance " +
                                std::to_string(inst) +
                                " spans two labels");
        }
      }
    }
    for (const auto& [inst, label] : instance_label) {
      ++instance_count_[label];
      order_log_.emplace_back(inst, label);
    }
    stat.instances = instance_label.size();
    stat.distinct_classes = classes.size();
    if (!record.scene.empty()) {
      for (LabelId label : classes) scene_spread_[label].insert(record.scene);
    }

    // Part levels: counts plus the object classes each part attaches to.
    for (const PartLevel& level : record.parts) {
      if (!level.labels.same_shape(record.labels)) {
        throw ValidationError("image " + record.id +
                              ": part level shape differs from scene");
      }
      std::map<std::uint32_t, LabelId> part_instance_label;
      std::set<LabelId> part_classes;
      std::map<std::uint32_t, std::map<LabelId, std::uint64_t>> under;
      for (std::size_t i = 0; i < level.labels.size(); ++i) {
        LabelId label = level.labels[i];
        if (label == kVoidLabel) continue;
        ++part_pixel_count_[label];
        part_classes.insert(label);
        std::uint32_t inst = level.instances[i];
        if (inst != 0) {
          part_instance_label.emplace(inst, label);
          LabelId host = record.labels[i];
          if (host != kVoidLabel) ++under[inst][host];
        }
      }
      for (const auto& [inst, label] : part_instance_label) {
        ++part_instance_count_[label];
        auto it = under.find(inst);
        if (it != under.end() && !it->second.empty()) {
          // majority scene class under the part instance
          LabelId host = it->second.begin()->first;
          std::uint64_t best = it->second.begin()->second;
          for (const auto& [h, n] : it->second) {
            if (n > best) { host = h; best = n; }
          }
          part_parent_classes_[label].insert(host);
        }
      }
      stat.part_instances += part_instance_label.size();
      stat.part_classes += part_classes.size();
    }
    per_image_.push_back(std::move(stat));
  }

  void merge(const CorpusStats& other) {
    images_ += other.images_;
    for (const auto& [k, v] : other.instance_count_) instance_count_[k] += v;
    for (const auto& [k, v] : other.pixel_count_) pixel_count_[k] += v;
    for (const auto& [k, v] : other.part_instance_count_) part_instance_count_[k] += v;
    for (const auto& [k, v] : other.part_pixel_count_) part_pixel_count_[k] += v;
    for (const auto& [k, v] : other.scene_spread_) {
      scene_spread_[k].insert(v.begin(), v.end());
    }
    for (const auto& [k, v] : other.part_parent_classes_) {
      part_parent_classes_[k].insert(v.begin(), v.end());
    }
    per_image_.insert(per_image_.end(), other.per_image_.begin(),
                      other.per_image_.end());
    order_log_.insert(order_log_.end(), other.order_log_.begin(),
                      other.order_log_.end());
  }

  std::uint64_t images() const { return images_; }
  const std::map<LabelId, std::uint64_t>& instance_counts() const {
    return instance_count_;
  }
  const std::map<LabelId, std::uint64_t>& pixel_counts() const {
    return pixel_count_;
  }
  const std::map<LabelId, std::uint64_t>& part_instance_counts() const {
    return part_instance_count_;
  }
  const std::map<LabelId, std::uint64_t>& part_pixel_counts() const {
    return part_pixel_count_;
  }
  const std::vector<PerImageStat>& per_image() const { return per_image_; }
  const std::vector<std::pair<std::uint32_t, LabelId>>& order_log() const {
    return order_log_;
  }

  // Number of scene categories a label appears in.
  std::uint64_t scene_spread(LabelId label) const {
    auto it = scene_spread_.find(label);
    return it == scene_spread_.end() ? 0 : it->second.size();
  }

  // Number of object classes a part class was observed under.
  std::uint64_t part_spread(LabelId part) const {
    auto it = part_parent_classes_.find(part);
    return it == part_parent_classes_.end() ? 0 : it->second.size();
  }

 private:
  std::uint64_t images_ = 0;
  std::map<LabelId, std::uint64_t> instance_count_;
  std::map<LabelId, std::uint64_t> pixel_count_;
  std::map<LabelId, std::uint64_t> part_instance_count_;
  std::map<LabelId, std::uint64_t> part_pixel_count_;
  std::map<LabelId, std::set<std::string>> scene_spread_;
  std::map<LabelId, std::set<LabelId>> part_parent_classes_;
  std::vector<PerImageStat> per_image_;
  std::vector<std::pair<std::uint32_t, LabelId>> order_log_;
};

// Labels ordered by descending instance count, ties by ascending id.
inline std::vector<std::pair<LabelId, std::uint64_t>> frequency_ranking(
    const std::map<LabelId, std::uint64_t>& counts) {
  std::vector<std::pair<LabelId, std::uint64_t>> ranked(counts.begin(),
                                                        counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return ranked;
}

struct Histogram {
  std::map<std::uint64_t, std::uint64_t> buckets;
  double mean = 0.0;
  std::uint64_t min = 0;
  std::uint64_t max = 0;
};

inline Histogram histogram_of(const std::vector<std::uint64_t>& values) {
  Histogram h;
  if (values.empty()) return h;
  h.min = values.front();
  h.max = values.front();
  std::uint64_t sum = 0;
  for (std::uint64_t v : values) {
    ++h.buckets[v];
    sum += v;
    h.min = std::min(h.min, v);
    h.max = std::max(h.max, v);
  }
  h.mean = double(sum) / double(values.size());
  return h;
}

struct PerImageHistograms {
  Histogram instances;
  Histogram classes;
};

inline PerImageHistograms per_image_histograms(const CorpusStats& stats) {
  std::vector<std::uint64_t> instances, classes;
  instances.reserve(stats.per_image().size());
  classes.reserve(stats.per_image().size());
  for (const PerImageStat& s : stats.per_image()) {
    instances.push_back(s.instances);
    classes.push_back(s.distinct_classes);
  }
  return {histogram_of(instances), histogram_of(classes)};
}

// ---------------------------------------------------------------------------
// Mode segmentation

inline constexpr std::size_t kModeGridSize = 256;

// Per-pixel vote counts on a fixed common grid. Void pixels do not vote;
// ties resolve to the lowest label id.
class ModeAccumulator {
 public:
  explicit ModeAccumulator(std::size_t grid = kModeGridSize)
      : grid_(grid), votes_(grid * grid) {}

  std::size_t grid() const { return grid_; }

  void add(const LabelMask& mask) {
    LabelMask scaled = resize_nearest(mask, grid_, grid_);
    for (std::size_t i = 0; i < scaled.size(); ++i) {
      if (scaled[i] != kVoidLabel) ++votes_[i][scaled[i]];
    }
    ++images_;
  }

  void merge(const ModeAccumulator& other) {
    if (other.grid_ != grid_) throw ValidationError("mode grids differ");
    for (std::size_t i = 0; i < votes_.size(); ++i) {
      for (const auto& [label, n] : other.votes_[i]) votes_[i][label] += n;
    }
    images_ += other.images_;
  }

  std::uint64_t images() const { return images_; }

  LabelMask mode() const {
    if (images_ == 0) throw ValidationError("mode of an empty corpus");
    LabelMask out(grid_, grid_, kVoidLabel);
    for (std::size_t i = 0; i < votes_.size(); ++i) {
      std::uint64_t best = 0;
      LabelId winner = kVoidLabel;
      // map iterates ascending ids, so strict > keeps the lowest id on ties
      for (const auto& [label, n] : votes_[i]) {
        if (n > best) {
          best = n;
          winner = label;
        }
      }
      out[i] = winner;
    }
    return out;
  }

 private:
  std::size_t grid_;
  std::vector<std::map<LabelId, std::uint64_t>> votes_;
  std::uint64_t images_ = 0;
};

// Fraction of labeled pixels of one image that the (rescaled) mode map gets
// right; absent when the image holds no labeled pixel. Matches
// pixel_accuracy over an identity class map by construction.
inline std::optional<double> mode_image_accuracy(const LabelMask& mode,
                                                 const LabelMask& mask) {
  LabelMask scaled = resize_nearest(mode, mask.height(), mask.width());
  std::uint64_t hit = 0, labeled = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] == kVoidLabel) continue;
    ++labeled;
    if (scaled[i] == mask[i]) ++hit;
  }
  if (labeled == 0) return std::nullopt;
  return double(hit) / double(labeled);
}

// Mean per-image fraction of pixels matching the mode segmentation.
template <typename MaskRange>
std::optional<double> mode_accuracy(const LabelMask& mode,
                                    const MaskRange& masks) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const LabelMask& mask : masks) {
    if (auto acc = mode_image_accuracy(mode, mask)) {
      sum += *acc;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / double(n);
}

// ---------------------------------------------------------------------------
// Vocabulary growth

struct GrowthCurves {
  // distinct classes seen after the first n instances, n = 1..N
  std::vector<std::uint64_t> classes_after;
  // sliding-window estimate of P(instance n+1 introduces a new class)
  std::vector<double> new_class_probability;
  std::size_t window = 0;
};

inline GrowthCurves growth_curves(
    const std::vector<std::pair<std::uint32_t, LabelId>>& order_log,
    std::size_t window = 1000) {
  if (order_log.empty()) throw ValidationError("empty order log");
  GrowthCurves out;
  out.window = window;
  std::set<LabelId> seen;
  std::vector<std::uint8_t> is_new(order_log.size());
  out.classes_after.reserve(order_log.size());
  for (std::size_t i = 0; i < order_log.size(); ++i) {
    is_new[i] = seen.insert(order_log[i].second).second ? 1 : 0;
    out.classes_after.push_back(seen.size());
  }
  // prefix sums of first occurrences for O(1) window means
  std::vector<std::uint64_t> prefix(order_log.size() + 1, 0);
  for (std::size_t i = 0; i < order_log.size(); ++i) {
    prefix[i + 1] = prefix[i] + is_new[i];
  }
  std::size_t half = window / 2;
  out.new_class_probability.reserve(order_log.size());
  for (std::size_t i = 0; i < order_log.size(); ++i) {
    std::size_t lo = i > half ? i - half : 0;
    std::size_t hi = std::min(order_log.size(), i + half + 1);
    out.new_class_probability.push_back(double(prefix[hi] - prefix[lo]) /
                                        double(hi - lo));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Zipf fit

struct ZipfFit {
  double exponent = 0.0;   // minus the log-log slope
  double intercept = 0.0;  // log-count at log-rank 0
  double r_squared = 0.0;
  std::size_t ranks_used = 0;
  std::uint64_t count_floor = 0;
};

inline constexpr std::uint64_t kZipfCountFloor = 5;
inline constexpr std::size_t kZipfMinRanks = 10;

// Least-squares line on (log rank, log count) over ranks whose count
// reaches the floor.
inline ZipfFit zipf_fit(
    const std::vector<std::pair<LabelId, std::uint64_t>>& ranking,
    std::uint64_t count_floor = kZipfCountFloor) {
  std::vector<std::pair<double, double>> points;  // (log rank, log count)
  for (std::size_t i = 0; i < ranking.size(); ++i) {
    if (ranking[i].second < count_floor) break;  // ranking is descending
    points.emplace_back(std::log(double(i + 1)), std::log(double(ranking[i].second)));
  }
  if (points.size() < kZipfMinRanks) {
    throw ValidationError("zipf fit needs at least " +
                          std::to_string(kZipfMinRanks) +
                          " ranks above the count floor, have " +
                          std::to_string(points.size()));
  }
  double n = double(points.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  double denom = n * sxx - sx * sx;
  if (denom == 0) throw ValidationError("degenerate rank range in zipf fit");
  double slope = (n * sxy - sx * sy) / denom;
  double intercept = (sy - slope * sx) / n;
  double ss_tot = syy - sy * sy / n;
  double ss_res = 0;
  for (const auto& [x, y] : points) {
    double e = y - (slope * x + intercept);
    ss_res += e * e;
  }
  ZipfFit fit;
  fit.exponent = -slope;
  fit.intercept = intercept;
  fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.ranks_used = points.size();
  fit.count_floor = count_floor;
  return fit;
}

// ---------------------------------------------------------------------------
// Cross-dataset summary row

struct SummaryRow {
  std::uint64_t images = 0;
  std::uint64_t object_instances = 0;
  std::uint64_t object_classes = 0;
  std::uint64_t part_instances = 0;
  std::uint64_t part_classes = 0;
  double mean_classes_per_image = 0.0;
};

inline SummaryRow summary_table(const CorpusStats& stats) {
  SummaryRow row;
  row.images = stats.images();
  for (const auto& [label, n] : stats.instance_counts()) {
    (void)label;
    row.object_instances += n;
  }
  row.object_classes = stats.pixel_counts().size();
  for (const auto& [label, n] : stats.part_instance_counts()) {
    (void)label;
    row.part_instances += n;
  }
  row.part_classes = stats.part_pixel_counts().size();
  if (!stats.per_image().empty()) {
    std::uint64_t classes = 0;
    for (const PerImageStat& s : stats.per_image()) classes += s.distinct_classes;
    row.mean_classes_per_image = double(classes) / double(stats.per_image().size());
  }
  return row;
}

}  // namespace spk
