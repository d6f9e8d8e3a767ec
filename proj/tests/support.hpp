#pragma once

// Shared fixtures: random raster generators and independent brute-force
// oracles. Oracles recompute results pixel by pixel from definitions and
// must stay independent of the library code paths they check.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "spk/cascade.hpp"
#include "spk/grid.hpp"
#include "spk/taxonomy.hpp"

namespace testsupport {

using spk::LabelId;
using spk::LabelMask;

inline LabelMask random_mask(std::mt19937_64& rng, std::size_t height,
                             std::size_t width, std::uint32_t max_label,
                             bool allow_void = true) {
  LabelMask mask(height, width);
  std::uint32_t lo = allow_void ? 0 : 1;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = lo + std::uint32_t(rng() % (max_label - lo + 1));
  }
  return mask;
}

template <typename T>
spk::ScoreGrid<T> random_logits(std::mt19937_64& rng, std::size_t height,
                                std::size_t width, std::size_t channels,
                                double scale = 4.0) {
  spk::ScoreGrid<T> out(height, width, channels);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (auto& v : out.data()) v = T(dist(rng));
  return out;
}

template <typename T>
spk::ScoreGrid<T> random_normalized_scores(std::mt19937_64& rng,
                                           std::size_t height,
                                           std::size_t width,
                                           std::size_t channels) {
  spk::ScoreGrid<T> out(height, width, channels);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      double sum = 0.0;
      auto px = out.pixel(r, c);
      for (auto& v : px) {
        double x = dist(rng) + 1e-6;
        v = T(x);
        sum += x;
      }
      for (auto& v : px) v = T(double(v) / sum);
    }
  }
  out.set_normalized(true);
  return out;
}

// Four metrics recomputed by naive per-pixel counting, integer arithmetic
// until the final divisions.
struct OracleMetrics {
  std::optional<double> pixel_accuracy;
  std::optional<double> mean_accuracy;
  std::optional<double> mean_iou;
  std::optional<double> weighted_iou;
};

inline OracleMetrics brute_force_metrics(const LabelMask& gt,
                                         const LabelMask& pred,
                                         const spk::LabelRemap& class_map,
                                         std::size_t num_classes) {
  std::uint64_t total = 0, correct = 0;
  std::vector<std::uint64_t> t(num_classes + 1, 0), p(num_classes + 1, 0),
      hit(num_classes + 1, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    LabelId g = class_map.apply(gt[i]);
    if (g == 0) continue;  // void ground truth is excluded
    LabelId q = class_map.apply(pred[i]);
    ++total;
    ++t[g];
    if (q != 0) ++p[q];
    if (q == g) {
      ++correct;
      ++hit[g];
    }
  }
  OracleMetrics out;
  if (total > 0) out.pixel_accuracy = double(correct) / double(total);
  double acc_sum = 0, iou_sum = 0, wiou_sum = 0;
  std::uint64_t acc_n = 0, iou_n = 0, t_total = 0;
  for (std::size_t c = 1; c <= num_classes; ++c) t_total += t[c];
  for (std::size_t c = 1; c <= num_classes; ++c) {
    if (t[c] > 0) {
      acc_sum += double(hit[c]) / double(t[c]);
      ++acc_n;
    }
    if (t[c] + p[c] > 0) {
      double iou = double(hit[c]) / double(t[c] + p[c] - hit[c]);
      iou_sum += iou;
      ++iou_n;
      if (t[c] > 0 && t_total > 0) {
        wiou_sum += double(t[c]) / double(t_total) * iou;
      }
    }
  }
  if (acc_n > 0) out.mean_accuracy = acc_sum / double(acc_n);
  if (iou_n > 0) out.mean_iou = iou_sum / double(iou_n);
  if (t_total > 0) out.weighted_iou = wiou_sum;
  return out;
}

// Central finite differences of the masked cross-entropy loss.
inline spk::ScoreGrid<double> finite_difference_gradient(
    const spk::ScoreGrid<double>& logits, const spk::Grid<std::uint32_t>& targets,
    const spk::ByteMask& ignore, double epsilon = 1e-4) {
  spk::ScoreGrid<double> grad(logits.height(), logits.width(), logits.channels());
  spk::ScoreGrid<double> probe = logits;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    double saved = probe.data()[i];
    probe.data()[i] = saved + epsilon;
    double up = spk::masked_cross_entropy(probe, targets, ignore).loss;
    probe.data()[i] = saved - epsilon;
    double down = spk::masked_cross_entropy(probe, targets, ignore).loss;
    probe.data()[i] = saved;
    grad.data()[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

// A small taxonomy with stuff, objects, nested parts, and a two-level
// hypernym tree:
//   wall(S) sky(S)   car(O) truck(O) cabinet(O) desk(O)
//   wheel(P of car) rim(P of wheel) door(P of car and cabinet)
//   conveyance > {car, truck};  furniture > {cabinet, desk}
struct ToyWorld {
  spk::Taxonomy taxonomy;
  LabelId wall, sky, car, truck, cabinet, desk;
  LabelId wheel, rim, door;
  LabelId conveyance, furniture;

  ToyWorld() {
    using spk::MacroClass;
    wall = taxonomy.intern("wall", MacroClass::Stuff);
    sky = taxonomy.intern("sky", MacroClass::Stuff);
    car = taxonomy.intern("car", MacroClass::Object);
    truck = taxonomy.intern("truck", MacroClass::Object);
    cabinet = taxonomy.intern("cabinet", MacroClass::Object);
    desk = taxonomy.intern("desk", MacroClass::Object);
    wheel = taxonomy.intern("wheel", MacroClass::Part);
    rim = taxonomy.intern("rim", MacroClass::Part);
    door = taxonomy.intern("door", MacroClass::Part);
    conveyance = taxonomy.intern("conveyance", MacroClass::Object);
    furniture = taxonomy.intern("furniture", MacroClass::Object);
    taxonomy.add_part_parent(wheel, car);
    taxonomy.add_part_parent(rim, wheel);
    taxonomy.add_part_parent(door, car);
    taxonomy.add_part_parent(door, cabinet);
    taxonomy.set_hypernym(car, conveyance);
    taxonomy.set_hypernym(truck, conveyance);
    taxonomy.set_hypernym(cabinet, furniture);
    taxonomy.set_hypernym(desk, furniture);
    taxonomy.freeze();
  }
};

}  // namespace testsupport
