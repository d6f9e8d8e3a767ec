#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/taxonomy.hpp"

namespace spk {

// Partition of the benchmark classes into the stuff and object streams,
// plus the ordered part list of each object that has parts. The stuff
// stream's output space is its stuff classes followed by one synthetic
// foreground class covering all non-stuff classes.
class StreamSpec {
 public:
  StreamSpec(std::vector<LabelId> stuff, std::vector<LabelId> objects,
             std::map<LabelId, std::vector<LabelId>> parts_by_object,
             LabelId foreground_id)
      : stuff_(std::move(stuff)),
        objects_(std::move(objects)),
        parts_by_object_(std::move(parts_by_object)),
        foreground_id_(foreground_id) {
    std::sort(stuff_.begin(), stuff_.end());
    std::sort(objects_.begin(), objects_.end());
    for (std::size_t i = 0; i < stuff_.size(); ++i) {
      if (stuff_[i] == kVoidLabel || (i > 0 && stuff_[i] == stuff_[i - 1])) {
        throw ValidationError("stuff ids must be distinct non-void labels");
      }
      stuff_channel_[stuff_[i]] = i;
    }
    for (std::size_t i = 0; i < objects_.size(); ++i) {
      if (objects_[i] == kVoidLabel || (i > 0 && objects_[i] == objects_[i - 1])) {
        throw ValidationError("object ids must be distinct non-void labels");
      }
      if (stuff_channel_.count(objects_[i])) {
        throw ValidationError("label " + std::to_string(objects_[i]) +
                              " appears in both the stuff and object streams");
      }
      object_channel_[objects_[i]] = i;
    }
    if (stuff_channel_.count(foreground_id_) || object_channel_.count(foreground_id_) ||
        foreground_id_ == kVoidLabel) {
      throw ValidationError("foreground id must be a fresh synthetic label");
    }
    std::set<LabelId> all_parts;
    for (const auto& [object, parts] : parts_by_object_) {
      if (!object_channel_.count(object)) {
        throw ValidationError("part list attached to non-object label " +
                              std::to_string(object));
      }
      if (parts.empty()) {
        throw ValidationError("object " + std::to_string(object) +
                              " has an empty part list");
      }
      for (LabelId part : parts) {
        if (part == kVoidLabel) throw ValidationError("void part id");
        all_parts.insert(part);
      }
    }
    part_classes_.assign(all_parts.begin(), all_parts.end());
    for (std::size_t i = 0; i < part_classes_.size(); ++i) {
      part_channel_[part_classes_[i]] = i;
    }
  }

  // Streams derived from the taxonomy's macro classes; labels marked Part
  // join the part stream of every object they are registered under.
  static StreamSpec from_taxonomy(const Taxonomy& taxonomy,
                                  const std::vector<LabelId>& benchmark) {
    std::vector<LabelId> stuff, objects;
    for (LabelId id : benchmark) {
      switch (taxonomy.macro(id)) {
        case MacroClass::Stuff: stuff.push_back(id); break;
        case MacroClass::Object: objects.push_back(id); break;
        case MacroClass::Part: break;
      }
    }
    std::map<LabelId, std::vector<LabelId>> parts;
    for (const auto& entry : taxonomy.entries()) {
      if (entry.macro != MacroClass::Part) continue;
      for (LabelId object : taxonomy.part_parents(entry.id)) {
        if (std::find(objects.begin(), objects.end(), object) != objects.end()) {
          parts[object].push_back(entry.id);
        }
      }
    }
    for (auto& [object, list] : parts) std::sort(list.begin(), list.end());
    return StreamSpec(std::move(stuff), std::move(objects), std::move(parts),
                      LabelId(taxonomy.dictionary_size()));
  }

  const std::vector<LabelId>& stuff_ids() const { return stuff_; }
  const std::vector<LabelId>& object_ids() const { return objects_; }
  const std::vector<LabelId>& part_classes() const { return part_classes_; }
  LabelId foreground_id() const { return foreground_id_; }

  std::size_t stuff_channel_count() const { return stuff_.size() + 1; }
  std::size_t foreground_channel() const { return stuff_.size(); }
  std::size_t object_channel_count() const { return objects_.size(); }
  std::size_t part_channel_count() const { return part_classes_.size(); }

  bool is_stuff(LabelId id) const { return stuff_channel_.count(id) > 0; }
  bool is_object(LabelId id) const { return object_channel_.count(id) > 0; }
  bool in_benchmark(LabelId id) const { return is_stuff(id) || is_object(id); }

  std::optional<std::size_t> stuff_channel(LabelId id) const {
    auto it = stuff_channel_.find(id);
    if (it == stuff_channel_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> object_channel(LabelId id) const {
    auto it = object_channel_.find(id);
    if (it == object_channel_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<std::size_t> part_channel(LabelId id) const {
    auto it = part_channel_.find(id);
    if (it == part_channel_.end()) return std::nullopt;
    return it->second;
  }

  LabelId stuff_label_at(std::size_t channel) const { return stuff_.at(channel); }
  LabelId object_label_at(std::size_t channel) const { return objects_.at(channel); }
  LabelId part_label_at(std::size_t channel) const { return part_classes_.at(channel); }

  // nullptr when the object has no registered parts
  const std::vector<LabelId>* parts_of_object(LabelId object) const {
    auto it = parts_by_object_.find(object);
    return it == parts_by_object_.end() ? nullptr : &it->second;
  }
  const std::map<LabelId, std::vector<LabelId>>& parts_by_object() const {
    return parts_by_object_;
  }

  // -------------------------------------------------------------------------
  // TSV sidecar: lines `stuff<TAB>id`, `object<TAB>id`,
  // `part<TAB>object_id<TAB>part_id`, `foreground<TAB>id`.

  static StreamSpec load_tsv(std::istream& in) {
    std::vector<LabelId> stuff, objects;
    std::map<LabelId, std::vector<LabelId>> parts;
    std::optional<LabelId> foreground;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      std::istringstream fields(line);
      std::string kind;
      std::getline(fields, kind, '\t');
      auto next_id = [&]() -> LabelId {
        std::string field;
        if (!std::getline(fields, field, '\t') || field.empty()) {
          throw ValidationError("stream spec line " + std::to_string(line_no) +
                                ": missing id field");
        }
        try {
          return LabelId(std::stoul(field));
        } catch (const std::exception&) {
          throw ValidationError("stream spec line " + std::to_string(line_no) +
                                ": bad id '" + field + "'");
        }
      };
      if (kind == "stuff") {
        stuff.push_back(next_id());
      } else if (kind == "object") {
        objects.push_back(next_id());
      } else if (kind == "part") {
        LabelId object = next_id();
        parts[object].push_back(next_id());
      } else if (kind == "foreground") {
        foreground = next_id();
      } else {
        throw ValidationError("stream spec line " + std::to_string(line_no) +
                              ": unknown kind '" + kind + "'");
      }
    }
    if (!foreground) {
      LabelId max_id = 0;
      for (LabelId id : stuff) max_id = std::max(max_id, id);
      for (LabelId id : objects) max_id = std::max(max_id, id);
      for (const auto& [o, list] : parts) {
        max_id = std::max(max_id, o);
        for (LabelId p : list) max_id = std::max(max_id, p);
      }
      foreground = max_id + 1;
    }
    return StreamSpec(std::move(stuff), std::move(objects), std::move(parts),
                      *foreground);
  }

  static StreamSpec load_tsv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open stream spec " + path.string());
    return load_tsv(in);
  }

  std::string to_tsv() const {
    std::ostringstream out;
    out << "foreground\t" << foreground_id_ << '\n';
    for (LabelId id : stuff_) out << "stuff\t" << id << '\n';
    for (LabelId id : objects_) out << "object\t" << id << '\n';
    for (const auto& [object, list] : parts_by_object_) {
      for (LabelId part : list) out << "part\t" << object << '\t' << part << '\n';
    }
    return out.str();
  }

 private:
  std::vector<LabelId> stuff_;
  std::vector<LabelId> objects_;
  std::map<LabelId, std::vector<LabelId>> parts_by_object_;
  LabelId foreground_id_;
  std::vector<LabelId> part_classes_;
  std::map<LabelId, std::size_t> stuff_channel_;
  std::map<LabelId, std::size_t> object_channel_;
  std::map<LabelId, std::size_t> part_channel_;
};

// Stuff-stream training target: stuff labels pass through, every object
// label collapses to the synthetic foreground class, void stays void.
inline LabelMask remap_targets_stuff(const LabelMask& gt, const StreamSpec& spec) {
  LabelMask out(gt.height(), gt.width());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    LabelId label = gt[i];
    if (label == kVoidLabel || spec.is_stuff(label)) {
      out[i] = label;
    } else if (spec.is_object(label)) {
      out[i] = spec.foreground_id();
    } else {
      throw ValidationError("label " + std::to_string(label) +
                            " is outside the benchmark streams");
    }
  }
  return out;
}

// Foreground-probability slice of the stuff stream's normalized scores.
template <typename T>
ScoreGrid<T> objectness(const ScoreGrid<T>& stuff_scores, const StreamSpec& spec) {
  if (stuff_scores.channels() != spec.stuff_channel_count()) {
    throw ValidationError("stuff score map has " +
                          std::to_string(stuff_scores.channels()) +
                          " channels, spec expects " +
                          std::to_string(spec.stuff_channel_count()));
  }
  ScoreGrid<T> out(stuff_scores.height(), stuff_scores.width(), 1);
  std::size_t fg = spec.foreground_channel();
  for (std::size_t r = 0; r < out.height(); ++r) {
    for (std::size_t c = 0; c < out.width(); ++c) {
      out.at(r, c, 0) = stuff_scores.at(r, c, fg);
    }
  }
  out.set_normalized(false);
  return out;
}

// ---------------------------------------------------------------------------
// Masked per-pixel cross-entropy

template <typename T>
struct CrossEntropy {
  double loss = 0.0;            // mean over unmasked pixels, 0 when none
  ScoreGrid<T> gradient;        // d loss / d logits, zero on masked pixels
  std::size_t unmasked = 0;
};

// Loss over softmax of unbounded logits, averaged over unmasked pixels.
// The gradient is (softmax - onehot) / N on unmasked pixels and exactly
// zero elsewhere. Softmax uses max subtraction; all arithmetic in double.
template <typename T>
CrossEntropy<T> masked_cross_entropy(const ScoreGrid<T>& logits,
                                     const Grid<std::uint32_t>& targets,
                                     const ByteMask& ignore) {
  if (logits.height() != targets.height() || logits.width() != targets.width() ||
      !targets.same_shape(ignore)) {
    throw ValidationError("logits, targets, and mask shapes differ");
  }
  CrossEntropy<T> result;
  result.gradient = ScoreGrid<T>(logits.height(), logits.width(), logits.channels());
  std::size_t channels = logits.channels();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (!ignore[i]) ++result.unmasked;
  }
  if (result.unmasked == 0) return result;
  double inv_n = 1.0 / double(result.unmasked);
  double loss_sum = 0.0;
  std::vector<double> probs(channels);
  for (std::size_t r = 0; r < logits.height(); ++r) {
    for (std::size_t c = 0; c < logits.width(); ++c) {
      if (ignore(r, c)) continue;
      std::uint32_t target = targets(r, c);
      if (target >= channels) {
        throw ValidationError("target " + std::to_string(target) +
                              " out of range for " + std::to_string(channels) +
                              " channels at pixel (" + std::to_string(r) + "," +
                              std::to_string(c) + ")");
      }
      auto x = logits.pixel(r, c);
      double max_logit = double(x[0]);
      for (std::size_t k = 1; k < channels; ++k) {
        max_logit = std::max(max_logit, double(x[k]));
      }
      double z = 0.0;
      for (std::size_t k = 0; k < channels; ++k) {
        probs[k] = std::exp(double(x[k]) - max_logit);
        z += probs[k];
      }
      loss_sum += -(double(x[target]) - max_logit - std::log(z));
      auto g = result.gradient.pixel(r, c);
      for (std::size_t k = 0; k < channels; ++k) {
        double p = probs[k] / z;
        g[k] = T((p - (k == target ? 1.0 : 0.0)) * inv_n);
      }
    }
  }
  result.loss = loss_sum * inv_n;
  return result;
}

// ---------------------------------------------------------------------------
// Per-stream losses

struct LossReport {
  double stuff = 0.0;
  double object = 0.0;
  double part = 0.0;
  double total = 0.0;
  std::size_t stuff_unmasked = 0;
  std::size_t object_unmasked = 0;
  std::size_t part_unmasked = 0;
  bool has_part_stream = false;
};

namespace detail {

template <typename T>
std::pair<double, std::size_t> stream_loss(const ScoreGrid<T>& logits,
                                           const Grid<std::uint32_t>& targets,
                                           const ByteMask& ignore) {
  CrossEntropy<T> ce = masked_cross_entropy(logits, targets, ignore);
  return {ce.loss, ce.unmasked};
}

}  // namespace detail

// Stuff-stream channel targets: stuff label -> its channel, object label ->
// the foreground channel; void pixels are masked out.
inline std::pair<Grid<std::uint32_t>, ByteMask> stuff_targets(
    const LabelMask& gt, const StreamSpec& spec) {
  Grid<std::uint32_t> targets(gt.height(), gt.width(), 0);
  ByteMask ignore(gt.height(), gt.width(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    LabelId label = gt[i];
    if (label == kVoidLabel) {
      ignore[i] = 1;
    } else if (auto ch = spec.stuff_channel(label)) {
      targets[i] = std::uint32_t(*ch);
    } else if (spec.is_object(label)) {
      targets[i] = std::uint32_t(spec.foreground_channel());
    } else {
      throw ValidationError("label " + std::to_string(label) +
                            " is outside the benchmark streams");
    }
  }
  return {std::move(targets), std::move(ignore)};
}

// Object-stream channel targets; stuff and void pixels are masked out.
inline std::pair<Grid<std::uint32_t>, ByteMask> object_targets(
    const LabelMask& gt, const StreamSpec& spec) {
  Grid<std::uint32_t> targets(gt.height(), gt.width(), 0);
  ByteMask ignore(gt.height(), gt.width(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    LabelId label = gt[i];
    if (auto ch = spec.object_channel(label)) {
      targets[i] = std::uint32_t(*ch);
    } else if (label == kVoidLabel || spec.is_stuff(label)) {
      ignore[i] = 1;
    } else {
      throw ValidationError("label " + std::to_string(label) +
                            " is outside the benchmark streams");
    }
  }
  return {std::move(targets), std::move(ignore)};
}

// Part-stream channel targets over the union of all part classes; pixels
// without part annotation are masked out.
inline std::pair<Grid<std::uint32_t>, ByteMask> part_targets(
    const LabelMask& gt_parts, const StreamSpec& spec) {
  Grid<std::uint32_t> targets(gt_parts.height(), gt_parts.width(), 0);
  ByteMask ignore(gt_parts.height(), gt_parts.width(), 0);
  for (std::size_t i = 0; i < gt_parts.size(); ++i) {
    LabelId label = gt_parts[i];
    if (auto ch = spec.part_channel(label)) {
      targets[i] = std::uint32_t(*ch);
    } else {
      ignore[i] = 1;
    }
  }
  return {std::move(targets), std::move(ignore)};
}

// L = L_stuff + L_object (+ L_part when part logits are supplied). Each
// stream's loss is the mean over its own unmasked pixels.
template <typename T>
LossReport total_loss(const LabelMask& gt, const ScoreGrid<T>& stuff_logits,
                      const ScoreGrid<T>& object_logits,
                      const StreamSpec& spec,
                      const ScoreGrid<T>* part_logits = nullptr,
                      const LabelMask* gt_parts = nullptr) {
  if (stuff_logits.height() != gt.height() || stuff_logits.width() != gt.width() ||
      object_logits.height() != gt.height() || object_logits.width() != gt.width()) {
    throw ValidationError("stream logits and ground truth shapes differ");
  }
  if (stuff_logits.channels() != spec.stuff_channel_count()) {
    throw ValidationError("stuff stream expects " +
                          std::to_string(spec.stuff_channel_count()) + " channels");
  }
  if (object_logits.channels() != spec.object_channel_count()) {
    throw ValidationError("object stream expects " +
                          std::to_string(spec.object_channel_count()) + " channels");
  }
  LossReport report;
  {
    auto [targets, ignore] = stuff_targets(gt, spec);
    auto [loss, n] = detail::stream_loss(stuff_logits, targets, ignore);
    report.stuff = loss;
    report.stuff_unmasked = n;
  }
  {
    auto [targets, ignore] = object_targets(gt, spec);
    auto [loss, n] = detail::stream_loss(object_logits, targets, ignore);
    report.object = loss;
    report.object_unmasked = n;
  }
  report.total = report.stuff + report.object;
  if (part_logits != nullptr) {
    if (gt_parts == nullptr) {
      throw ValidationError("part logits supplied without part ground truth");
    }
    if (part_logits->height() != gt.height() || part_logits->width() != gt.width() ||
        !gt_parts->same_shape(gt)) {
      throw ValidationError("part stream shapes differ from ground truth");
    }
    if (part_logits->channels() != spec.part_channel_count()) {
      throw ValidationError("part stream expects " +
                            std::to_string(spec.part_channel_count()) + " channels");
    }
    auto [targets, ignore] = part_targets(*gt_parts, spec);
    auto [loss, n] = detail::stream_loss(*part_logits, targets, ignore);
    report.part = loss;
    report.part_unmasked = n;
    report.has_part_stream = true;
    report.total += report.part;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Fusion

enum class FusionMode { Hard, Soft };

inline const char* fusion_mode_name(FusionMode mode) {
  return mode == FusionMode::Hard ? "hard" : "soft";
}

inline std::optional<FusionMode> parse_fusion_mode(std::string_view name) {
  if (name == "hard") return FusionMode::Hard;
  if (name == "soft") return FusionMode::Soft;
  return std::nullopt;
}

// Merges the stuff and object streams into the scene labeling.
//   hard: the stuff stream's argmax decides; the foreground channel defers
//         to the object stream's argmax.
//   soft: stuff-class scores compete directly with objectness-weighted
//         object-class scores; the global argmax wins.
// Ties resolve to the lowest channel, stuff channels before object channels.
// With no object classes both modes reduce to the stuff-class argmax.
template <typename T>
LabelMask fuse_scene(const ScoreGrid<T>& stuff_scores,
                     const ScoreGrid<T>& object_scores, const StreamSpec& spec,
                     FusionMode mode) {
  if (stuff_scores.height() != object_scores.height() ||
      stuff_scores.width() != object_scores.width()) {
    throw ValidationError("stuff and object score maps differ in shape");
  }
  if (stuff_scores.channels() != spec.stuff_channel_count()) {
    throw ValidationError("stuff score map channel count mismatch");
  }
  if (object_scores.channels() != spec.object_channel_count()) {
    throw ValidationError("object score map channel count mismatch");
  }
  if (!stuff_scores.normalized() ||
      (!object_scores.normalized() && spec.object_channel_count() > 0)) {
    throw ValidationError("fusion requires normalized score maps");
  }
  std::size_t stuff_channels = spec.stuff_channel_count();
  std::size_t fg = spec.foreground_channel();
  LabelMask out(stuff_scores.height(), stuff_scores.width());
  for (std::size_t r = 0; r < out.height(); ++r) {
    for (std::size_t c = 0; c < out.width(); ++c) {
      auto stuff_px = stuff_scores.pixel(r, c);
      if (mode == FusionMode::Hard) {
        std::size_t best = argmax(stuff_px);
        if (best != fg) {
          out(r, c) = spec.stuff_label_at(best);
        } else if (spec.object_channel_count() == 0) {
          // degenerate spec: fall back to the best stuff class
          out(r, c) = spec.stuff_label_at(argmax(stuff_px.first(fg)));
        } else {
          auto object_px = object_scores.pixel(r, c);
          out(r, c) = spec.object_label_at(argmax(object_px));
        }
      } else {
        T fg_score = stuff_px[fg];
        double best_score = -1.0;
        bool best_is_object = false;
        std::size_t best_channel = 0;
        for (std::size_t k = 0; k < stuff_channels - 1; ++k) {
          if (double(stuff_px[k]) > best_score) {
            best_score = double(stuff_px[k]);
            best_channel = k;
          }
        }
        for (std::size_t k = 0; k < spec.object_channel_count(); ++k) {
          double score = double(fg_score) * double(object_scores.at(r, c, k));
          if (score > best_score) {
            best_score = score;
            best_is_object = true;
            best_channel = k;
          }
        }
        out(r, c) = best_is_object ? spec.object_label_at(best_channel)
                                   : spec.stuff_label_at(best_channel);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Part segmentation on fused scenes

inline constexpr double kDefaultPartThreshold = 0.3;

struct PartSegmentation {
  LabelMask parts;                      // part label per pixel, void = no part
  std::vector<LabelId> missing_scores;  // objects with parts but no score map
};

// For each pixel assigned an object with registered parts, the argmax over
// that object's part channels wins when its score reaches the threshold;
// everything else is no-part. Each object's score map carries its part list
// channels plus one trailing no-part channel.
template <typename T>
PartSegmentation segment_parts(
    const ScoreGrid<T>& object_scores, const LabelMask& scene,
    const std::map<LabelId, ScoreGrid<T>>& part_scores_by_object,
    const StreamSpec& spec, double part_threshold = kDefaultPartThreshold) {
  if (object_scores.height() != scene.height() ||
      object_scores.width() != scene.width()) {
    throw ValidationError("object scores and scene shapes differ");
  }
  for (const auto& [object, scores] : part_scores_by_object) {
    const std::vector<LabelId>* parts = spec.parts_of_object(object);
    if (parts == nullptr) {
      throw ValidationError("part scores supplied for object " +
                            std::to_string(object) + " that has no parts");
    }
    if (scores.height() != scene.height() || scores.width() != scene.width() ||
        scores.channels() != parts->size() + 1) {
      throw ValidationError("part score map for object " + std::to_string(object) +
                            " must be HxWx(parts+1)");
    }
  }
  PartSegmentation result;
  result.parts = LabelMask(scene.height(), scene.width(), kVoidLabel);
  std::set<LabelId> missing;
  for (std::size_t r = 0; r < scene.height(); ++r) {
    for (std::size_t c = 0; c < scene.width(); ++c) {
      LabelId object = scene(r, c);
      const std::vector<LabelId>* parts = spec.parts_of_object(object);
      if (parts == nullptr) continue;
      auto it = part_scores_by_object.find(object);
      if (it == part_scores_by_object.end()) {
        missing.insert(object);
        continue;
      }
      auto px = it->second.pixel(r, c);
      std::size_t best = argmax(px.first(parts->size()));
      if (double(px[best]) >= part_threshold) {
        result.parts(r, c) = (*parts)[best];
      }
    }
  }
  result.missing_scores.assign(missing.begin(), missing.end());
  return result;
}

// One hypernym-merged copy of the scene per requested level, coarse to fine.
inline std::vector<LabelMask> hierarchical_output(const LabelMask& scene,
                                                  const Taxonomy& taxonomy,
                                                  const std::vector<std::size_t>& levels) {
  if (!std::is_sorted(levels.begin(), levels.end())) {
    throw ValidationError("levels must be sorted ascending");
  }
  std::vector<LabelMask> out;
  out.reserve(levels.size());
  for (std::size_t level : levels) {
    out.push_back(taxonomy.merge_to_level(level).apply_to(scene));
  }
  return out;
}

}  // namespace spk
