#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spk/cascade.hpp"
#include "spk/common.hpp"
#include "spk/datastats.hpp"
#include "spk/grid.hpp"
#include "spk/json_out.hpp"
#include "spk/maskio.hpp"
#include "spk/record.hpp"
#include "spk/rng.hpp"
#include "spk/taxonomy.hpp"

namespace spk {

// The synthetic corpus is the statistical oracle for the statistics,
// metrics, and consistency pipelines: scenes of stuff background bands plus
// Zipf-sampled instance shapes, with a manifest of exact ground-truth
// counts. Deterministic given the seed.
struct SyntheticSceneSpec {
  std::size_t grid = 128;
  std::size_t vocabulary = 200;  // scene-level classes; label id == Zipf rank
  double zipf_exponent = 1.3;
  std::size_t min_instances = 8;
  std::size_t max_instances = 40;
  double stuff_ratio = 0.2;      // leading fraction of the vocabulary marked stuff
  double part_probability = 0.25;
  std::size_t part_classes = 10;
  std::size_t scene_categories = 5;
  std::size_t images = 100;
  std::uint64_t seed = 0;

  std::size_t stuff_classes() const {
    std::size_t s = std::size_t(double(vocabulary) * stuff_ratio);
    return std::min(std::max<std::size_t>(s, 1), vocabulary);
  }

  void validate() const {
    if (grid < 8) throw ValidationError("grid must be at least 8");
    if (vocabulary == 0) throw ValidationError("vocabulary must be positive");
    if (min_instances == 0 || min_instances > max_instances) {
      throw ValidationError("need 1 <= min_instances <= max_instances");
    }
    if (max_instances > grid * grid) {
      throw ValidationError("more instances than grid cells");
    }
    if (zipf_exponent <= 0) throw ValidationError("zipf exponent must be positive");
    if (stuff_ratio < 0 || stuff_ratio > 1) {
      throw ValidationError("stuff ratio must lie in [0, 1]");
    }
    if (part_probability < 0 || part_probability > 1) {
      throw ValidationError("part probability must lie in [0, 1]");
    }
    if (scene_categories == 0) throw ValidationError("need at least one scene category");
    if (images == 0) throw ValidationError("need at least one image");
  }
};

struct SyntheticImage {
  ImageRecord record;
  RgbImage photo;
};

// Exact per-image ground truth, maintained incrementally while painting
// (occlusion decrements the occluded instance), so it never depends on the
// statistics module it serves as oracle for.
struct ImageTruth {
  std::map<LabelId, std::uint64_t> pixel_counts;
  std::vector<std::pair<std::uint32_t, LabelId>> instances;  // alive, by index
  std::map<LabelId, std::uint64_t> part_pixel_counts;
  std::vector<std::pair<std::uint32_t, LabelId>> part_instances;
};

struct SyntheticManifest {
  SyntheticSceneSpec spec;
  std::map<LabelId, std::uint64_t> instance_counts;
  std::map<LabelId, std::uint64_t> pixel_counts;
  std::map<LabelId, std::uint64_t> part_instance_counts;
  std::map<LabelId, std::uint64_t> part_pixel_counts;
  std::vector<PerImageStat> per_image;
  std::vector<std::pair<std::uint32_t, LabelId>> order_log;
};

namespace detail {

inline std::string synth_image_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "syn_%06zu", index);
  return buf;
}

// deterministic pseudo-color per label
inline Rgb label_color(LabelId label) {
  std::uint64_t x = 0x9E3779B97F4A7C15ull * (label + 1);
  x ^= x >> 29;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 32;
  return Rgb{std::uint8_t(x), std::uint8_t(x >> 8), std::uint8_t(x >> 16)};
}

}  // namespace detail

class SyntheticGenerator {
 public:
  explicit SyntheticGenerator(SyntheticSceneSpec spec)
      : spec_(spec), sampler_(spec.vocabulary, spec.zipf_exponent) {
    spec_.validate();
  }

  const SyntheticSceneSpec& spec() const { return spec_; }

  // Vocabulary: ids 1..V are scene classes (leading block stuff, the rest
  // objects), then P part classes attachable to every object class. Object
  // classes additionally hang under synthetic group nodes so hypernym
  // merging has structure to work with.
  Taxonomy make_taxonomy() const {
    Taxonomy t;
    std::size_t stuff = spec_.stuff_classes();
    char name[32];
    for (std::size_t i = 1; i <= spec_.vocabulary; ++i) {
      if (i <= stuff) {
        std::snprintf(name, sizeof name, "stuff_%03zu", i);
        t.intern(name, MacroClass::Stuff);
      } else {
        std::snprintf(name, sizeof name, "object_%03zu", i);
        t.intern(name, MacroClass::Object);
      }
    }
    std::vector<LabelId> parts;
    for (std::size_t i = 0; i < spec_.part_classes; ++i) {
      std::snprintf(name, sizeof name, "part_%03zu", i + 1);
      parts.push_back(t.intern(name, MacroClass::Part));
    }
    for (LabelId part : parts) {
      for (std::size_t i = stuff + 1; i <= spec_.vocabulary; ++i) {
        t.add_part_parent(part, LabelId(i));
      }
    }
    // group nodes over blocks of ten object classes
    std::size_t objects = spec_.vocabulary - stuff;
    for (std::size_t g = 0; g * 10 < objects; ++g) {
      std::snprintf(name, sizeof name, "object_group_%03zu", g + 1);
      LabelId group = t.intern(name, MacroClass::Object);
      for (std::size_t j = 0; j < 10; ++j) {
        std::size_t index = g * 10 + j;
        if (index >= objects) break;
        t.set_hypernym(LabelId(stuff + 1 + index), group);
      }
    }
    t.freeze();
    return t;
  }

  StreamSpec make_stream_spec() const {
    Taxonomy t = make_taxonomy();
    std::vector<LabelId> benchmark;
    for (std::size_t i = 1; i <= spec_.vocabulary; ++i) benchmark.push_back(LabelId(i));
    return StreamSpec::from_taxonomy(t, benchmark);
  }

  SyntheticImage generate(std::size_t index, ImageTruth* truth = nullptr) const {
    if (index >= spec_.images) throw ValidationError("image index out of range");
    Rng rng(spec_.seed * 0x9E3779B97F4A7C15ull + index + 1);
    std::size_t g = spec_.grid;
    std::size_t stuff = spec_.stuff_classes();

    ImageRecord record;
    record.id = detail::synth_image_id(index);
    record.scene = "scene_" + std::to_string(rng.below(spec_.scene_categories));
    record.labels = LabelMask(g, g, kVoidLabel);
    record.instances = InstanceMap(g, g, 0);

    bool with_parts = spec_.part_classes > 0 && spec_.part_probability > 0;
    PartLevel part_level;
    if (with_parts) {
      part_level.labels = LabelMask(g, g, kVoidLabel);
      part_level.instances = InstanceMap(g, g, 0);
    }

    // paint-time bookkeeping: occlusion decrements whatever it covers
    std::map<LabelId, std::uint64_t> label_pixels;
    std::vector<std::uint64_t> instance_pixels;   // by instance index, 0 unused
    std::vector<LabelId> instance_labels;
    std::map<LabelId, std::uint64_t> part_label_pixels;
    std::vector<std::uint64_t> part_instance_pixels;
    std::vector<LabelId> part_instance_labels;

    auto paint_scene = [&](std::size_t r, std::size_t c, LabelId label,
                           std::uint32_t inst) {
      LabelId old_label = record.labels(r, c);
      std::uint32_t old_inst = record.instances(r, c);
      if (old_label != kVoidLabel) --label_pixels[old_label];
      if (old_inst != 0) --instance_pixels[old_inst];
      if (with_parts && part_level.labels(r, c) != kVoidLabel) {
        // the covered pixel's part annotation belonged to the occluded host
        --part_label_pixels[part_level.labels(r, c)];
        --part_instance_pixels[part_level.instances(r, c)];
        part_level.labels(r, c) = kVoidLabel;
        part_level.instances(r, c) = 0;
      }
      record.labels(r, c) = label;
      record.instances(r, c) = inst;
      ++label_pixels[label];
      if (inst != 0) ++instance_pixels[inst];
    };

    // stuff background bands (instance 0) guarantee full coverage
    std::size_t bands = rng.range(2, 4);
    bool horizontal = rng.bernoulli(0.5);
    std::vector<std::size_t> cuts = {0};
    for (std::size_t b = 1; b < bands; ++b) cuts.push_back(rng.range(1, g - 1));
    cuts.push_back(g);
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
      LabelId band_label = LabelId(rng.range(1, stuff));
      for (std::size_t axis = cuts[b]; axis < cuts[b + 1]; ++axis) {
        for (std::size_t other = 0; other < g; ++other) {
          std::size_t r = horizontal ? axis : other;
          std::size_t c = horizontal ? other : axis;
          paint_scene(r, c, band_label, 0);
        }
      }
    }

    // Zipf-sampled instances; later shapes occlude earlier ones
    std::size_t count = rng.range(spec_.min_instances, spec_.max_instances);
    instance_pixels.assign(count + 1, 0);
    instance_labels.assign(count + 1, kVoidLabel);
    for (std::uint32_t inst = 1; inst <= count; ++inst) {
      LabelId label = LabelId(sampler_.sample(rng));
      instance_labels[inst] = label;
      std::size_t max_extent = std::max<std::size_t>(g / 4, 2);
      std::size_t min_extent = std::max<std::size_t>(g / 16, 1);
      std::size_t height = rng.range(min_extent, max_extent);
      std::size_t width = rng.range(min_extent, max_extent);
      std::size_t top = rng.below(g - height + 1);
      std::size_t left = rng.below(g - width + 1);
      bool ellipse = rng.bernoulli(0.5);
      double cy = double(top) + double(height - 1) / 2.0;
      double cx = double(left) + double(width - 1) / 2.0;
      double ry = std::max(double(height) / 2.0, 0.5);
      double rx = std::max(double(width) / 2.0, 0.5);
      for (std::size_t r = top; r < top + height; ++r) {
        for (std::size_t c = left; c < left + width; ++c) {
          if (ellipse) {
            double dy = (double(r) - cy) / ry;
            double dx = (double(c) - cx) / rx;
            if (dy * dy + dx * dx > 1.0) continue;
          }
          paint_scene(r, c, label, inst);
        }
      }
      if (with_parts && label > stuff && rng.bernoulli(spec_.part_probability)) {
        LabelId part = LabelId(spec_.vocabulary + 1 + rng.below(spec_.part_classes));
        std::uint32_t part_inst = std::uint32_t(part_instance_pixels.size());
        if (part_instance_pixels.empty()) {
          part_instance_pixels.push_back(0);  // index 0 unused
          part_instance_labels.push_back(kVoidLabel);
          part_inst = 1;
        }
        part_instance_pixels.push_back(0);
        part_instance_labels.push_back(part);
        // centered sub-rectangle at half extent
        std::size_t ph = std::max<std::size_t>(height / 2, 1);
        std::size_t pw = std::max<std::size_t>(width / 2, 1);
        std::size_t pt = top + (height - ph) / 2;
        std::size_t pl = left + (width - pw) / 2;
        for (std::size_t r = pt; r < pt + ph; ++r) {
          for (std::size_t c = pl; c < pl + pw; ++c) {
            if (record.instances(r, c) != inst) continue;
            if (part_level.labels(r, c) != kVoidLabel) {
              --part_label_pixels[part_level.labels(r, c)];
              --part_instance_pixels[part_level.instances(r, c)];
            }
            part_level.labels(r, c) = part;
            part_level.instances(r, c) = part_inst;
            ++part_label_pixels[part];
            ++part_instance_pixels[part_inst];
          }
        }
      }
    }
    if (with_parts) record.parts.push_back(std::move(part_level));

    if (truth != nullptr) {
      truth->pixel_counts.clear();
      truth->instances.clear();
      truth->part_pixel_counts.clear();
      truth->part_instances.clear();
      for (const auto& [label, n] : label_pixels) {
        if (n > 0) truth->pixel_counts[label] = n;
      }
      for (std::uint32_t inst = 1; inst < instance_pixels.size(); ++inst) {
        if (instance_pixels[inst] > 0) {
          truth->instances.emplace_back(inst, instance_labels[inst]);
        }
      }
      for (const auto& [label, n] : part_label_pixels) {
        if (n > 0) truth->part_pixel_counts[label] = n;
      }
      for (std::uint32_t inst = 1; inst < part_instance_pixels.size(); ++inst) {
        if (part_instance_pixels[inst] > 0) {
          truth->part_instances.emplace_back(inst, part_instance_labels[inst]);
        }
      }
    }

    SyntheticImage out;
    out.photo = render(record);
    out.record = std::move(record);
    return out;
  }

  SyntheticManifest generate_all(
      const std::function<void(const SyntheticImage&)>& sink = {}) const {
    SyntheticManifest manifest;
    manifest.spec = spec_;
    for (std::size_t i = 0; i < spec_.images; ++i) {
      ImageTruth truth;
      SyntheticImage image = generate(i, &truth);
      PerImageStat stat;
      stat.id = image.record.id;
      stat.instances = truth.instances.size();
      stat.distinct_classes = truth.pixel_counts.size();
      stat.part_instances = truth.part_instances.size();
      stat.part_classes = truth.part_pixel_counts.size();
      manifest.per_image.push_back(std::move(stat));
      for (const auto& [label, n] : truth.pixel_counts) {
        manifest.pixel_counts[label] += n;
      }
      for (const auto& [inst, label] : truth.instances) {
        ++manifest.instance_counts[label];
        manifest.order_log.emplace_back(inst, label);
      }
      for (const auto& [label, n] : truth.part_pixel_counts) {
        manifest.part_pixel_counts[label] += n;
      }
      for (const auto& [inst, label] : truth.part_instances) {
        ++manifest.part_instance_counts[label];
      }
      if (sink) sink(image);
    }
    return manifest;
  }

 private:
  RgbImage render(const ImageRecord& record) const {
    RgbImage photo(record.labels.height(), record.labels.width());
    for (std::size_t i = 0; i < photo.size(); ++i) {
      photo[i] = detail::label_color(record.labels[i]);
    }
    return photo;
  }

  SyntheticSceneSpec spec_;
  ZipfSampler sampler_;
};

inline nlohmann::json manifest_to_json(const SyntheticManifest& m) {
  auto count_rows = [](const std::map<LabelId, std::uint64_t>& map) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [label, count] : map) rows.push_back({label, count});
    return rows;
  };
  nlohmann::json per_image = nlohmann::json::array();
  for (const PerImageStat& s : m.per_image) {
    per_image.push_back({{"id", s.id},
                         {"instances", s.instances},
                         {"classes", s.distinct_classes},
                         {"part_instances", s.part_instances},
                         {"part_classes", s.part_classes}});
  }
  nlohmann::json order_log = nlohmann::json::array();
  for (const auto& [inst, label] : m.order_log) order_log.push_back({inst, label});
  return nlohmann::json{
      {"schema_version", kSchemaVersion},
      {"spec",
       {{"grid", m.spec.grid},
        {"vocabulary", m.spec.vocabulary},
        {"zipf_exponent", json_number(m.spec.zipf_exponent)},
        {"min_instances", m.spec.min_instances},
        {"max_instances", m.spec.max_instances},
        {"stuff_ratio", json_number(m.spec.stuff_ratio)},
        {"part_probability", json_number(m.spec.part_probability)},
        {"part_classes", m.spec.part_classes},
        {"scene_categories", m.spec.scene_categories},
        {"images", m.spec.images},
        {"seed", m.spec.seed}}},
      {"images", m.spec.images},
      {"instance_counts", count_rows(m.instance_counts)},
      {"pixel_counts", count_rows(m.pixel_counts)},
      {"part_instance_counts", count_rows(m.part_instance_counts)},
      {"part_pixel_counts", count_rows(m.part_pixel_counts)},
      {"per_image", per_image},
      {"order_log", order_log}};
}

}  // namespace spk
