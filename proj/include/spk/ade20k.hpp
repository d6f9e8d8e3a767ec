#pragma once

#include <algorithm>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/maskio.hpp"
#include "spk/record.hpp"

namespace spk {

// Import adapter for the public ADE20K release layout:
//
//   <root>/images/<split>/<letter>/<scene>/<id>.jpg
//                                          <id>_seg.ppm
//                                          <id>_seg_parts_<L>.ppm
//
// Segmentation rasters use the release's channel packing: the class index
// is (R / 10) * 256 + G and the instance identity is the B channel. The
// release ships these rasters as PNG; this toolkit parses only PNM rasters,
// so they must be converted to PPM first (a lossless byte-for-byte channel
// copy, e.g. `magick in.png out.ppm`). The packing convention comes from
// the dataset distribution, not the paper, and lives behind this adapter
// only.
//
// Records stream one at a time in lexicographic path order; two scans of
// the same tree yield identical sequences.

struct Ade20kOptions {
  bool strict = true;  // abort on a bad record instead of skip-with-log
};

struct Ade20kError {
  std::filesystem::path path;
  std::string message;
};

namespace detail {

inline LabelId ade_class_of(const Rgb& px) {
  return LabelId(px.r / 10) * 256 + px.g;
}

}  // namespace detail

inline void decode_ade20k_raster(const RgbImage& raster, LabelMask& labels,
                                 InstanceMap& instances) {
  labels = LabelMask(raster.height(), raster.width());
  instances = InstanceMap(raster.height(), raster.width());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    labels[i] = detail::ade_class_of(raster[i]);
    instances[i] = labels[i] == kVoidLabel ? 0 : raster[i].b;
  }
}

class Ade20kImporter {
 public:
  explicit Ade20kImporter(const std::filesystem::path& root,
                          Ade20kOptions options = {})
      : options_(options) {
    namespace fs = std::filesystem;
    if (!fs::exists(root)) {
      throw IoError("ADE20K root " + root.string() + " does not exist");
    }
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (!entry.is_regular_file()) continue;
      std::string name = entry.path().filename().string();
      if (name.size() > 8 && name.ends_with("_seg.ppm")) {
        seg_paths_.push_back(entry.path());
      }
    }
    std::sort(seg_paths_.begin(), seg_paths_.end());
  }

  std::size_t discovered() const { return seg_paths_.size(); }
  const std::vector<Ade20kError>& errors() const { return errors_; }

  // Next record, or nullopt at end of stream. Only one record is resident
  // at a time.
  std::optional<ImageRecord> next() {
    namespace fs = std::filesystem;
    while (cursor_ < seg_paths_.size()) {
      const fs::path& seg_path = seg_paths_[cursor_++];
      try {
        ImageRecord record;
        std::string stem = seg_path.filename().string();
        record.id = stem.substr(0, stem.size() - 8);  // strip "_seg.ppm"
        record.scene = seg_path.parent_path().filename().string();
        decode_ade20k_raster(read_image(read_file(seg_path)), record.labels,
                             record.instances);
        for (std::size_t level = 1;; ++level) {
          fs::path part_path = seg_path.parent_path() /
                               (record.id + "_seg_parts_" +
                                std::to_string(level) + ".ppm");
          if (!fs::exists(part_path)) break;
          PartLevel part;
          decode_ade20k_raster(read_image(read_file(part_path)), part.labels,
                               part.instances);
          if (!part.labels.same_shape(record.labels)) {
            throw ValidationError("part level " + std::to_string(level) +
                                  " dimensions differ from the scene raster");
          }
          record.parts.push_back(std::move(part));
        }
        return record;
      } catch (const Error& e) {
        if (options_.strict) throw;
        errors_.push_back({seg_path, e.what()});
      }
    }
    return std::nullopt;
  }

  void for_each(const std::function<void(const ImageRecord&)>& fn) {
    while (auto record = next()) fn(*record);
  }

 private:
  Ade20kOptions options_;
  std::vector<std::filesystem::path> seg_paths_;
  std::size_t cursor_ = 0;
  std::vector<Ade20kError> errors_;
};

}  // namespace spk
