#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spk/common.hpp"
#include "spk/maskio.hpp"
#include "spk/record.hpp"

namespace spk {

// On-disk corpus layout shared by `synth`, `import-ade20k`, `stats`, and
// `consistency`:
//   <id>_seg.pgm            scene labels
//   <id>_inst.pgm           scene instances
//   <id>_part<L>_seg.pgm    part level L labels (L starts at 1)
//   <id>_part<L>_inst.pgm
//   <id>.ppm                rendered photo (optional)
//   scenes.tsv              id<TAB>scene rows (optional)

inline void write_record(const std::filesystem::path& dir,
                         const ImageRecord& record) {
  write_mask_file(dir / (record.id + "_seg.pgm"), record.labels);
  write_mask_file(dir / (record.id + "_inst.pgm"), record.instances);
  for (std::size_t level = 0; level < record.parts.size(); ++level) {
    std::string stem = record.id + "_part" + std::to_string(level + 1);
    write_mask_file(dir / (stem + "_seg.pgm"), record.parts[level].labels);
    write_mask_file(dir / (stem + "_inst.pgm"), record.parts[level].instances);
  }
}

inline std::vector<std::string> list_corpus_ids(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::exists(dir)) throw IoError("corpus directory " + dir.string() + " does not exist");
  std::vector<std::string> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string name = entry.path().filename().string();
    if (name.size() > 8 && name.ends_with("_seg.pgm") &&
        name.find("_part") == std::string::npos) {
      ids.push_back(name.substr(0, name.size() - 8));
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::map<std::string, std::string> load_scenes(
    const std::filesystem::path& dir) {
  std::map<std::string, std::string> scenes;
  std::ifstream in(dir / "scenes.tsv");
  if (!in) return scenes;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError("scenes.tsv row without a tab: " + line);
    }
    scenes[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return scenes;
}

inline void save_scenes(const std::filesystem::path& dir,
                        const std::map<std::string, std::string>& scenes) {
  std::string text;
  for (const auto& [id, scene] : scenes) text += id + "\t" + scene + "\n";
  write_text_file(dir / "scenes.tsv", text);
}

inline ImageRecord read_record(
    const std::filesystem::path& dir, const std::string& id,
    const std::map<std::string, std::string>& scenes = {}) {
  namespace fs = std::filesystem;
  ImageRecord record;
  record.id = id;
  if (auto it = scenes.find(id); it != scenes.end()) record.scene = it->second;
  record.labels = read_mask_file(dir / (id + "_seg.pgm"));
  fs::path inst_path = dir / (id + "_inst.pgm");
  if (fs::exists(inst_path)) {
    record.instances = read_mask_file(inst_path);
    if (!record.instances.same_shape(record.labels)) {
      throw ValidationError(id + ": instance map shape differs from labels");
    }
  } else {
    record.instances = InstanceMap(record.labels.height(), record.labels.width(), 0);
  }
  for (std::size_t level = 1;; ++level) {
    std::string stem = id + "_part" + std::to_string(level);
    fs::path seg = dir / (stem + "_seg.pgm");
    if (!fs::exists(seg)) break;
    PartLevel part;
    part.labels = read_mask_file(seg);
    fs::path inst = dir / (stem + "_inst.pgm");
    if (fs::exists(inst)) {
      part.instances = read_mask_file(inst);
    } else {
      part.instances = InstanceMap(part.labels.height(), part.labels.width(), 0);
    }
    record.parts.push_back(std::move(part));
  }
  return record;
}

// Checks mask labels against a dictionary size; id 0 stays legal.
inline void check_labels(const LabelMask& mask, std::size_t dictionary_size,
                         const std::string& what) {
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i] >= dictionary_size) {
      throw ValidationError(what + ": label " + std::to_string(mask[i]) +
                            " at flat index " + std::to_string(i) +
                            " outside dictionary of size " +
                            std::to_string(dictionary_size));
    }
  }
}

}  // namespace spk
