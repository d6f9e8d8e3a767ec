#pragma once

#include <string>
#include <vector>

#include "spk/grid.hpp"

namespace spk {

// One part-annotation level: level 0 holds parts of scene objects, level 1
// parts of parts, and so on.
struct PartLevel {
  LabelMask labels;
  InstanceMap instances;
};

// One annotated image as produced by the importer or the synthetic
// generator and consumed by the statistics and consistency pipelines.
struct ImageRecord {
  std::string id;
  std::string scene;  // scene category, may be empty
  LabelMask labels;
  InstanceMap instances;
  std::vector<PartLevel> parts;
};

}  // namespace spk
