// Builds a tiny synthetic scene, runs the cascade fusion math on ideal
// score maps, and prints the resulting metrics.

#include <cmath>
#include <iostream>

#include "spk/spk.hpp"

using namespace spk;

int main() {
  SyntheticSceneSpec spec;
  spec.grid = 64;
  spec.vocabulary = 12;
  spec.images = 1;
  spec.part_classes = 0;
  spec.seed = 7;
  SyntheticGenerator generator(spec);
  SyntheticImage image = generator.generate(0);
  StreamSpec streams = generator.make_stream_spec();

  // ideal-but-soft score maps peaked at the ground truth
  auto [stuff_targets_grid, stuff_ignore] = stuff_targets(image.record.labels, streams);
  auto [object_targets_grid, object_ignore] = object_targets(image.record.labels, streams);
  ScoreMap stuff(spec.grid, spec.grid, streams.stuff_channel_count(), 0.05f);
  ScoreMap objects(spec.grid, spec.grid, streams.object_channel_count(), 0.05f);
  for (std::size_t r = 0; r < spec.grid; ++r) {
    for (std::size_t c = 0; c < spec.grid; ++c) {
      if (!stuff_ignore(r, c)) stuff.at(r, c, stuff_targets_grid(r, c)) = 1.0f;
      if (!object_ignore(r, c)) objects.at(r, c, object_targets_grid(r, c)) = 1.0f;
      auto normalize = [](std::span<float> px) {
        float sum = 0;
        for (float v : px) sum += v;
        for (float& v : px) v /= sum;
      };
      normalize(stuff.pixel(r, c));
      normalize(objects.pixel(r, c));
    }
  }
  stuff.set_normalized(true);
  objects.set_normalized(true);

  LabelMask fused = fuse_scene(stuff, objects, streams, FusionMode::Hard);
  ConfusionMatrix cm(spec.vocabulary);
  accumulate(cm, image.record.labels, fused,
             LabelRemap::identity(spec.vocabulary + 1));
  MetricsReport report = build_report(cm);
  std::cout << "fused a " << spec.grid << "x" << spec.grid << " scene\n"
            << "pixel accuracy: " << report.pixel_accuracy.value_or(0) << "\n"
            << "mean IoU:       " << report.mean_iou.value_or(0) << "\n";
  return 0;
}
