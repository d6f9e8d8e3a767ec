#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "spk/cascade.hpp"
#include "spk/common.hpp"
#include "spk/grid.hpp"
#include "spk/maskio.hpp"

namespace spk {

struct RemovalRequest {
  std::set<LabelId> targets;
  double threshold = 0.5;      // score cut, open interval (0, 1)
  std::size_t dilation = 3;    // 8-connected dilation iterations
};

// One 8-connected dilation pass per iteration.
inline ByteMask dilate(const ByteMask& mask, std::size_t iterations) {
  ByteMask cur = mask;
  for (std::size_t it = 0; it < iterations; ++it) {
    ByteMask next = cur;
    for (std::size_t r = 0; r < cur.height(); ++r) {
      for (std::size_t c = 0; c < cur.width(); ++c) {
        if (next(r, c)) continue;
        for (int dr = -1; dr <= 1 && !next(r, c); ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            std::int64_t nr = std::int64_t(r) + dr;
            std::int64_t nc = std::int64_t(c) + dc;
            if (nr < 0 || nc < 0 || nr >= std::int64_t(cur.height()) ||
                nc >= std::int64_t(cur.width())) {
              continue;
            }
            if (cur(std::size_t(nr), std::size_t(nc))) {
              next(r, c) = 1;
              break;
            }
          }
        }
      }
    }
    cur = std::move(next);
  }
  return cur;
}

// Region to remove: the union over target labels of pixels whose predicted
// score reaches the threshold, dilated to cover soft object boundaries.
// `channel_labels` names the object-score channel order.
template <typename T>
ByteMask removal_mask(const ScoreGrid<T>& object_scores,
                      const std::vector<LabelId>& channel_labels,
                      const RemovalRequest& request) {
  if (channel_labels.size() != object_scores.channels()) {
    throw ValidationError("channel label list does not match score channels");
  }
  if (request.threshold <= 0.0 || request.threshold >= 1.0) {
    throw ValidationError("removal threshold must lie in (0, 1)");
  }
  std::vector<std::size_t> channels;
  for (LabelId target : request.targets) {
    auto it = std::find(channel_labels.begin(), channel_labels.end(), target);
    if (it == channel_labels.end()) {
      throw ValidationError("target label " + std::to_string(target) +
                            " has no score channel");
    }
    channels.push_back(std::size_t(it - channel_labels.begin()));
  }
  ByteMask mask(object_scores.height(), object_scores.width(), 0);
  for (std::size_t r = 0; r < mask.height(); ++r) {
    for (std::size_t c = 0; c < mask.width(); ++c) {
      for (std::size_t ch : channels) {
        if (double(object_scores.at(r, c, ch)) >= request.threshold) {
          mask(r, c) = 1;
          break;
        }
      }
    }
  }
  return dilate(mask, request.dilation);
}

inline constexpr std::size_t kDefaultInpaintIterations = 2000;
inline constexpr double kInpaintConvergence = 0.5;  // intensity levels

// Iterative diffusion fill: every hole pixel is repeatedly replaced by the
// mean of its filled 4-neighbors (row-major sweeps, in place, so pixels
// filled earlier in a sweep seed later ones) until the largest per-sweep
// change drops below half an intensity level or the iteration cap hits.
// Pixels outside the hole come back bit-identical.
inline RgbImage inpaint(const RgbImage& image, const ByteMask& hole,
                        std::size_t max_iterations = kDefaultInpaintIterations) {
  if (image.height() != hole.height() || image.width() != hole.width()) {
    throw ValidationError("image and hole mask shapes differ");
  }
  std::size_t hole_pixels = 0;
  for (std::size_t i = 0; i < hole.size(); ++i) hole_pixels += hole[i] ? 1 : 0;
  if (hole_pixels == image.size()) {
    throw ValidationError("hole covers the entire image; nothing to diffuse from");
  }
  if (hole_pixels == 0) return image;

  std::size_t h = image.height(), w = image.width();
  std::vector<std::array<double, 3>> values(image.size());
  std::vector<std::uint8_t> filled(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    values[i] = {double(image[i].r), double(image[i].g), double(image[i].b)};
    filled[i] = hole[i] ? 0 : 1;
  }
  auto neighbor = [&](std::size_t r, std::size_t c, int dr, int dc,
                      std::size_t& out) {
    std::int64_t nr = std::int64_t(r) + dr;
    std::int64_t nc = std::int64_t(c) + dc;
    if (nr < 0 || nc < 0 || nr >= std::int64_t(h) || nc >= std::int64_t(w)) {
      return false;
    }
    out = std::size_t(nr) * w + std::size_t(nc);
    return true;
  };
  for (std::size_t it = 0; it < max_iterations; ++it) {
    double max_delta = 0.0;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        std::size_t i = r * w + c;
        if (!hole[i]) continue;
        std::array<double, 3> sum = {0, 0, 0};
        std::size_t count = 0;
        std::size_t n;
        for (auto [dr, dc] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          if (neighbor(r, c, dr, dc, n) && filled[n]) {
            for (int k = 0; k < 3; ++k) sum[k] += values[n][k];
            ++count;
          }
        }
        if (count == 0) continue;  // interior pixel not yet reached
        std::array<double, 3> next = {sum[0] / count, sum[1] / count,
                                      sum[2] / count};
        if (filled[i]) {
          for (int k = 0; k < 3; ++k) {
            max_delta = std::max(max_delta, std::abs(next[k] - values[i][k]));
          }
        } else {
          filled[i] = 1;
          max_delta = 255.0;  // first fill always counts as a change
        }
        values[i] = next;
      }
    }
    if (max_delta < kInpaintConvergence) break;
  }
  RgbImage out = image;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!hole[i]) continue;
    auto clamp = [](double v) {
      return std::uint8_t(std::lround(std::clamp(v, 0.0, 255.0)));
    };
    out[i] = Rgb{clamp(values[i][0]), clamp(values[i][1]), clamp(values[i][2])};
  }
  return out;
}

}  // namespace spk
