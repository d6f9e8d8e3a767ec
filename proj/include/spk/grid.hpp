#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spk/common.hpp"

namespace spk {

// Dense row-major H x W raster.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), data_(height * width, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t row, std::size_t col) {
    return data_[row * width_ + col];
  }
  const T& operator()(std::size_t row, std::size_t col) const {
    return data_[row * width_ + col];
  }

  T& operator[](std::size_t flat) { return data_[flat]; }
  const T& operator[](std::size_t flat) const { return data_[flat]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

using LabelMask = Grid<LabelId>;
using InstanceMap = Grid<std::uint32_t>;
using ByteMask = Grid<std::uint8_t>;

// Dense H x W x C score raster, row-major with the channel index fastest.
// `normalized` records whether per-pixel channel sums were verified to be 1.
template <typename T>
class ScoreGrid {
 public:
  ScoreGrid() = default;
  ScoreGrid(std::size_t height, std::size_t width, std::size_t channels,
            T fill = T{})
      : height_(height),
        width_(width),
        channels_(channels),
        data_(height * width * channels, fill) {}

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(std::size_t row, std::size_t col, std::size_t channel) {
    return data_[(row * width_ + col) * channels_ + channel];
  }
  const T& at(std::size_t row, std::size_t col, std::size_t channel) const {
    return data_[(row * width_ + col) * channels_ + channel];
  }

  std::span<T> pixel(std::size_t row, std::size_t col) {
    return {data_.data() + (row * width_ + col) * channels_, channels_};
  }
  std::span<const T> pixel(std::size_t row, std::size_t col) const {
    return {data_.data() + (row * width_ + col) * channels_, channels_};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool normalized() const { return normalized_; }
  void set_normalized(bool value) { normalized_ = value; }

  bool same_shape(const ScoreGrid& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  friend bool operator==(const ScoreGrid& a, const ScoreGrid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ &&
           a.channels_ == b.channels_ && a.data_ == b.data_;
  }

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
  bool normalized_ = false;
};

using ScoreMap = ScoreGrid<float>;

// Checks that all values are finite and non-negative and, when the grid
// claims to be normalized, that per-pixel sums are within `tolerance` of 1.
// Throws ValidationError naming the first offending flat index.
template <typename T>
void validate_scores(const ScoreGrid<T>& scores, double tolerance = 1e-5) {
  const auto& values = scores.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(static_cast<double>(values[i])) || values[i] < T{0}) {
      throw ValidationError("score map holds a non-finite or negative value at flat index " +
                            std::to_string(i));
    }
  }
  if (!scores.normalized()) return;
  for (std::size_t r = 0; r < scores.height(); ++r) {
    for (std::size_t c = 0; c < scores.width(); ++c) {
      double sum = 0.0;
      for (T v : scores.pixel(r, c)) sum += static_cast<double>(v);
      if (std::abs(sum - 1.0) > tolerance) {
        throw ValidationError("score map flagged normalized but pixel (" +
                              std::to_string(r) + "," + std::to_string(c) +
                              ") sums to " + std::to_string(sum));
      }
    }
  }
}

// Recomputes the normalization flag from the data.
template <typename T>
void revalidate_normalization(ScoreGrid<T>& scores, double tolerance = 1e-5) {
  for (std::size_t r = 0; r < scores.height(); ++r) {
    for (std::size_t c = 0; c < scores.width(); ++c) {
      double sum = 0.0;
      for (T v : scores.pixel(r, c)) sum += static_cast<double>(v);
      if (std::abs(sum - 1.0) > tolerance) {
        scores.set_normalized(false);
        return;
      }
    }
  }
  scores.set_normalized(!scores.empty());
}

// Nearest-neighbor resampling; source pixel chosen by integer truncation so
// the result is identical across platforms.
template <typename T>
Grid<T> resize_nearest(const Grid<T>& src, std::size_t height,
                       std::size_t width) {
  if (src.empty() || height == 0 || width == 0) {
    throw ValidationError("resize_nearest requires non-empty source and target");
  }
  Grid<T> out(height, width);
  for (std::size_t r = 0; r < height; ++r) {
    std::size_t sr = r * src.height() / height;
    for (std::size_t c = 0; c < width; ++c) {
      std::size_t sc = c * src.width() / width;
      out(r, c) = src(sr, sc);
    }
  }
  return out;
}

// Index of the largest value; ties resolve to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace spk
