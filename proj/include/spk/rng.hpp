#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spk/common.hpp"

namespace spk {

// mt19937_64 with hand-rolled draws. The standard pins the engine's output
// but not the distributions, so sampling goes through these helpers to keep
// generated corpora byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // unbiased integer in [0, bound)
  std::uint64_t below(std::uint64_t bound) {
    if (bound == 0) throw ValidationError("rng bound must be positive");
    std::uint64_t threshold = (~bound + 1) % bound;  // 2^64 mod bound
    while (true) {
      std::uint64_t x = engine_();
      if (x >= threshold) return x % bound;
    }
  }

  std::uint64_t range(std::uint64_t lo, std::uint64_t hi) {  // inclusive
    return lo + below(hi - lo + 1);
  }

  // uniform in [0, 1) with 53 random bits
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

// Samples ranks 1..N with P(rank r) proportional to r^-s via a cumulative
// table and binary search.
class ZipfSampler {
 public:
  ZipfSampler(std::size_t ranks, double exponent) : cumulative_(ranks) {
    if (ranks == 0) throw ValidationError("zipf sampler needs at least one rank");
    double sum = 0.0;
    for (std::size_t r = 0; r < ranks; ++r) {
      sum += std::pow(double(r + 1), -exponent);
      cumulative_[r] = sum;
    }
    for (double& v : cumulative_) v /= sum;
    cumulative_.back() = 1.0;
  }

  // returns a rank in 1..N
  std::size_t sample(Rng& rng) const {
    double u = rng.uniform();
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] <= u) {
        lo = mid + 1;
      } else {
        hi = mid;
      }
    }
    return lo + 1;
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace spk
