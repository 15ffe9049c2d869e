#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "blab/errors.hpp"

namespace blab {

// SplitMix64 finalizer (Steele, Lea & Flood 2014). Used only for seed
// derivation; bulk draws come from std::mt19937_64, whose output sequence is
// fixed by the standard.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed for stream `index` under `master`. Trials, restarts and sweep points
// each get their own stream so results do not depend on execution order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits; avoids the implementation-defined
  // std::uniform_real_distribution so draws are identical across toolchains.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// Walker/Vose alias table for O(1) categorical draws.
class AliasTable {
 public:
  explicit AliasTable(std::span<const double> weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw ValidationError("AliasTable: empty weight vector");
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw InvalidDistribution("AliasTable: negative or NaN weight");
      total += w;
    }
    if (!(total > 0.0)) throw InvalidDistribution("AliasTable: weights sum to zero");

    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / total;
      (scaled[i] < 1.0 ? small : large).push_back(i);
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    // Leftovers are 1 up to rounding.
    for (std::size_t i : large) prob_[i] = 1.0;
    for (std::size_t i : small) prob_[i] = weights[i] > 0.0 ? 1.0 : 0.0;
  }

  std::size_t size() const noexcept { return prob_.size(); }

  std::size_t draw(Rng& rng) const {
    const std::uint64_t bits = rng.next();
    const std::size_t column = static_cast<std::size_t>((bits >> 32) * prob_.size() >> 32);
    const double u = static_cast<double>(bits & 0xffffffffULL) * 0x1.0p-32;
    return u < prob_[column] ? column : alias_[column];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

}  // namespace blab
