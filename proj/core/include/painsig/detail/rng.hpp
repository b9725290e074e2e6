#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace painsig::detail {

// Deterministic random source. std::mt19937's raw output sequence is fixed by
// the standard, but the standard *distributions* are not, so every mapping
// from raw draws to samples is spelled out here. Two builds on any platform
// produce identical streams for the same seed.
class Rng {
 public:
  explicit Rng(std::uint32_t seed) : gen_(seed) {}

  std::uint32_t raw() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_()) * kInv32; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; caches the second value of each pair.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite.
    double u1 = (static_cast<double>(gen_()) + 1.0) * kInv32;
    double u2 = static_cast<double>(gen_()) * kInv32;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) by rejection, bias-free.
  std::uint32_t bounded(std::uint32_t n) {
    if (n == 0) return 0;
    std::uint64_t span = 0x100000000ull;
    std::uint32_t limit = static_cast<std::uint32_t>(span - span % n);
    std::uint32_t x = gen_();
    while (limit != 0 && x >= limit) x = gen_();
    return x % n;
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.size() < 2) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::size_t j = bounded(static_cast<std::uint32_t>(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  static constexpr double kInv32 = 1.0 / 4294967296.0;
  static constexpr double kPi = 3.14159265358979323846;

  std::mt19937 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace painsig::detail
