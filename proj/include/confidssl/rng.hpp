#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace confidssl {

// Seeded generator with explicit draw algorithms on top of mt19937_64, whose
// output sequence is pinned by the standard. Avoids std::*_distribution so
// runs reproduce bit-for-bit regardless of standard library. State round-trips
// through save_state()/load_state() for checkpoint resume.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. No cached spare: two uniforms per call,
  // which keeps the generator the only state a checkpoint has to carry.
  double normal();

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_index(std::uint64_t n);

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string save_state() const;
  void load_state(const std::string& s);

 private:
  std::mt19937_64 gen_;
};

}  // namespace confidssl
