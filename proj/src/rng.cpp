#include "confidssl/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace confidssl {

double Rng::normal() {
  // 1 - uniform() lies in (0, 1], so the log stays finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Reject draws below 2^64 mod n; what remains is an exact multiple of n.
  const std::uint64_t rem = (0 - n) % n;
  std::uint64_t x = gen_();
  while (x < rem) x = gen_();
  return x % n;
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << gen_;
  return os.str();
}

void Rng::load_state(const std::string& s) {
  std::istringstream is(s);
  is >> gen_;
  if (is.fail()) throw std::invalid_argument("Rng::load_state: malformed state string");
}

}  // namespace confidssl
