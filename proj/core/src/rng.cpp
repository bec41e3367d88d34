// Copyright 2026 The dnas Authors
// SPDX-License-Identifier: Apache-2.0

#include "dnas/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "dnas/error.hpp"

namespace dnas {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_open() {
  return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw InvariantError("uniform_int: empty range");
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = uniform_open();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double a = 2.0 * std::numbers::pi * u2;
  spare_normal_ = r * std::sin(a);
  has_spare_normal_ = true;
  return r * std::cos(a);
}

double Rng::gumbel() { return -std::log(-std::log(uniform_open())); }

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_ << ' ' << (has_spare_normal_ ? 1 : 0) << ' ';
  os.precision(17);
  os << spare_normal_;
  return os.str();
}

void Rng::restore(const std::string& state) {
  std::istringstream is(state);
  int spare = 0;
  is >> engine_ >> spare >> spare_normal_;
  if (!is) throw ConfigError("malformed RNG state");
  has_spare_normal_ = spare != 0;
}

}  // namespace dnas
