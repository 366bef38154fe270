#pragma once

#include <random>

#include "qlimit/phase_point.hpp"

namespace test_support {

// Phase points with |x|, |p| <= r.
struct PointGen {
  std::mt19937 rng;
  double r;
  PointGen(unsigned seed, double radius) : rng(seed), r(radius) {}
  qlimit::Point operator()() {
    std::uniform_real_distribution<double> u(-r, r);
    const double x = u(rng);
    return {x, u(rng)};
  }
};

}  // namespace test_support
