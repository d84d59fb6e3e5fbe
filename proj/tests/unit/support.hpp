#pragma once

#include <cmath>
#include <cstdint>

#include "mzo/problems.hpp"
#include "mzo/stats.hpp"

namespace testing {

inline std::shared_ptr<const mzo::Problem> quadratic(std::size_t d) {
  mzo::ProblemSpec spec;
  spec.dim = d;
  return mzo::make_problem(spec);
}

inline bool within(double value, double expected, double se, double k = 3.0) {
  return std::abs(value - expected) <= k * se + 1e-15;
}

}  // namespace testing
