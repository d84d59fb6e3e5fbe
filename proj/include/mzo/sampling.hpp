#pragma once

#include <cstdint>

#include "mzo/common.hpp"

namespace mzo {

/// Uniform direction on the unit sphere in R^d (normalized Gaussian).
Vector sample_sphere(std::size_t d, Rng& rng);

/// Writes a uniform unit direction into `out` (resized to d) without allocating
/// when `out` already has the right size.
void sample_sphere_into(Vector& out, std::size_t d, Rng& rng);

/// Uniform point in the unit ball: a sphere direction scaled by U^(1/d).
Vector sample_ball(std::size_t d, Rng& rng);

/// Level J ~ Geom(1/2) on {1, 2, ...}: P(J = j) = 2^-j.
unsigned sample_level(Rng& rng);

}  // namespace mzo
