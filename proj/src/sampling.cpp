#include "mzo/sampling.hpp"

#include <cmath>
#include <random>

#include <boost/random/normal_distribution.hpp>

namespace mzo {

void sample_sphere_into(Vector& out, std::size_t d, Rng& rng) {
  if (d == 0) throw UsageError("sample_sphere: dimension must be positive");
  out.resize(static_cast<Eigen::Index>(d));
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  double norm_sq = 0.0;
  do {
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = normal(rng);
    norm_sq = out.squaredNorm();
  } while (norm_sq < 1e-200);
  out /= std::sqrt(norm_sq);
}

Vector sample_sphere(std::size_t d, Rng& rng) {
  Vector e;
  sample_sphere_into(e, d, rng);
  return e;
}

Vector sample_ball(std::size_t d, Rng& rng) {
  Vector r = sample_sphere(d, rng);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  r *= std::pow(uniform(rng), 1.0 / static_cast<double>(d));
  return r;
}

unsigned sample_level(Rng& rng) {
  std::geometric_distribution<unsigned> failures(0.5);
  return failures(rng) + 1;
}

}  // namespace mzo
