#include "mzo/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "mzo/parallel.hpp"
#include "mzo/sampling.hpp"

namespace mzo {

namespace {

// Splits reps into a fixed number of chunks so the merged result does not
// depend on the worker count.
template <class Acc, class Fn>
Acc replicate(std::uint64_t reps, const Acc& init, Fn&& fn) {
  const std::size_t chunks = static_cast<std::size_t>(std::min<std::uint64_t>(reps, 64));
  std::vector<Acc> parts(chunks, init);
  parallel_for(chunks, [&](std::size_t c) {
    const std::uint64_t lo = reps * c / chunks;
    const std::uint64_t hi = reps * (c + 1) / chunks;
    for (std::uint64_t r = lo; r < hi; ++r) fn(r, parts[c]);
  });
  Acc out = init;
  for (const auto& p : parts) out.merge(p);
  return out;
}

std::shared_ptr<const Problem> quadratic(std::size_t d) {
  ProblemSpec spec;
  spec.kind = ProblemKind::QuadraticMarkov;
  spec.dim = d;
  return make_problem(spec);
}

std::string fmt(const char* label, double v) {
  std::ostringstream os;
  os << label << v;
  return os.str();
}

double binomial_se(double p, std::uint64_t n) {
  return std::sqrt(std::max(p * (1.0 - p), 0.0) / static_cast<double>(n));
}

// sum_{i=a}^{a+n-1} q^(i-1)
long double geometric_block(long double q, std::uint64_t a, std::uint64_t n) {
  if (q == 0.0L) return a == 1 ? 1.0L : 0.0L;
  return std::pow(q, static_cast<long double>(a - 1)) * (1.0L - std::pow(q, static_cast<long double>(n))) /
         (1.0L - q);
}

// Empirical variance-type quantity as a function of a grid parameter, plus
// its log-log slope.
LinearFit add_slope(MomentReport& r, const std::string& label, const std::vector<double>& xs,
                    const std::vector<double>& ys, double expected, double lo, double hi) {
  const LinearFit fit = loglog_fit(xs, ys);
  r.fitted[label] = fit.slope;
  r.add_row({label, fit.slope, 0.0, expected, fit.slope >= lo && fit.slope <= hi});
  return fit;
}

struct SqAcc {
  VectorStats vec;
  RunningStats sq;
  void merge(const SqAcc& o) {
    vec.merge(o.vec);
    sq.merge(o.sq);
  }
};

}  // namespace

void print_report(std::ostream& os, const MomentReport& report) {
  os << (report.passed ? "[ok]   " : "[FAIL] ") << report.name;
  if (report.reps) os << "  (reps " << report.reps << ")";
  os << '\n';
  const auto prec = os.precision();
  os << std::setprecision(6);
  for (const auto& row : report.rows) {
    os << "    " << (row.ok ? "  " : "! ") << row.label << " = " << row.value;
    if (row.se > 0.0) os << " +/- " << row.se;
    if (!std::isnan(row.reference)) os << "  (ref " << row.reference << ")";
    os << '\n';
  }
  for (const auto& note : report.notes) os << "    # " << note << '\n';
  os.precision(prec);
}

bool within_se(double a, double b, double se, double k) {
  return std::abs(a - b) <= k * se + 1e-12 * std::max(1.0, std::abs(b));
}

// ---- chains ----------------------------------------------------------------

MomentReport check_chain_stationarity(const ChainParams& params, const std::vector<std::uint64_t>& ks,
                                      std::uint64_t reps, std::uint64_t seed) {
  params.validate();
  MomentReport r;
  r.name = "chain stationarity";
  r.reps = reps;
  const double s2 = params.noise_std * params.noise_std;
  for (std::uint64_t k : ks) {
    struct Acc {
      RunningStats first, second;
      void merge(const Acc& o) {
        first.merge(o.first);
        second.merge(o.second);
      }
    };
    const Acc acc = replicate(reps, Acc{}, [&](std::uint64_t rep, Acc& a) {
      ChainState c = new_chain(params, derive_seed(seed, rep));
      for (std::uint64_t i = 0; i < k; ++i) c.advance();
      for (Eigen::Index j = 0; j < c.current().size(); ++j) {
        const double z = c.current()[j];
        a.first.add(z);
        a.second.add(z * z);
      }
    });
    const std::string tag = "k=" + std::to_string(k);
    r.add_row({tag + " mean", acc.first.mean(), acc.first.standard_error(), 0.0,
               within_se(acc.first.mean(), 0.0, acc.first.standard_error())});
    r.add_row({tag + " second moment", acc.second.mean(), acc.second.standard_error(), s2,
               within_se(acc.second.mean(), s2, acc.second.standard_error())});
  }
  return r;
}

MomentReport check_resample_frequency(const ChainParams& params, std::uint64_t steps, std::uint64_t seed) {
  params.validate();
  if (steps == 0) throw ConfigError("resample frequency: steps must be positive");
  ChainState c = new_chain(params, seed);
  for (std::uint64_t i = 0; i < steps; ++i) c.advance();
  const double p = params.resample_probability();
  const double freq = static_cast<double>(c.resamples()) / static_cast<double>(steps);
  MomentReport r;
  r.name = "resample frequency";
  r.reps = steps;
  const double se = binomial_se(p, steps);
  r.add_row({"tau=" + std::to_string(params.tau_hold), freq, se, p, within_se(freq, p, se)});
  return r;
}

MomentReport check_coupling_decay(const ChainParams& params, const std::vector<std::uint64_t>& ks,
                                  std::uint64_t trials, std::uint64_t seed) {
  params.validate();
  MomentReport r;
  r.name = "coupling decay";
  r.reps = trials;
  const Vector a = Vector::Constant(static_cast<Eigen::Index>(params.dim), 1.0);
  const Vector b = Vector::Constant(static_cast<Eigen::Index>(params.dim), -1.0);
  const double q = 1.0 - params.resample_probability();
  for (std::uint64_t k : ks) {
    const RunningStats apart = replicate(trials, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
      const std::uint64_t s = derive_seed(seed, rep);
      ChainState x = new_chain_from(params, a, s);
      ChainState y = new_chain_from(params, b, s);
      for (std::uint64_t i = 0; i < k; ++i) {
        x.advance();
        y.advance();
      }
      acc.add(x.current() == y.current() ? 0.0 : 1.0);
    });
    const double pred = std::pow(q, static_cast<double>(k));
    const double se = binomial_se(pred, trials);
    r.add_row({"P(apart) k=" + std::to_string(k), apart.mean(), se, pred, within_se(apart.mean(), pred, se)});
  }
  return r;
}

// ---- oracle noise ------------------------------------------------------------

MomentReport check_markov_variance(const Oracle& oracle, const Vector& x, const MarkovVarianceConfig& cfg,
                                   std::uint64_t seed) {
  if (cfg.reps < 100) throw ConfigError("markov variance: reps must be >= 100");
  const Problem& prob = oracle.problem();
  prob.check_dim(x);
  const long double f = prob.value(PointView(x));
  MomentReport r;
  r.name = "markov variance";
  r.reps = cfg.reps;

  auto batched = [&](std::uint64_t tau, std::uint64_t n, std::uint64_t stream) {
    const ChainParams noise = ChainParams::lazy(prob.noise_dim(), tau, cfg.noise_std);
    return replicate(cfg.reps, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
      ChainState c = new_chain(noise, derive_seed(derive_seed(seed, stream), rep));
      long double sum = 0.0L;
      for (std::uint64_t i = 0; i < n; ++i) {
        sum += static_cast<long double>(oracle.evaluate(PointView(x), c.current())) - f;
        c.advance();
      }
      const double m = static_cast<double>(sum / static_cast<long double>(n));
      acc.add(m * m);
    });
  };

  std::vector<double> xs, ys;
  for (std::uint64_t n : cfg.n_grid) {
    const RunningStats s = batched(1, n, 1000 + n);
    xs.push_back(static_cast<double>(n));
    ys.push_back(s.mean());
    r.add_row({"var tau=1 n=" + std::to_string(n), s.mean(), s.standard_error()});
  }
  if (cfg.noise_std == 0.0) {
    const double worst = *std::max_element(ys.begin(), ys.end());
    r.add_row({"variance without noise", worst, 0.0, 0.0, worst <= 1e-24});
    return r;
  }
  add_slope(r, "slope vs n", xs, ys, -1.0, -1.0 - cfg.slope_tol_n, -1.0 + cfg.slope_tol_n);

  xs.clear();
  ys.clear();
  for (std::uint64_t tau : cfg.tau_grid) {
    const RunningStats s = batched(tau, cfg.n_fixed, 2000 + tau);
    xs.push_back(static_cast<double>(tau));
    ys.push_back(s.mean());
    r.add_row({"var n=" + std::to_string(cfg.n_fixed) + " tau=" + std::to_string(tau), s.mean(),
               s.standard_error()});
  }
  const LinearFit fit = add_slope(r, "slope vs tau", xs, ys, 1.0, 1.0 - cfg.slope_tol_tau, 1.0 + cfg.slope_tol_tau);
  // C_1 in var <= C_1 tau sigma^2 / n, fitted at the largest tau
  const double sigma_sq = noise_second_moment(oracle, ChainParams::lazy(prob.noise_dim(), 1, cfg.noise_std), x,
                                              20000, derive_seed(seed, 3));
  if (sigma_sq > 0.0)
    r.fitted["C1"] = ys.back() * static_cast<double>(cfg.n_fixed) / (xs.back() * sigma_sq);
  r.notes.push_back(fmt("fitted C1 = ", r.fitted["C1"]));
  r.notes.push_back(fmt("tau-fit r^2 = ", fit.r_squared));
  return r;
}

// ---- estimators ----------------------------------------------------------------

MomentReport check_sphere_moments(std::size_t d, std::uint64_t draws, std::uint64_t seed) {
  MomentReport r;
  r.name = "sphere second moment";
  r.reps = draws;
  const std::size_t dd = d * d;
  struct Acc {
    VectorStats outer;
    RunningStats norm_err;
    void merge(const Acc& o) {
      outer.merge(o.outer);
      norm_err.merge(o.norm_err);
    }
  };
  const Acc acc = replicate(draws, Acc{VectorStats(dd), {}}, [&](std::uint64_t rep, Acc& a) {
    Rng rng = make_rng(seed, rep);
    const Vector e = sample_sphere(d, rng);
    Vector flat(static_cast<Eigen::Index>(dd));
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        flat[static_cast<Eigen::Index>(i * d + j)] = e[static_cast<Eigen::Index>(i)] * e[static_cast<Eigen::Index>(j)];
    a.outer.add(flat);
    a.norm_err.add(std::abs(e.norm() - 1.0));
  });
  r.mean = acc.outer.mean();
  r.standard_error = acc.outer.standard_error();
  double worst_z = 0.0;
  bool all_ok = true;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const auto k = static_cast<Eigen::Index>(i * d + j);
      const double ref = i == j ? 1.0 / static_cast<double>(d) : 0.0;
      const double se = r.standard_error[k];
      all_ok = all_ok && within_se(r.mean[k], ref, se);
      if (se > 0) worst_z = std::max(worst_z, std::abs(r.mean[k] - ref) / se);
    }
  r.add_row({"E[e e^T] diagonal (first)", r.mean[0], r.standard_error[0], 1.0 / static_cast<double>(d), all_ok});
  r.add_row({"largest |z| over entries", worst_z, 0.0, 3.0, all_ok});
  r.add_row({"mean ||e| - 1|", acc.norm_err.mean(), 0.0, 0.0, acc.norm_err.mean() <= 1e-14});
  return r;
}

MomentReport check_level_frequencies(std::uint64_t draws, std::uint64_t seed) {
  MomentReport r;
  r.name = "level frequencies";
  r.reps = draws;
  struct Acc {
    std::uint64_t n = 0;
    std::uint64_t counts[4] = {0, 0, 0, 0};
    std::uint64_t below_one = 0;
    void merge(const Acc& o) {
      n += o.n;
      for (int i = 0; i < 4; ++i) counts[i] += o.counts[i];
      below_one += o.below_one;
    }
  };
  const std::uint64_t chunk = 4096;
  const std::uint64_t blocks = (draws + chunk - 1) / chunk;
  const Acc acc = replicate(blocks, Acc{}, [&](std::uint64_t b, Acc& a) {
    Rng rng = make_rng(seed, b);
    const std::uint64_t m = std::min(chunk, draws - b * chunk);
    for (std::uint64_t i = 0; i < m; ++i) {
      const unsigned j = sample_level(rng);
      ++a.n;
      if (j < 1) ++a.below_one;
      if (j <= 3) ++a.counts[j];
    }
  });
  for (unsigned j = 1; j <= 3; ++j) {
    const double p = std::ldexp(1.0, -static_cast<int>(j));
    const double f = static_cast<double>(acc.counts[j]) / static_cast<double>(acc.n);
    const double se = binomial_se(p, acc.n);
    r.add_row({"P(J=" + std::to_string(j) + ")", f, se, p, within_se(f, p, se)});
  }
  r.add_row({"P(J<1)", static_cast<double>(acc.below_one), 0.0, 0.0, acc.below_one == 0});
  return r;
}

MomentReport check_quadratic_exactness(std::size_t d, const std::vector<double>& ts, std::uint64_t trials,
                                       std::uint64_t seed, double rel_tol) {
  MomentReport r;
  r.name = "quadratic exactness";
  r.reps = trials;
  const Oracle oracle(quadratic(d), {}, std::nullopt, Precision::Quad);
  const ChainParams two_noise = ChainParams::lazy(d, 3, 1.0);
  // A frozen chain gives the one-point pair identical noise.
  const ChainParams frozen = ChainParams::lazy(d, std::uint64_t{1} << 62, 1.0);
  for (Feedback fb : {Feedback::TwoPoint, Feedback::OnePoint}) {
    for (double t : ts) {
      struct Acc {
        double worst = 0.0;
        std::uint64_t n = 0;
        void merge(const Acc& o) {
          worst = std::max(worst, o.worst);
          n += o.n;
        }
      };
      const Acc acc = replicate(trials, Acc{}, [&](std::uint64_t rep, Acc& a) {
        Rng rng = make_rng(seed, rep);
        std::normal_distribution<double> normal;
        Vector x(static_cast<Eigen::Index>(d));
        for (auto& v : x) v = normal(rng);
        const Vector e = sample_sphere(d, rng);
        ChainState chain = new_chain(fb == Feedback::TwoPoint ? two_noise : frozen, derive_seed(seed, rep));
        const Vector z = chain.current();
        const GradEstimate g = single_estimate(oracle, chain, x, e, {t, fb});
        if (fb == Feedback::OnePoint && chain.resamples() != 0) return;
        const Vector expect = static_cast<double>(d) * (x + z).dot(e) * e;
        const double err = (g.vector - expect).norm() / std::max(expect.norm(), 1e-300);
        a.worst = std::max(a.worst, err);
        ++a.n;
      });
      const std::string tag = std::string(to_string(fb)) + " t=" + fmt("", t);
      r.add_row({tag + " max rel err", acc.worst, 0.0, rel_tol, acc.worst <= rel_tol && acc.n > 0});
    }
  }
  return r;
}

MomentReport check_minibatch_variance(std::size_t d, const std::vector<std::uint64_t>& n_grid,
                                      std::uint64_t reps, std::uint64_t seed, double tol) {
  MomentReport r;
  r.name = "minibatch variance";
  r.reps = reps;
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::iid(d, 1.0);
  Rng setup = make_rng(seed, ~std::uint64_t{0});
  const Vector x = Vector::Constant(static_cast<Eigen::Index>(d), 0.5);
  const Vector e = sample_sphere(d, setup);
  std::vector<double> xs, ys;
  for (std::uint64_t n : n_grid) {
    const RunningStats s = replicate(reps, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
      ChainState c = new_chain(noise, derive_seed(derive_seed(seed, n), rep));
      const GradEstimate g = minibatch_estimate(oracle, c, x, e, n, {1e-3, Feedback::TwoPoint});
      acc.add(g.vector.dot(e));
    });
    xs.push_back(static_cast<double>(n));
    ys.push_back(s.variance());
    r.add_row({"var n=" + std::to_string(n), s.variance(), 0.0});
  }
  add_slope(r, "slope vs n", xs, ys, -1.0, -1.0 - tol, -1.0 + tol);
  return r;
}

MomentReport check_rd_mean(std::size_t d, std::uint64_t n, std::uint64_t reps, std::uint64_t seed) {
  MomentReport r;
  r.name = "random-direction mean";
  r.reps = reps;
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::lazy(d, 1, 0.0);
  Vector x(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = 1.0 - 0.5 * static_cast<double>(i);
  const VectorStats acc =
      replicate(reps, VectorStats(d), [&](std::uint64_t rep, VectorStats& a) {
        ChainState c = new_chain(noise, rep);
        Rng rng = make_rng(seed, rep);
        a.add(rd_estimate(oracle, c, x, n, {1e-2, Feedback::TwoPoint}, rng).vector);
      });
  r.mean = acc.mean();
  r.standard_error = acc.standard_error();
  for (Eigen::Index i = 0; i < x.size(); ++i)
    r.add_row({"mean[" + std::to_string(i) + "]", r.mean[i], r.standard_error[i], x[i],
               within_se(r.mean[i], x[i], r.standard_error[i])});
  return r;
}

// ---- smoothing -------------------------------------------------------------------

namespace {

// Closed form of f_t - f where the smoothed quadratic has one.
std::optional<double> smoothing_gap(const Problem& p, double t) {
  const double d = static_cast<double>(p.dim());
  const double ball = t * t / (2.0 * (d + 2.0));
  switch (p.kind()) {
    case ProblemKind::QuadraticMarkov: return ball * d;
    case ProblemKind::HardTwoPoint: return ball * d * p.mu();
    case ProblemKind::DiagQuadratic: {
      const Vector g = p.gradient(p.minimizer() + Vector::Ones(static_cast<Eigen::Index>(p.dim())));
      return ball * g.sum();
    }
    default: return std::nullopt;
  }
}

// One antithetic draw of f_t(x) - f(x): (f(x + t r) + f(x - t r)) / 2 - f(x).
long double antithetic_gap(const Problem& p, const Vector& x, const Vector& rball, double t, long double fx) {
  return (p.value(PointView(x, rball, t)) + p.value(PointView(x, rball, -t))) / 2.0L - fx;
}

}  // namespace

MomentReport check_smoothing(const Problem& problem, const Vector& x, double t, std::uint64_t mc_samples,
                             std::uint64_t seed) {
  problem.check_dim(x);
  MomentReport r;
  r.name = "smoothing d=" + std::to_string(problem.dim()) + " t=" + fmt("", t);
  r.reps = mc_samples;
  const std::size_t d = problem.dim();
  const long double fx = problem.value(PointView(x));
  const SqAcc acc = replicate(mc_samples, SqAcc{VectorStats(d), {}}, [&](std::uint64_t rep, SqAcc& a) {
    Rng rng = make_rng(seed, rep);
    const Vector rb = sample_ball(d, rng);
    a.sq.add(static_cast<double>(antithetic_gap(problem, x, rb, t, fx)));
    const Vector e = sample_sphere(d, rng);
    const long double diff = problem.value(PointView(x, e, t)) - problem.value(PointView(x, e, -t));
    a.vec.add(static_cast<double>(static_cast<long double>(d) * diff / (2.0L * t)) * e);
  });
  const double gap = acc.sq.mean();
  const double se = acc.sq.standard_error();
  if (auto ref = smoothing_gap(problem, t)) {
    r.add_row({"f_t - f", gap, se, *ref, within_se(gap, *ref, se)});
  } else {
    const double upper = problem.lips_grad() ? *problem.lips_grad() * t * t : problem.lips_f().value_or(0.0) * t;
    r.add_row({"f_t - f", gap, se, upper, gap >= -3.0 * se && gap <= upper + 3.0 * se});
  }
  r.add_row({"f_t - f >= 0", gap, se, 0.0, gap >= -3.0 * se});
  if (auto lg = problem.lips_grad())
    r.add_row({"f_t - f <= L t^2", gap, se, *lg * t * t, gap <= *lg * t * t + 3.0 * se});
  r.mean = acc.vec.mean();
  r.standard_error = acc.vec.standard_error();
  if (auto grad = problem.smoothed_gradient(x, t)) {
    bool ok = true;
    for (Eigen::Index i = 0; i < grad->size(); ++i) ok = ok && within_se(r.mean[i], (*grad)[i], r.standard_error[i]);
    r.add_row({"E_e[g] vs grad f_t (coord 0)", r.mean[0], r.standard_error[0], (*grad)[0], ok});
    if (auto lg = problem.lips_grad()) {
      const double dev = (problem.gradient(x) - *grad).squaredNorm();
      r.add_row({"|grad f - grad f_t|^2 <= L^2 t^2", dev, 0.0, *lg * *lg * t * t, dev <= *lg * *lg * t * t * (1 + 1e-12)});
    }
  }
  return r;
}

MomentReport check_smoothing_lipschitz(const Problem& problem, double t, std::uint64_t points,
                                       std::uint64_t mc_per_point, std::uint64_t seed) {
  MomentReport r;
  r.name = "smoothing Lipschitz bound t=" + fmt("", t);
  r.reps = points;
  const auto G = problem.lips_f();
  if (!G) throw UsageError("smoothing Lipschitz check needs a Lipschitz constant");
  const std::size_t d = problem.dim();
  struct Acc {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void merge(const Acc& o) {
      lo = std::min(lo, o.lo);
      hi = std::max(hi, o.hi);
    }
  };
  const Acc acc = replicate(points, Acc{}, [&](std::uint64_t rep, Acc& a) {
    Rng rng = make_rng(seed, rep);
    const Vector x = (1.0 - t) * sample_ball(d, rng);
    const long double fx = problem.value(PointView(x));
    long double sum = 0.0L;
    for (std::uint64_t m = 0; m < mc_per_point; ++m) sum += antithetic_gap(problem, x, sample_ball(d, rng), t, fx);
    const double gap = static_cast<double>(sum / static_cast<long double>(mc_per_point));
    a.lo = std::min(a.lo, gap);
    a.hi = std::max(a.hi, gap);
  });
  r.add_row({"min f_t - f", acc.lo, 0.0, 0.0, acc.lo >= 0.0});
  r.add_row({"max f_t - f", acc.hi, 0.0, *G * t, acc.hi <= *G * t});
  return r;
}

MomentReport check_ball_moment(std::size_t d, std::uint64_t draws, std::uint64_t seed) {
  MomentReport r;
  r.name = "ball moment d=" + std::to_string(d);
  r.reps = draws;
  const RunningStats s = replicate(draws, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
    Rng rng = make_rng(seed, rep);
    acc.add(sample_ball(d, rng).squaredNorm());
  });
  const double ref = static_cast<double>(d) / static_cast<double>(d + 2);
  r.add_row({"E|r|^2 vs d/(d+2)", s.mean(), s.standard_error(), ref, within_se(s.mean(), ref, s.standard_error())});
  return r;
}

// ---- MLMC -------------------------------------------------------------------------

namespace {

Vector smoothed_target(const Problem& p, const Vector& x, double t) {
  if (auto g = p.smoothed_gradient(x, t)) return *g;
  return p.gradient(x);
}

}  // namespace

MomentReport check_mlmc_moments(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                                const MlmcConfig& mlmc, const SmoothingConfig& cfg, std::uint64_t reps,
                                std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc moments";
  r.reps = reps;
  const std::size_t d = oracle.problem().dim();
  const Vector target = smoothed_target(oracle.problem(), x, cfg.t);
  const SqAcc acc = replicate(reps, SqAcc{VectorStats(d), {}}, [&](std::uint64_t rep, SqAcc& a) {
    ChainState c = new_chain(noise, derive_seed(seed, 2 * rep));
    Rng rng = make_rng(seed, 2 * rep + 1);
    const GradEstimate g = mlmc_estimate(oracle, c, x, mlmc, cfg, rng);
    a.vec.add(g.vector);
    a.sq.add((g.vector - target).squaredNorm());
  });
  r.mean = acc.vec.mean();
  r.standard_error = acc.vec.standard_error();
  r.add_row({"E|g_ml - grad f_t|^2", acc.sq.mean(), acc.sq.standard_error()});
  const double bias = (r.mean - target).squaredNorm();
  r.add_row({"|E g_ml - grad f_t|^2", bias, 2.0 * (r.mean - target).cwiseAbs().dot(r.standard_error)});
  r.fitted["variance"] = acc.sq.mean();
  r.fitted["squared_bias"] = bias;
  return r;
}

MomentReport check_mlmc_telescoping(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                                    const MlmcConfig& mlmc, const SmoothingConfig& cfg, std::uint64_t reps,
                                    std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc telescoping";
  r.reps = reps;
  const std::size_t d = oracle.problem().dim();
  const std::uint64_t top = (std::uint64_t{1} << mlmc.j_max) * mlmc.l;
  struct Acc {
    VectorStats ml, rd;
    void merge(const Acc& o) {
      ml.merge(o.ml);
      rd.merge(o.rd);
    }
  };
  const Acc acc = replicate(reps, Acc{VectorStats(d), VectorStats(d)}, [&](std::uint64_t rep, Acc& a) {
    ChainState c1 = new_chain(noise, derive_seed(seed, 4 * rep));
    Rng rng1 = make_rng(seed, 4 * rep + 1);
    a.ml.add(mlmc_estimate(oracle, c1, x, mlmc, cfg, rng1).vector);
    ChainState c2 = new_chain(noise, derive_seed(seed, 4 * rep + 2));
    Rng rng2 = make_rng(seed, 4 * rep + 3);
    a.rd.add(rd_estimate(oracle, c2, x, top, cfg, rng2).vector);
  });
  r.mean = acc.ml.mean();
  r.standard_error = acc.ml.standard_error();
  const Vector rd_mean = acc.rd.mean();
  const Vector rd_se = acc.rd.standard_error();
  for (Eigen::Index i = 0; i < r.mean.size(); ++i) {
    const double se = std::hypot(r.standard_error[i], rd_se[i]);
    r.add_row({"coord " + std::to_string(i) + " ml - rd", r.mean[i] - rd_mean[i], se, 0.0,
               within_se(r.mean[i], rd_mean[i], se)});
  }
  r.notes.push_back("top-level batch 2^j_max l = " + std::to_string(top));
  return r;
}

Vector mlmc_conditional_mean(const Vector& x, double c, std::uint64_t tau, const MlmcConfig& mlmc) {
  const long double q = 1.0L - 1.0L / static_cast<long double>(tau);
  const std::uint64_t l = mlmc.l;
  long double w = geometric_block(q, 1, l) / static_cast<long double>(l);
  auto A = [&](unsigned j) {
    const std::uint64_t n = (std::uint64_t{1} << j) * l;
    return geometric_block(q, l + 1, n) / static_cast<long double>(n);
  };
  for (unsigned j = 1; j <= mlmc.j_max; ++j) w += A(j) - A(j - 1);
  return x + Vector::Constant(x.size(), static_cast<double>(c * w));
}

MomentReport check_mlmc_conditional_mean(std::size_t d, std::uint64_t tau, double c, const MlmcConfig& mlmc,
                                         std::uint64_t reps, std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc conditional mean";
  r.reps = reps;
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::lazy(d, tau, 1.0);
  const Vector x = Vector::Constant(static_cast<Eigen::Index>(d), 0.5);
  const Vector z0 = Vector::Constant(static_cast<Eigen::Index>(d), c);
  const SmoothingConfig cfg{1e-3, Feedback::TwoPoint};
  const VectorStats acc = replicate(reps, VectorStats(d), [&](std::uint64_t rep, VectorStats& a) {
    ChainState ch = new_chain_from(noise, z0, derive_seed(seed, 2 * rep));
    Rng rng = make_rng(seed, 2 * rep + 1);
    a.add(mlmc_estimate(oracle, ch, x, mlmc, cfg, rng).vector);
  });
  r.mean = acc.mean();
  r.standard_error = acc.standard_error();
  const Vector exact = mlmc_conditional_mean(x, c, tau, mlmc);
  for (Eigen::Index i = 0; i < r.mean.size(); ++i)
    r.add_row({"coord " + std::to_string(i), r.mean[i], r.standard_error[i], exact[i],
               within_se(r.mean[i], exact[i], r.standard_error[i])});
  return r;
}

MomentReport check_mlmc_layout(const MlmcConfig& mlmc, std::uint64_t draws, std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc sample layout";
  r.reps = draws;
  const std::size_t d = 2;
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::lazy(d, 4, 1.0);
  const Vector x(Vector::Constant(2, 0.3));
  const SmoothingConfig cfg{1e-2, Feedback::TwoPoint};
  constexpr unsigned kLevels = 4;
  struct Acc {
    std::uint64_t n = 0, checked = 0, mismatched = 0, base_only = 0;
    std::uint64_t level[kLevels + 1] = {};
    void merge(const Acc& o) {
      n += o.n;
      checked += o.checked;
      mismatched += o.mismatched;
      base_only += o.base_only;
      for (unsigned j = 0; j <= kLevels; ++j) level[j] += o.level[j];
    }
  };
  const std::uint64_t chunk = 1024;
  const std::uint64_t blocks = (draws + chunk - 1) / chunk;
  const Acc acc = replicate(blocks, Acc{}, [&](std::uint64_t b, Acc& a) {
    Rng rng = make_rng(seed, b);
    ChainState ch = new_chain(noise, derive_seed(seed, b));
    MlmcWorkspace ws;
    GradEstimate out;
    MlmcProbe probe;
    probe.max_recorded = 64;
    const std::uint64_t m = std::min(chunk, draws - b * chunk);
    for (std::uint64_t i = 0; i < m; ++i) {
      mlmc_estimate_into(oracle, ch, x, mlmc, cfg, rng, ws, out, &probe);
      ++a.n;
      if (!probe.corrected) ++a.base_only;
      else if (probe.level_j <= kLevels) ++a.level[probe.level_j];
      if (probe.samples > probe.max_recorded) continue;
      const auto w = mlmc_sample_weights(mlmc.l, probe.level_j, probe.corrected);
      Vector expect = Vector::Zero(2);
      for (std::size_t k = 0; k < w.size(); ++k) expect += w[k] * probe.singles[k];
      ++a.checked;
      if ((expect - out.vector).norm() > 1e-9 * (1.0 + expect.norm())) ++a.mismatched;
    }
  });
  r.add_row({"draws matching sum w_i g_i", static_cast<double>(acc.checked - acc.mismatched), 0.0,
             static_cast<double>(acc.checked), acc.mismatched == 0 && acc.checked > 0});
  const double n = static_cast<double>(acc.n);
  const double p0 = std::ldexp(1.0, -static_cast<int>(mlmc.j_max));
  const double f0 = static_cast<double>(acc.base_only) / n;
  r.add_row({"freq base only (J > j_max)", f0, binomial_se(p0, acc.n), p0,
             within_se(f0, p0, binomial_se(p0, acc.n))});
  for (unsigned j = 1; j <= std::min(kLevels, mlmc.j_max); ++j) {
    const double p = std::ldexp(1.0, -static_cast<int>(j));
    const double f = static_cast<double>(acc.level[j]) / n;
    r.add_row({"freq level " + std::to_string(j), f, binomial_se(p, acc.n), p,
               within_se(f, p, binomial_se(p, acc.n))});
  }
  r.fitted["freq_base_only"] = f0;
  r.fitted["freq_level_1"] = static_cast<double>(acc.level[1]) / n;
  return r;
}

MomentReport check_mlmc_call_mean(const MlmcConfig& mlmc, std::uint64_t draws, std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc oracle calls";
  r.reps = draws;
  const Oracle oracle(quadratic(2));
  const ChainParams noise = ChainParams::lazy(2, 2, 0.0);
  const Vector x = Vector::Ones(2);
  const RunningStats s = replicate(draws, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
    ChainState c = new_chain(noise, rep);
    Rng rng = make_rng(seed, rep);
    const GradEstimate g = mlmc_estimate(oracle, c, x, mlmc, {1e-2, Feedback::TwoPoint}, rng);
    if (g.oracle_calls != c.evaluations()) throw std::logic_error("mlmc: call count differs from chain charge");
    acc.add(static_cast<double>(g.oracle_calls));
  });
  const double ref = mlmc.expected_oracle_calls();
  r.add_row({"mean calls per draw", s.mean(), s.standard_error(), ref, within_se(s.mean(), ref, s.standard_error())});
  return r;
}

namespace {

double mlmc_variance(const MlmcSweepConfig& cfg, std::size_t d, const MlmcConfig& mlmc, std::uint64_t seed,
                     double* se) {
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::lazy(d, cfg.tau, cfg.noise_std);
  const Vector x = Vector::Zero(static_cast<Eigen::Index>(d));
  const SmoothingConfig sc{cfg.t, cfg.feedback};
  const RunningStats s = replicate(cfg.reps, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
    ChainState c = new_chain(noise, derive_seed(seed, 2 * rep));
    Rng rng = make_rng(seed, 2 * rep + 1);
    acc.add(mlmc_estimate(oracle, c, x, mlmc, sc, rng).vector.squaredNorm());
  });
  if (se) *se = s.standard_error();
  return s.mean();
}

}  // namespace

MomentReport check_mlmc_variance_vs_B(const MlmcSweepConfig& cfg, const std::vector<std::uint64_t>& B_grid,
                                      std::uint64_t seed, double tol) {
  MomentReport r;
  r.name = "mlmc variance vs B";
  r.reps = cfg.reps;
  std::vector<double> xs, ys;
  for (std::uint64_t B : B_grid) {
    const MlmcConfig m = MlmcConfig::custom((floor_log2(cfg.M) + 1) * B, cfg.M, B);
    double se = 0.0;
    const double v = mlmc_variance(cfg, cfg.dim, m, derive_seed(seed, B), &se);
    xs.push_back(static_cast<double>(B));
    ys.push_back(v);
    r.add_row({"E|g - grad|^2 B=" + std::to_string(B), v, se});
  }
  add_slope(r, "slope vs B", xs, ys, -1.0, -1.0 - tol, -1.0 + tol);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    if (xs[i + 1] == 4.0 * xs[i]) {
      const double ratio = ys[i] / ys[i + 1];
      r.add_row({"ratio B=" + fmt("", xs[i]) + " / 4B", ratio, 0.0, 4.0, ratio >= 3.0 && ratio <= 5.5});
    }
  return r;
}

MomentReport check_mlmc_variance_vs_d(const MlmcSweepConfig& cfg, const std::vector<std::size_t>& d_grid,
                                      std::uint64_t seed, double lo, double hi) {
  MomentReport r;
  r.name = "mlmc variance vs d (tau=" + std::to_string(cfg.tau) + ")";
  r.reps = cfg.reps;
  const MlmcConfig m = MlmcConfig::custom((floor_log2(cfg.M) + 1) * cfg.B, cfg.M, cfg.B);
  std::vector<double> xs, ys;
  for (std::size_t d : d_grid) {
    double se = 0.0;
    const double v = mlmc_variance(cfg, d, m, derive_seed(seed, d), &se);
    xs.push_back(static_cast<double>(d));
    ys.push_back(v);
    r.add_row({"E|g - grad|^2 d=" + std::to_string(d), v, se});
  }
  add_slope(r, "slope vs d", xs, ys, 1.0, lo, hi);
  return r;
}

MomentReport check_mlmc_bias_vs_M(const MlmcSweepConfig& cfg, const std::vector<double>& M_grid, double c,
                                  std::uint64_t seed) {
  MomentReport r;
  r.name = "mlmc bias vs M (tau=" + std::to_string(cfg.tau) + ")";
  r.reps = cfg.reps;
  const std::size_t d = cfg.dim;
  const Oracle oracle(quadratic(d));
  const ChainParams noise = ChainParams::lazy(d, cfg.tau, cfg.noise_std);
  const Vector x = Vector::Zero(static_cast<Eigen::Index>(d));
  const Vector z0 = Vector::Constant(static_cast<Eigen::Index>(d), c);
  const SmoothingConfig sc{cfg.t, cfg.feedback};
  double prev = 0.0, prev_se = 0.0;
  for (std::size_t k = 0; k < M_grid.size(); ++k) {
    const double M = M_grid[k];
    const MlmcConfig m = MlmcConfig::custom((floor_log2(M) + 1) * cfg.B, M, cfg.B);
    const VectorStats acc = replicate(cfg.reps, VectorStats(d), [&](std::uint64_t rep, VectorStats& a) {
      ChainState ch = new_chain_from(noise, z0, derive_seed(derive_seed(seed, k), 2 * rep));
      Rng rng = make_rng(derive_seed(seed, k), 2 * rep + 1);
      a.add(mlmc_estimate(oracle, ch, x, m, sc, rng).vector);
    });
    const Vector mean = acc.mean();
    const Vector se = acc.standard_error();
    const double bias = mean.squaredNorm();
    const double bias_se = 2.0 * mean.cwiseAbs().dot(se) + se.squaredNorm();
    const double exact = mlmc_conditional_mean(x, c, cfg.tau, m).squaredNorm();
    const bool ok = k == 0 || prev - bias > 3.0 * std::hypot(prev_se, bias_se);
    r.add_row({"|E g - grad|^2 M=" + fmt("", M), bias, bias_se, exact, ok});
    prev = bias;
    prev_se = bias_se;
  }
  return r;
}

// ---- adversarial noise --------------------------------------------------------------

MomentReport check_adversarial_estimates(const Oracle& oracle, const ChainParams& noise,
                                         const AdversarialSpec& adversary, double t, Feedback feedback,
                                         std::uint64_t evaluations, std::uint64_t seed) {
  MomentReport r;
  r.name = "adversarial estimate bound";
  r.reps = evaluations;
  const Oracle plain = oracle.with_adversary(AdversarialSpec::none());
  const Oracle wrapped = oracle.with_adversary(adversary);
  const std::size_t d = oracle.problem().dim();
  const long double bound = static_cast<long double>(d) * adversary.delta_bound / t;
  struct Acc {
    long double worst = 0.0L;
    std::uint64_t identical = 0, n = 0;
    void merge(const Acc& o) {
      worst = std::max(worst, o.worst);
      identical += o.identical;
      n += o.n;
    }
  };
  const Acc acc = replicate(evaluations, Acc{}, [&](std::uint64_t rep, Acc& a) {
    Rng rng = make_rng(seed, rep);
    const Vector x = sample_ball(d, rng);
    const Vector e = sample_sphere(d, rng);
    ChainState c1 = new_chain(noise, derive_seed(seed, rep));
    ChainState c2 = c1;
    const OracleReply p = plain.difference_pair(c1, x, e, t, feedback);
    const OracleReply w = wrapped.difference_pair(c2, x, e, t, feedback);
    const Quad gap = (w.plus - w.minus) - (p.plus - p.minus);
    const long double diff = std::fabs(static_cast<long double>(gap)) * static_cast<long double>(d) / (2.0L * t);
    a.worst = std::max(a.worst, diff * static_cast<long double>(e.norm()));
    ChainState c3 = new_chain(noise, derive_seed(seed, rep));
    ChainState c4 = c3;
    const GradEstimate g = single_estimate(plain, c3, x, e, {t, feedback});
    const GradEstimate gw = single_estimate(wrapped, c4, x, e, {t, feedback});
    if (g.vector == gw.vector) ++a.identical;
    ++a.n;
  });
  const double worst = static_cast<double>(acc.worst);
  const double b = static_cast<double>(bound);
  r.add_row({"max |g - g~|", worst, 0.0, b, acc.worst <= bound * (1.0L + 1e-9L)});
  r.add_row({"bit-identical estimates", static_cast<double>(acc.identical), 0.0, static_cast<double>(acc.n),
             !(adversary.delta_bound == 0.0 || adversary.shape == AdversarialSpec::Shape::Zero) ||
                 acc.identical == acc.n});
  r.fitted["max_gap"] = worst;
  r.fitted["bound"] = b;
  return r;
}

MomentReport check_adversarial_floor(const Oracle& oracle, const AdversarialRunConfig& cfg,
                                     const std::vector<double>& delta_grid, double delta_max,
                                     std::uint64_t seed) {
  MomentReport r;
  r.name = "adversarial error floor";
  r.reps = cfg.reps;
  RunOptions opts;
  opts.record_rows = false;
  auto mean_error = [&](double delta, double* se) {
    const Oracle o = oracle.with_adversary(delta > 0.0 ? AdversarialSpec::sign_hash(delta) : AdversarialSpec::none());
    const RunningStats s = replicate(cfg.reps, RunningStats{}, [&](std::uint64_t rep, RunningStats& acc) {
      acc.add(run(o, cfg.noise, cfg.params, cfg.x0, derive_seed(seed, rep), opts).last().err_sq);
    });
    *se = s.standard_error();
    return s.mean();
  };
  double base_se = 0.0;
  const double base = mean_error(0.0, &base_se);
  r.add_row({"error delta=0", base, base_se});
  r.fitted["error_delta_0"] = base;
  for (double delta : delta_grid) {
    if (delta == 0.0) continue;
    double se = 0.0;
    const double e = mean_error(delta, &se);
    const double ratio = e / base;
    const bool tolerated = delta <= delta_max;
    r.add_row({"ratio delta=" + fmt("", delta) + (tolerated ? "" : " (above delta_max)"), ratio, 0.0,
               cfg.ratio_limit, !tolerated || ratio <= cfg.ratio_limit});
    r.fitted["ratio_" + fmt("", delta)] = ratio;
  }
  r.notes.push_back(fmt("delta_max = ", delta_max));
  return r;
}

// ---- optimizer ------------------------------------------------------------------------

MomentReport check_lyapunov_descent(const std::vector<RunRecord>& records, std::size_t k_from) {
  MomentReport r;
  r.name = "Lyapunov descent";
  r.reps = records.size();
  if (records.empty()) throw UsageError("Lyapunov descent: no records");
  std::size_t len = records.front().rows.size();
  for (const auto& rec : records) len = std::min(len, rec.rows.size());
  std::size_t violations = 0, pathwise = 0;
  double worst_z = -std::numeric_limits<double>::infinity();
  std::size_t worst_k = 0;
  for (std::size_t k = k_from + 1; k < len; ++k) {
    RunningStats diff;
    for (const auto& rec : records) {
      const double dk = rec.rows[k].lyapunov - rec.rows[k - 1].lyapunov;
      diff.add(dk);
      if (dk > 0.0) ++pathwise;
    }
    const double se = diff.standard_error();
    const double z = se > 0.0 ? diff.mean() / se : (diff.mean() > 0.0 ? INFINITY : -INFINITY);
    if (diff.mean() > 3.0 * se) ++violations;
    if (z > worst_z) {
      worst_z = z;
      worst_k = k;
    }
  }
  r.add_row({"steps with E[r^k - r^(k-1)] > 3 se", static_cast<double>(violations), 0.0, 0.0, violations == 0});
  r.add_row({"largest z of the mean increment", worst_z, 0.0, 3.0, true});
  r.add_row({"pathwise increases (all runs)", static_cast<double>(pathwise), 0.0,
             std::numeric_limits<double>::quiet_NaN(), true});
  r.notes.push_back("largest z at k = " + std::to_string(worst_k));
  r.fitted["violations"] = static_cast<double>(violations);
  r.fitted["pathwise_increases"] = static_cast<double>(pathwise);
  return r;
}

// ---- oracle calls ---------------------------------------------------------------------

MomentReport oracle_call_stats(const std::vector<RunRecord>& records) {
  MomentReport r;
  r.name = "oracle call totals";
  r.reps = records.size();
  RunningStats total, per_iter;
  for (const auto& rec : records) {
    if (rec.rows.empty()) continue;
    total.add(static_cast<double>(rec.last().calls));
    for (std::size_t i = 1; i < rec.rows.size(); ++i) {
      if (rec.rows[i].calls < rec.rows[i - 1].calls) throw std::logic_error("oracle calls decreased");
      if (rec.rows[i].k == rec.rows[i - 1].k + 1)
        per_iter.add(static_cast<double>(rec.rows[i].calls - rec.rows[i - 1].calls));
    }
  }
  r.add_row({"mean S_N", total.mean(), total.standard_error()});
  r.add_row({"var S_N", total.n > 1 ? total.variance() : 0.0, 0.0});
  r.add_row({"mean calls per iteration", per_iter.mean(), per_iter.standard_error()});
  r.add_row({"var calls per iteration", per_iter.n > 1 ? per_iter.variance() : 0.0, 0.0});
  double prev_tail = 1.0;
  bool monotone = true;
  for (double alpha : {1.5, 2.0, 3.0}) {
    std::uint64_t above = 0;
    for (const auto& rec : records)
      if (!rec.rows.empty() && static_cast<double>(rec.last().calls) > alpha * total.mean()) ++above;
    const double tail = records.empty() ? 0.0 : static_cast<double>(above) / static_cast<double>(records.size());
    monotone = monotone && tail <= prev_tail;
    prev_tail = tail;
    r.add_row({"P(S_N > " + fmt("", alpha) + " E S_N)", tail, 0.0, std::numeric_limits<double>::quiet_NaN(), monotone});
    r.fitted["tail_" + fmt("", alpha)] = tail;
  }
  r.fitted["mean_total"] = total.mean();
  r.fitted["mean_per_iteration"] = per_iter.mean();
  return r;
}

// ---- suites ---------------------------------------------------------------------------

namespace {

std::uint64_t scaled(double scale, std::uint64_t n, std::uint64_t floor = 100) {
  return std::max<std::uint64_t>(floor, static_cast<std::uint64_t>(std::llround(static_cast<double>(n) * scale)));
}

MomentReport mixing_report(std::uint64_t seed) {
  MomentReport r;
  r.name = "mixing time";
  for (std::uint64_t tau : {1, 10, 100}) {
    const MixingReport m = empirical_mixing_time(ChainParams::lazy(1, tau, 1.0), 0.25, 4000, derive_seed(seed, tau));
    r.add_row({"tau=" + std::to_string(tau) + " steps", static_cast<double>(m.steps), 0.0,
               std::numeric_limits<double>::quiet_NaN(), m.steps >= 1});
    r.add_row({"tau=" + std::to_string(tau) + " uncoupled after steps", m.empirical_uncoupled, m.standard_error,
               m.predicted_uncoupled, m.consistent()});
  }
  return r;
}

std::vector<MomentReport> suite_chains(const SuiteOptions& o) {
  std::vector<MomentReport> out;
  out.push_back(check_chain_stationarity(ChainParams::lazy(3, 5, 1.5), {0, 10, 100}, scaled(o.scale, 20000),
                                         derive_seed(o.seed, 11)));
  out.push_back(check_chain_stationarity(ChainParams::iid(2, 2.0), {0}, scaled(o.scale, 100000),
                                         derive_seed(o.seed, 12)));
  out.back().name = "iid chain variance";
  out.push_back(check_resample_frequency(ChainParams::lazy(2, 4, 1.0), scaled(o.scale, 100000), derive_seed(o.seed, 13)));
  out.push_back(check_coupling_decay(ChainParams::lazy(2, 10, 1.0), {1, 5, 10, 20}, scaled(o.scale, 20000),
                                     derive_seed(o.seed, 14)));
  out.push_back(mixing_report(derive_seed(o.seed, 15)));
  return out;
}

std::vector<MomentReport> suite_estimators(const SuiteOptions& o) {
  std::vector<MomentReport> out;
  out.push_back(check_sphere_moments(5, scaled(o.scale, 100000), derive_seed(o.seed, 21)));
  out.push_back(check_level_frequencies(scaled(o.scale, 1000000), derive_seed(o.seed, 22)));
  out.push_back(check_quadratic_exactness(8, {1e-8, 1e-2, 1.0}, scaled(o.scale, 500), derive_seed(o.seed, 23)));
  out.push_back(check_minibatch_variance(4, {1, 4, 16, 64}, scaled(o.scale, 4000), derive_seed(o.seed, 24)));
  out.push_back(check_rd_mean(4, 1, scaled(o.scale, 100000), derive_seed(o.seed, 25)));
  MarkovVarianceConfig mv;
  mv.reps = scaled(o.scale, 1000);
  const Oracle q(quadratic(4));
  out.push_back(check_markov_variance(q, Vector::Constant(4, 0.5), mv, derive_seed(o.seed, 26)));
  return out;
}

std::vector<MomentReport> suite_smoothing(const SuiteOptions& o) {
  std::vector<MomentReport> out;
  std::uint64_t k = 0;
  for (std::size_t d : {2, 8})
    for (double t : {0.1, 1.0}) {
      const auto p = quadratic(d);
      out.push_back(check_smoothing(*p, Vector::Constant(static_cast<Eigen::Index>(d), 0.3), t,
                                    scaled(o.scale, 20000), derive_seed(o.seed, 31 + k++)));
    }
  ProblemSpec ns;
  ns.kind = ProblemKind::NonsmoothL1;
  ns.dim = 4;
  ns.mu = 0.5;
  ns.l1_weight = 0.2;
  const auto nsp = make_problem(ns);
  out.push_back(check_smoothing_lipschitz(*nsp, 0.1, scaled(o.scale, 1000), 32, derive_seed(o.seed, 36)));
  out.push_back(check_ball_moment(2, scaled(o.scale, 100000), derive_seed(o.seed, 37)));
  out.push_back(check_ball_moment(8, scaled(o.scale, 100000), derive_seed(o.seed, 38)));
  return out;
}

std::vector<MomentReport> suite_mlmc(const SuiteOptions& o) {
  std::vector<MomentReport> out;
  const std::size_t d = 8;
  MlmcConfig tele = MlmcConfig::custom(4, 16.0, 1);
  tele.variant = o.mlmc_variant;
  const Oracle q(quadratic(d));
  out.push_back(check_mlmc_telescoping(q, ChainParams::lazy(d, 8, 0.5), Vector::Constant(d, 0.5), tele,
                                       {1e-2, Feedback::TwoPoint}, scaled(o.scale, 20000), derive_seed(o.seed, 41)));
  MlmcConfig cond = MlmcConfig::custom(4, 64.0, 1);
  cond.variant = o.mlmc_variant;
  out.push_back(check_mlmc_conditional_mean(4, 64, 1.0, cond, scaled(o.scale, 20000), derive_seed(o.seed, 42)));
  MlmcConfig lay = MlmcConfig::custom(1, 8.0, 1);
  lay.variant = o.mlmc_variant;
  out.push_back(check_mlmc_layout(lay, scaled(o.scale, 100000), derive_seed(o.seed, 43)));
  out.push_back(check_mlmc_call_mean(MlmcConfig::custom(3, 64.0, 1), scaled(o.scale, 50000), derive_seed(o.seed, 44)));
  MlmcSweepConfig sb;
  sb.tau = 2;
  sb.reps = scaled(o.scale, 4000);
  out.push_back(check_mlmc_variance_vs_B(sb, {1, 4, 16}, derive_seed(o.seed, 45)));
  MlmcSweepConfig sd;
  sd.tau = 256;
  sd.noise_std = 0.5;
  sd.B = 128;
  sd.reps = scaled(o.scale, 1000);
  out.push_back(check_mlmc_variance_vs_d(sd, {4, 8, 16, 32}, derive_seed(o.seed, 46)));
  MlmcSweepConfig sm;
  sm.tau = 256;
  sm.noise_std = 0.25;
  sm.reps = scaled(o.scale, 40000);
  out.push_back(check_mlmc_bias_vs_M(sm, {4, 16, 64, 256}, 1.0, derive_seed(o.seed, 47)));
  return out;
}

std::vector<MomentReport> suite_optimizer(const SuiteOptions& o) {
  std::vector<MomentReport> out;
  ProblemSpec spec;
  spec.kind = ProblemKind::DiagQuadratic;
  spec.dim = 4;
  spec.mu = 0.1;
  spec.lips_grad = 1.0;
  const auto prob = make_problem(spec);
  const Oracle oracle(prob);
  const ChainParams silent = ChainParams::lazy(4, 1, 0.0);
  const Vector x0 = Vector::Constant(4, 0.05);

  TuneRequest req;
  req.mu = 0.1;
  req.L = 1.0;
  req.dim = 4;
  req.epsilon = 1e-8;
  const TuningResult tuned = tune_theorem(req);
  const MomentumParams prm =
      derive_params(0.1, 1.0, tuned.gamma, tuned.p, 1, Feedback::TwoPoint, true, tuned.t, 4, 1000);

  std::vector<RunRecord> runs(scaled(o.scale, 200, 20));
  parallel_for(runs.size(), [&](std::size_t i) { runs[i] = run(oracle, silent, prm, x0, derive_seed(o.seed, i)); });
  MomentReport det;
  det.name = "deterministic convergence";
  det.reps = runs.size();
  double worst = 0.0;
  for (const auto& rec : runs) worst = std::max(worst, rec.last().err_sq);
  det.add_row({"largest final |x - x*|^2", worst, 0.0, 1e-8, worst <= 1e-8});
  const RunRecord again = run(oracle, silent, prm, x0, derive_seed(o.seed, 0));
  bool same = again.rows.size() == runs[0].rows.size();
  for (std::size_t k = 0; same && k < again.rows.size(); ++k)
    same = again.rows[k].err_sq == runs[0].rows[k].err_sq && again.rows[k].calls == runs[0].rows[k].calls;
  det.add_row({"replay identical", same ? 1.0 : 0.0, 0.0, 1.0, same});
  det.add_row({"derived fields consistent", prm.consistent() ? 1.0 : 0.0, 0.0, 1.0, prm.consistent()});
  out.push_back(det);
  out.push_back(check_lyapunov_descent(runs, 10));

  // exact gradients, p = 1: the descent holds along the path
  const MomentumParams exact_prm = derive_params(0.1, 1.0, 0.75, 1.0, 1, Feedback::TwoPoint, true, 1e-3, 4, 200);
  MomentReport path;
  path.name = "Lyapunov descent, exact gradients";
  for (const auto& [coef, from] : {std::pair<double, std::size_t>{6.0, 0}, {1.0, 10}}) {
    RunOptions ro;
    ro.lyapunov_coef = coef;
    const RunRecord ex = run(oracle, silent, exact_prm, x0, o.seed, ro, make_exact_estimator(prob));
    const double inc = check_lyapunov_descent({ex}, from).fitted["pathwise_increases"];
    path.add_row({"increases, coefficient " + fmt("", coef) + "/mu, k > " + std::to_string(from), inc, 0.0, 0.0,
                  inc == 0.0});
  }
  out.push_back(path);

  const auto q = quadratic(4);
  const Oracle qo(q);
  const MomentumParams qp = derive_params(1.0, 1.0, 0.05, std::nullopt, 1, Feedback::TwoPoint, true, 1e-2, 4, 50);
  const ChainParams noise = ChainParams::lazy(4, 4, 0.05);
  std::vector<RunRecord> records(scaled(o.scale, 200, 20));
  parallel_for(records.size(), [&](std::size_t i) {
    records[i] = run(qo, noise, qp, Vector::Constant(4, 0.05), derive_seed(o.seed, 500 + i));
  });
  MomentReport calls = oracle_call_stats(records);
  const double per_iter = calls.fitted["mean_per_iteration"];
  const double ref = qp.mlmc().expected_oracle_calls();
  calls.add_row({"per-iteration mean vs 2 l (1 + j_max)", per_iter, calls.rows[2].se, ref,
                 within_se(per_iter, ref, calls.rows[2].se)});
  out.push_back(calls);
  return out;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"chains", "estimators", "smoothing", "mlmc", "optimizer", "all"};
  return names;
}

std::vector<MomentReport> run_suite(const std::string& name, const SuiteOptions& options) {
  if (name == "chains") return suite_chains(options);
  if (name == "estimators") return suite_estimators(options);
  if (name == "smoothing") return suite_smoothing(options);
  if (name == "mlmc") return suite_mlmc(options);
  if (name == "optimizer") return suite_optimizer(options);
  if (name == "all") {
    std::vector<MomentReport> all;
    for (const auto& n : suite_names()) {
      if (n == "all") continue;
      auto part = run_suite(n, options);
      all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
  }
  std::string known;
  for (const auto& n : suite_names()) known += (known.empty() ? "" : " | ") + n;
  throw UsageError("unknown suite '" + name + "' (" + known + ")");
}

}  // namespace mzo
