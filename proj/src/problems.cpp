#include "mzo/problems.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <type_traits>

#include "mzo/sampling.hpp"

namespace mzo {

std::string_view to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::QuadraticMarkov: return "quadratic_markov";
    case ProblemKind::DiagQuadratic: return "diag_quadratic";
    case ProblemKind::NonsmoothL1: return "nonsmooth_l1";
    case ProblemKind::HardOnePoint: return "hard_one_point";
    case ProblemKind::HardTwoPoint: return "hard_two_point";
  }
  return "?";
}

std::string_view to_string(Feedback feedback) {
  return feedback == Feedback::OnePoint ? "one_point" : "two_point";
}

std::string_view to_string(Precision precision) {
  switch (precision) {
    case Precision::Double: return "double";
    case Precision::Extended: return "extended";
    case Precision::Quad: return "quad";
  }
  return "?";
}

Precision parse_precision(std::string_view name) {
  for (auto p : {Precision::Double, Precision::Extended, Precision::Quad})
    if (name == to_string(p)) return p;
  throw ConfigError("unknown precision '" + std::string(name) + "' (double | extended | quad)");
}

ProblemKind parse_problem_kind(std::string_view name) {
  for (auto k : {ProblemKind::QuadraticMarkov, ProblemKind::DiagQuadratic, ProblemKind::NonsmoothL1,
                 ProblemKind::HardOnePoint, ProblemKind::HardTwoPoint})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown problem kind '" + std::string(name) + "'");
}

Feedback parse_feedback(std::string_view name) {
  if (name == "one_point" || name == "one") return Feedback::OnePoint;
  if (name == "two_point" || name == "two") return Feedback::TwoPoint;
  throw ConfigError("unknown feedback '" + std::string(name) + "' (one_point | two_point)");
}

Vector PointView::materialize() const {
  Vector out(size());
  for (Eigen::Index i = 0; i < size(); ++i) out[i] = static_cast<double>((*this)[i]);
  return out;
}

long double hard_instance_s_prime(long double delta, long double xi) {
  const long double a = std::fabs(xi);
  if (a <= delta) return 2 * delta;
  if (a <= 2 * delta) return -2 * (a - 2 * delta);
  return 0.0L;
}

void Problem::check_dim(const Vector& x) const {
  if (static_cast<std::size_t>(x.size()) != dim())
    throw UsageError("point has length " + std::to_string(x.size()) + ", problem dimension is " +
                     std::to_string(dim()));
}

double Problem::min_value() const { return value(minimizer_); }

std::optional<Vector> Problem::smoothed_gradient(const Vector&, double) const { return std::nullopt; }

std::pair<long double, long double> Problem::family_range(const PointView& x) const {
  const long double f = value(x);
  return {f, f};
}

namespace {

template <class T>
T absval(T v) {
  return v < 0 ? -v : v;
}

template <class T>
T half_sq_norm(const PointView& x) {
  T s = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const T xi = x.at<T>(i);
    s += xi * xi;
  }
  return s / 2;
}

template <class T>
T dot(const PointView& x, const Vector& z) {
  T s = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) s += x.at<T>(i) * static_cast<T>(z[i]);
  return s;
}

template <class T>
T s_function(T delta, T xi) {
  const T a = absval(xi);
  T v;
  if (a <= delta) {
    v = 2 * delta * a;
  } else if (a <= 2 * delta) {
    const T u = a - 2 * delta;
    v = 3 * delta * delta - u * u;
  } else {
    v = 3 * delta * delta;
  }
  return xi < 0 ? -v : v;
}

Vector sign_vector(const ProblemSpec& spec) {
  Vector w = Vector::Ones(static_cast<Eigen::Index>(spec.dim));
  if (spec.signs.empty()) return w;
  if (spec.signs.size() != spec.dim)
    throw ConfigError("problem: signs has " + std::to_string(spec.signs.size()) +
                      " entries, expected " + std::to_string(spec.dim));
  for (std::size_t i = 0; i < spec.dim; ++i) {
    if (spec.signs[i] != 1 && spec.signs[i] != -1) throw ConfigError("problem: signs must be +1 or -1");
    w[static_cast<Eigen::Index>(i)] = spec.signs[i];
  }
  return w;
}

// Concrete kinds implement eval<T>(x, z) with z == nullptr meaning f(x).
template <class Derived>
class ProblemBase : public Problem {
 public:
  using Problem::Problem;
  using Problem::value;
  long double value(const PointView& x) const override {
    return static_cast<const Derived*>(this)->template eval<long double>(x, nullptr);
  }
  long double sample(const PointView& x, const Vector& z) const override {
    return static_cast<const Derived*>(this)->template eval<long double>(x, &z);
  }
  double sample_double(const PointView& x, const Vector& z) const override {
    return static_cast<const Derived*>(this)->template eval<double>(x, &z);
  }
  Quad sample_quad(const PointView& x, const Vector& z) const override {
    return static_cast<const Derived*>(this)->template eval<Quad>(x, &z);
  }
};

// f = 1/2 |x|^2, F = f + <x, Z>.
class QuadraticMarkov final : public ProblemBase<QuadraticMarkov> {
 public:
  explicit QuadraticMarkov(ProblemSpec spec) : ProblemBase(std::move(spec)) {
    mu_ = 1.0;
    lips_grad_ = 1.0;
    lips_f_ = 1.0;  // on the unit ball
    minimizer_ = Vector::Zero(static_cast<Eigen::Index>(dim()));
  }
  template <class T>
  T eval(const PointView& x, const Vector* z) const {
    if (!z) return half_sq_norm<T>(x);
    if constexpr (std::is_same_v<T, double>) {
      const auto p = x.array();
      return (p * (0.5 * p + z->array())).sum();
    }
    T s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T xi = x.at<T>(i);
      s += xi * (xi / 2 + static_cast<T>((*z)[i]));
    }
    return s;
  }
  Vector gradient(const Vector& x) const override { return x; }
  std::optional<Vector> smoothed_gradient(const Vector& x, double) const override { return x; }
};

// f = 1/2 x^T diag(lambda) x with lambda log-spaced in [mu, L].
class DiagQuadratic final : public ProblemBase<DiagQuadratic> {
 public:
  explicit DiagQuadratic(ProblemSpec spec) : ProblemBase(std::move(spec)) {
    const double mu = spec_.mu;
    const double L = spec_.lips_grad.value_or(mu);
    const auto d = static_cast<Eigen::Index>(dim());
    lambda_.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double frac = d == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(d - 1);
      lambda_[i] = mu * std::pow(L / mu, frac);
    }
    lambda_[d - 1] = d == 1 ? mu : L;
    mu_ = mu;
    lips_grad_ = lambda_[d - 1];
    lips_f_ = lambda_[d - 1];
    minimizer_ = Vector::Zero(d);
  }
  template <class T>
  T eval(const PointView& x, const Vector* z) const {
    T s = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T xi = x.at<T>(i);
      s += xi * (static_cast<T>(lambda_[i]) * xi / 2 + (z ? static_cast<T>((*z)[i]) : T(0)));
    }
    return s;
  }
  Vector gradient(const Vector& x) const override { return lambda_.cwiseProduct(x); }
  std::optional<Vector> smoothed_gradient(const Vector& x, double) const override { return gradient(x); }
  const Vector& eigenvalues() const { return lambda_; }

 private:
  Vector lambda_;
};

// f = mu/2 |x|^2 + c |x|_1, F = f + <x, Z>.
class NonsmoothL1 final : public ProblemBase<NonsmoothL1> {
 public:
  explicit NonsmoothL1(ProblemSpec spec) : ProblemBase(std::move(spec)) {
    if (!(spec_.l1_weight >= 0.0) || !std::isfinite(spec_.l1_weight))
      throw ConfigError("problem: l1_weight must be finite and nonnegative");
    mu_ = spec_.mu;
    lips_f_ = spec_.mu + spec_.l1_weight * std::sqrt(static_cast<double>(dim()));
    minimizer_ = Vector::Zero(static_cast<Eigen::Index>(dim()));
  }
  template <class T>
  T eval(const PointView& x, const Vector* z) const {
    T l1 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) l1 += absval(x.at<T>(i));
    const T f = static_cast<T>(spec_.mu) * half_sq_norm<T>(x) + static_cast<T>(spec_.l1_weight) * l1;
    return z ? f + dot<T>(x, *z) : f;
  }
  Vector gradient(const Vector& x) const override {
    Vector g = spec_.mu * x;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (x[i] != 0.0) g[i] += x[i] > 0 ? spec_.l1_weight : -spec_.l1_weight;
    return g;
  }
};

// f_w = mu/2 |x|^2 + <S(x), w>, S_i = (mu/4) s(x_i); F = f_w + <S(x), Z>.
class HardOnePoint final : public ProblemBase<HardOnePoint> {
 public:
  explicit HardOnePoint(ProblemSpec spec) : ProblemBase(std::move(spec)) {
    omega_ = sign_vector(spec_);
    const double d = static_cast<double>(dim());
    const double N = static_cast<double>(std::max<std::uint64_t>(spec_.horizon, 1));
    const double tau = static_cast<double>(std::max<std::uint64_t>(spec_.tau, 1));
    delta_ = spec_.delta.value_or(std::pow(spec_.sigma_sq * tau / (spec_.mu * spec_.mu * d * N), 0.25));
    if (!(delta_ > 0.0) || !std::isfinite(delta_)) throw ConfigError("problem: delta must be positive");
    noise_var_ = spec_.noise_var.value_or(8.0 * N / tau);
    if (!(noise_var_ >= 0.0)) throw ConfigError("problem: noise_var must be nonnegative");
    mu_ = spec_.mu / 2;
    lips_grad_ = 1.5 * spec_.mu;
    minimizer_ = -0.5 * delta_ * omega_;
    // |S_i'| <= mu/4 * 2 delta
    lips_f_ = spec_.mu * (1.0 + 0.5 * delta_) * std::sqrt(d);
  }
  std::optional<double> preferred_noise_std() const override { return std::sqrt(noise_var_); }

  template <class T>
  T s_term(const PointView& x, Eigen::Index i) const {
    return static_cast<T>(spec_.mu) / 4 * s_function<T>(static_cast<T>(delta_), x.at<T>(i));
  }
  template <class T>
  T eval(const PointView& x, const Vector* z) const {
    T s = static_cast<T>(spec_.mu) * half_sq_norm<T>(x);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const T w = z ? static_cast<T>(omega_[i]) + static_cast<T>((*z)[i]) : static_cast<T>(omega_[i]);
      s += s_term<T>(x, i) * w;
    }
    return s;
  }
  Vector gradient(const Vector& x) const override {
    Vector g = spec_.mu * x;
    for (Eigen::Index i = 0; i < x.size(); ++i)
      g[i] += spec_.mu / 4 * static_cast<double>(hard_instance_s_prime(delta_, x[i])) * omega_[i];
    return g;
  }
  std::pair<long double, long double> family_range(const PointView& x) const override {
    const long double base = static_cast<long double>(spec_.mu) * half_sq_norm<long double>(x);
    long double spread = 0.0L;
    for (Eigen::Index i = 0; i < x.size(); ++i) spread += std::fabs(s_term<long double>(x, i));
    return {base - spread, base + spread};
  }

 private:
  Vector omega_;
  double delta_ = 0.0;
  double noise_var_ = 0.0;
};

// f_v = mu/2 |x|^2 + delta <x, v>; F = mu/2 |x|^2 + <x, delta v + Z>.
class HardTwoPoint final : public ProblemBase<HardTwoPoint> {
 public:
  explicit HardTwoPoint(ProblemSpec spec) : ProblemBase(std::move(spec)) {
    v_ = sign_vector(spec_);
    const double d = static_cast<double>(dim());
    const double N = static_cast<double>(std::max<std::uint64_t>(spec_.horizon, 1));
    delta_ = spec_.delta.value_or(std::sqrt(spec_.sigma_sq / (4.0 * N)));
    if (!(delta_ > 0.0) || !std::isfinite(delta_)) throw ConfigError("problem: delta must be positive");
    noise_var_ = spec_.noise_var.value_or(spec_.sigma_sq / d);
    if (!(noise_var_ >= 0.0)) throw ConfigError("problem: noise_var must be nonnegative");
    mu_ = spec_.mu;
    lips_grad_ = spec_.mu;
    lips_f_ = spec_.mu + delta_ * std::sqrt(d);
    minimizer_ = -(delta_ / spec_.mu) * v_;
  }
  std::optional<double> preferred_noise_std() const override { return std::sqrt(noise_var_); }
  template <class T>
  T eval(const PointView& x, const Vector* z) const {
    const T f = static_cast<T>(spec_.mu) * half_sq_norm<T>(x) + static_cast<T>(delta_) * dot<T>(x, v_);
    return z ? f + dot<T>(x, *z) : f;
  }
  Vector gradient(const Vector& x) const override { return spec_.mu * x + delta_ * v_; }
  std::optional<Vector> smoothed_gradient(const Vector& x, double) const override { return gradient(x); }
  std::pair<long double, long double> family_range(const PointView& x) const override {
    const long double base = static_cast<long double>(spec_.mu) * half_sq_norm<long double>(x);
    long double l1 = 0.0L;
    for (Eigen::Index i = 0; i < x.size(); ++i) l1 += std::fabs(x[i]);
    const long double spread = static_cast<long double>(delta_) * l1;
    return {base - spread, base + spread};
  }

 private:
  Vector v_;
  double delta_ = 0.0;
  double noise_var_ = 0.0;
};

}  // namespace

long double hard_instance_s(long double delta, long double xi) { return s_function(delta, xi); }

std::shared_ptr<const Problem> make_problem(const ProblemSpec& spec) {
  if (spec.dim == 0) throw ConfigError("problem: dim must be positive");
  if (!(spec.mu > 0.0) || !std::isfinite(spec.mu)) throw ConfigError("problem: mu must be positive");
  if (spec.lips_grad) {
    if (!(*spec.lips_grad > 0.0) || !std::isfinite(*spec.lips_grad))
      throw ConfigError("problem: lips_grad must be positive");
    if (spec.mu > *spec.lips_grad) throw ConfigError("problem: mu must not exceed lips_grad");
  }
  if (!(spec.sigma_sq >= 0.0) || !std::isfinite(spec.sigma_sq))
    throw ConfigError("problem: sigma_sq must be finite and nonnegative");
  switch (spec.kind) {
    case ProblemKind::QuadraticMarkov: return std::make_shared<QuadraticMarkov>(spec);
    case ProblemKind::DiagQuadratic: return std::make_shared<DiagQuadratic>(spec);
    case ProblemKind::NonsmoothL1: return std::make_shared<NonsmoothL1>(spec);
    case ProblemKind::HardOnePoint: return std::make_shared<HardOnePoint>(spec);
    case ProblemKind::HardTwoPoint: return std::make_shared<HardTwoPoint>(spec);
  }
  throw ConfigError("problem: unknown kind");
}

double AdversarialSpec::operator()(const PointView& x) const {
  switch (shape) {
    case Shape::Zero: return 0.0;
    case Shape::Constant: return delta_bound;
    case Shape::SignHash: {
      std::uint64_t h = 0x51ed270b27a4d1c3ULL;
      for (Eigen::Index i = 0; i < x.size(); ++i)
        h = mix64(h ^ std::bit_cast<std::uint64_t>(static_cast<double>(x[i])));
      const double angle = static_cast<double>(h >> 11) * 0x1p-53 * 6.283185307179586 * 1024.0;
      return std::sin(angle) < 0.0 ? -delta_bound : delta_bound;
    }
  }
  return 0.0;
}

long double clip_oracle(long double reply, long double f_min, long double f_max, double t_clip,
                        double sigma1) {
  if (f_min > f_max) throw UsageError("clip_oracle: f_min exceeds f_max");
  const long double band = static_cast<long double>(t_clip) * sigma1;
  return std::max(f_min - band, std::min(reply, f_max + band));
}

double clip_oracle(double reply, double f_min, double f_max, double t_clip, double sigma1) {
  return static_cast<double>(clip_oracle(static_cast<long double>(reply), static_cast<long double>(f_min),
                                         static_cast<long double>(f_max), t_clip, sigma1));
}

Oracle::Oracle(std::shared_ptr<const Problem> problem, AdversarialSpec adversary,
               std::optional<ClipSpec> clip, Precision precision)
    : problem_(std::move(problem)), adversary_(adversary), clip_(clip), precision_(precision) {
  if (!problem_) throw ConfigError("oracle: null problem");
  if (!(adversary_.delta_bound >= 0.0) || !std::isfinite(adversary_.delta_bound))
    throw ConfigError("oracle: adversarial bound must be finite and nonnegative");
  if (clip_ && (!(clip_->t_clip > 0.0) || !(clip_->sigma1 >= 0.0)))
    throw ConfigError("oracle: clip needs t_clip > 0 and sigma1 >= 0");
}

Quad Oracle::evaluate(const PointView& x, const Vector& z) const {
  Quad v = 0;
  switch (precision_) {
    case Precision::Double: v = problem_->sample_double(x, z); break;
    case Precision::Extended: v = problem_->sample(x, z); break;
    case Precision::Quad: v = problem_->sample_quad(x, z); break;
  }
  if (adversary_.active()) v += adversary_(x);
  if (clip_) {
    const auto [lo, hi] = problem_->family_range(x);
    const long double band = static_cast<long double>(clip_->t_clip) * clip_->sigma1;
    if (lo > hi) throw UsageError("clip: family range is empty");
    if (v < Quad(lo - band)) v = Quad(lo - band);
    if (v > Quad(hi + band)) v = Quad(hi + band);
  }
  return v;
}

OracleReply Oracle::query(ChainState& chain, const Vector& x, const Vector& e, double t,
                          QueryMode mode) const {
  problem_->check_dim(x);
  problem_->check_dim(e);
  if (static_cast<std::size_t>(chain.current().size()) != problem_->noise_dim())
    throw UsageError("oracle: chain dimension " + std::to_string(chain.current().size()) +
                     " does not match noise dimension " + std::to_string(problem_->noise_dim()));
  OracleReply reply;
  const Vector& z = chain.current();
  switch (mode) {
    case QueryMode::TwoPointPair:
      reply.plus = evaluate(PointView(x, e, t), z);
      reply.minus = evaluate(PointView(x, e, -t), z);
      reply.evaluations = 2;
      break;
    case QueryMode::OnePointPlus:
      reply.plus = evaluate(PointView(x, e, t), z);
      reply.evaluations = 1;
      break;
    case QueryMode::OnePointMinus:
      reply.minus = evaluate(PointView(x, e, -t), z);
      reply.evaluations = 1;
      break;
  }
  chain.charge_evaluations(reply.evaluations);
  chain.advance();
  reply.chain_steps = 1;
  return reply;
}

OracleReply Oracle::difference_pair(ChainState& chain, const Vector& x, const Vector& e, double t,
                                    Feedback feedback) const {
  if (feedback == Feedback::TwoPoint) return query(chain, x, e, t, QueryMode::TwoPointPair);
  OracleReply out = query(chain, x, e, t, QueryMode::OnePointPlus);
  const OracleReply minus = query(chain, x, e, t, QueryMode::OnePointMinus);
  out.minus = minus.minus;
  out.evaluations += minus.evaluations;
  out.chain_steps += minus.chain_steps;
  return out;
}

std::pair<OracleReply, ChainState> eval_oracle(const Oracle& oracle, ChainState chain,
                                               const Vector& x, const Vector& e, double t,
                                               QueryMode mode) {
  OracleReply reply = oracle.query(chain, x, e, t, mode);
  return {reply, std::move(chain)};
}

double eval_objective(const Problem& problem, const Vector& x) {
  problem.check_dim(x);
  return problem.value(x);
}

double noise_second_moment(const Oracle& oracle, const ChainParams& noise, const Vector& x,
                           std::size_t draws, std::uint64_t seed) {
  const Problem& p = oracle.problem();
  p.check_dim(x);
  if (draws == 0) throw ConfigError("noise_second_moment: draws must be positive");
  ChainState chain = new_chain(ChainParams::iid(noise.dim, noise.noise_std), seed);
  const long double f = p.value(PointView(x));
  long double acc = 0.0L;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto diff = static_cast<long double>(oracle.evaluate(PointView(x), chain.current())) - f;
    acc += diff * diff;
    chain.advance();
  }
  return static_cast<double>(acc / static_cast<long double>(draws));
}

AssumptionReport validate_assumptions(const Oracle& oracle, const ChainParams& noise,
                                      std::size_t samples, std::uint64_t seed,
                                      std::size_t noise_draws) {
  const Problem& p = oracle.problem();
  if (samples < 2) throw ConfigError("validate_assumptions: samples must be >= 2");
  if (noise.dim != p.noise_dim()) throw UsageError("validate_assumptions: noise dimension mismatch");
  const std::size_t d = p.dim();
  Rng rng = make_rng(seed, 0);
  ChainState chain = new_chain(ChainParams::iid(noise.dim, noise.noise_std), derive_seed(seed, 1));

  AssumptionReport r;
  r.regime = oracle.noise_regime();
  r.pairs = samples;
  r.strong_convexity_min = std::numeric_limits<double>::infinity();
  const bool smooth = p.lips_grad().has_value();
  if (smooth) r.grad_lipschitz_max = 0.0;
  if (smooth && !oracle.clip()) r.grad_noise_second_moment_max = 0.0;

  double uniform_bound = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < samples; ++k) {
    const Vector x = sample_ball(d, rng);
    const Vector y = sample_ball(d, rng);
    const double dist_sq = (x - y).squaredNorm();
    if (dist_sq < 1e-12) continue;
    const double fx = p.value(x), fy = p.value(y);
    const Vector gx = p.gradient(x), gy = p.gradient(y);
    const double bx = fx - fy - gy.dot(x - y);
    const double by = fy - fx - gx.dot(y - x);
    r.strong_convexity_min = std::min({r.strong_convexity_min, 2.0 * bx / dist_sq, 2.0 * by / dist_sq});
    r.func_lipschitz_max = std::max(r.func_lipschitz_max, std::abs(fx - fy) / std::sqrt(dist_sq));
    if (smooth)
      *r.grad_lipschitz_max = std::max(*r.grad_lipschitz_max, (gx - gy).norm() / std::sqrt(dist_sq));

    // noise moments at x
    long double acc = 0.0L, grad_acc = 0.0L;
    const long double f = p.value(PointView(x));
    if (oracle.clip()) {
      const auto [lo, hi] = p.family_range(PointView(x));
      uniform_bound = std::min<double>(uniform_bound, static_cast<double>(std::max(f - lo, hi - f)) +
                                                          oracle.clip()->t_clip * oracle.clip()->sigma1);
    }
    for (std::size_t i = 0; i < noise_draws; ++i) {
      const Vector& z = chain.current();
      const auto diff = static_cast<long double>(oracle.evaluate(PointView(x), z)) - f;
      acc += diff * diff;
      r.noise_sup_sq = std::max(r.noise_sup_sq, static_cast<double>(diff * diff));
      if (r.grad_noise_second_moment_max) {
        // central differences of F - f along each axis
        const double h = 1e-5;
        long double g2 = 0.0L;
        Vector axis = Vector::Zero(static_cast<Eigen::Index>(d));
        for (std::size_t j = 0; j < d; ++j) {
          axis[static_cast<Eigen::Index>(j)] = 1.0;
          const long double fp = p.sample(PointView(x, axis, h), z) - p.value(PointView(x, axis, h));
          const long double fm = p.sample(PointView(x, axis, -h), z) - p.value(PointView(x, axis, -h));
          const long double gj = (fp - fm) / (2.0L * h);
          g2 += gj * gj;
          axis[static_cast<Eigen::Index>(j)] = 0.0;
        }
        grad_acc += g2;
      }
      chain.advance();
    }
    const double n = static_cast<double>(std::max<std::size_t>(noise_draws, 1));
    r.noise_second_moment_max = std::max(r.noise_second_moment_max, static_cast<double>(acc) / n);
    if (r.grad_noise_second_moment_max)
      *r.grad_noise_second_moment_max =
          std::max(*r.grad_noise_second_moment_max, static_cast<double>(grad_acc) / n);
  }

  if (r.regime == NoiseRegime::UniformBound) {
    // band half-width around f bounds |F_hat - f|
    r.uniform_noise_bound_holds = r.noise_sup_sq <= uniform_bound * uniform_bound * (1.0 + 1e-12);
    if (!r.uniform_noise_bound_holds) r.notes.emplace_back("clipped output left its band");
  } else {
    r.uniform_noise_bound_holds = noise.noise_std == 0.0;
    if (!r.uniform_noise_bound_holds)
      r.notes.emplace_back("Gaussian noise is unbounded: only the second-moment bound holds");
  }
  if (r.strong_convexity_min < p.mu() * (1.0 - 1e-9))
    r.notes.emplace_back("observed strong convexity below declared mu");
  if (smooth && *r.grad_lipschitz_max > *p.lips_grad() * (1.0 + 1e-9))
    r.notes.emplace_back("observed gradient Lipschitz constant above declared L");
  if (p.lips_f() && r.func_lipschitz_max > *p.lips_f() * (1.0 + 1e-9))
    r.notes.emplace_back("observed function Lipschitz constant above declared G");
  return r;
}

}  // namespace mzo
