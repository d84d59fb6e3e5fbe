#include <doctest.h>

#include <cmath>
#include <random>

#include "mzo/problems.hpp"
#include "support.hpp"

using namespace mzo;

namespace {

std::shared_ptr<const Problem> hard_one_point(std::size_t d, double delta, double mu, std::vector<int> signs = {}) {
  ProblemSpec spec;
  spec.kind = ProblemKind::HardOnePoint;
  spec.dim = d;
  spec.mu = mu;
  spec.delta = delta;
  spec.signs = std::move(signs);
  return make_problem(spec);
}

}  // namespace

TEST_SUITE("problems") {
  TEST_CASE("quadratic values") {
    const auto q = testing::quadratic(2);
    CHECK(eval_objective(*q, Vector::Zero(2)) == 0.0);
    CHECK(eval_objective(*q, Vector::Ones(2)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(eval_objective(*q, Vector::Ones(3)), UsageError);
  }

  TEST_CASE("invalid specs") {
    ProblemSpec spec;
    spec.dim = 0;
    CHECK_THROWS_AS(make_problem(spec), ConfigError);
    spec.dim = 2;
    spec.mu = -1.0;
    CHECK_THROWS_AS(make_problem(spec), ConfigError);
    spec.kind = ProblemKind::DiagQuadratic;
    spec.mu = 2.0;
    spec.lips_grad = 1.0;
    CHECK_THROWS_AS(make_problem(spec), ConfigError);
  }

  TEST_CASE("oracle reply at a fixed noise value") {
    const Oracle oracle(testing::quadratic(2));
    Vector x(2), z(2);
    x << 1.0, 0.0;
    z << 0.5, -1.0;
    CHECK(static_cast<double>(oracle.evaluate(PointView(x), z)) == 1.0);

    // zero noise: the reply is f at both query points
    ChainState chain = new_chain(ChainParams::lazy(2, 1, 0.0), 1);
    Vector e(2);
    e << 0.6, 0.8;
    const auto [reply, next] = eval_oracle(oracle, chain, x, e, 0.25, QueryMode::TwoPointPair);
    CHECK(static_cast<double>(reply.plus) == doctest::Approx(eval_objective(oracle.problem(), x + 0.25 * e)));
    CHECK(static_cast<double>(reply.minus) == doctest::Approx(eval_objective(oracle.problem(), x - 0.25 * e)));
    CHECK(reply.evaluations == 2);
    CHECK(next.step() == chain.step() + 1);
    CHECK_THROWS_AS(eval_oracle(oracle, chain, Vector::Ones(3), Vector::Ones(3), 0.1, QueryMode::TwoPointPair),
                    UsageError);
  }

  TEST_CASE("one-point queries advance the chain once each") {
    const Oracle oracle(testing::quadratic(3));
    ChainState chain = new_chain(ChainParams::lazy(3, 1, 1.0), 2);
    const Vector x = Vector::Ones(3), e = Vector::Unit(3, 0);
    const auto r = oracle.difference_pair(chain, x, e, 0.1, Feedback::OnePoint);
    CHECK(r.evaluations == 2);
    CHECK(chain.step() == 2);
    oracle.difference_pair(chain, x, e, 0.1, Feedback::TwoPoint);
    CHECK(chain.step() == 3);
    CHECK(chain.evaluations() == 4);
  }

  TEST_CASE("two-point differences are linear in the noise") {
    const Oracle oracle(testing::quadratic(5), {}, std::nullopt, Precision::Quad);
    Rng rng = make_rng(3);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 200; ++trial) {
      Vector x(5), e(5), z(5);
      for (int i = 0; i < 5; ++i) x[i] = n01(rng), e[i] = n01(rng), z[i] = n01(rng);
      e.normalize();
      const double t = 1e-3;
      const long double lhs = static_cast<long double>(oracle.evaluate(PointView(x, e, t), z) -
                                                       oracle.evaluate(PointView(x, e, -t), z));
      const long double rhs = 2.0L * t * static_cast<long double>((x + z).dot(e));
      CHECK(std::abs(static_cast<double>(lhs - rhs)) <= 1e-15 * (1.0 + std::abs(static_cast<double>(rhs))));
    }
  }

  TEST_CASE("stationary mean of F is f") {
    const Oracle oracle(testing::quadratic(3));
    const Vector x = Vector::Constant(3, 0.7);
    const ChainParams p = ChainParams::iid(3, 1.0);
    RunningStats s;
    for (std::uint64_t i = 0; i < 100000; ++i) {
      const ChainState c = new_chain(p, 50 + i);
      s.add(static_cast<double>(oracle.evaluate(PointView(x), c.current())));
    }
    CHECK(testing::within(s.mean(), eval_objective(oracle.problem(), x), s.standard_error()));
  }

  TEST_CASE("hard instance profile") {
    CHECK(static_cast<double>(hard_instance_s(1.0L, 0.5L)) == 1.0);
    CHECK(static_cast<double>(hard_instance_s(1.0L, 2.0L)) == 3.0);
    CHECK(static_cast<double>(hard_instance_s(1.0L, 1.5L)) == 2.75);
    CHECK(static_cast<double>(hard_instance_s(1.0L, -1.5L)) == -2.75);
    // continuously differentiable at the branch points
    // second-order one-sided differences are exact on each quadratic piece
    const long double delta = 0.3L, h = 1e-5L;
    auto s = [&](long double xi) { return hard_instance_s(delta, xi); };
    for (long double xi : {delta, 2 * delta, -delta, -2 * delta}) {
      const long double left = (3 * s(xi) - 4 * s(xi - h) + s(xi - 2 * h)) / (2 * h);
      const long double right = (-3 * s(xi) + 4 * s(xi + h) - s(xi + 2 * h)) / (2 * h);
      CHECK(std::abs(static_cast<double>(left - right)) <= 1e-10);
      CHECK(std::abs(static_cast<double>(hard_instance_s_prime(delta, xi) - left)) <= 1e-10);
    }
  }

  TEST_CASE("hard instance minimizer") {
    const double delta = 0.3;
    const auto prob = hard_one_point(3, delta, 1.0);
    const Vector& xs = prob->minimizer();
    // gradient of the value by central differences
    for (int i = 0; i < 3; ++i) {
      const long double h = 1e-6L;
      Vector a = xs, b = xs;
      a[i] += static_cast<double>(h);
      b[i] -= static_cast<double>(h);
      const long double g = (prob->value(PointView(a)) - prob->value(PointView(b))) / (2 * h);
      CHECK(std::abs(static_cast<double>(g)) <= 1e-8);
    }
  }

  TEST_CASE("hard instance value at the minimizer matches a grid search") {
    const auto prob = hard_one_point(2, 0.3, 1.0);
    double best = INFINITY;
    Vector y(2);
    const int n = 2001;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        y << -0.5 + i * (1.0 / (n - 1)), -0.5 + j * (1.0 / (n - 1));
        best = std::min(best, eval_objective(*prob, y));
      }
    CHECK(std::abs(eval_objective(*prob, prob->minimizer()) - best) <= 1e-6);
    CHECK(eval_objective(*prob, prob->minimizer()) <= best + 1e-15);
  }

  TEST_CASE("clipping") {
    CHECK(clip_oracle(1.5, 1.0, 2.0, 2.0, 1.0) == 1.5);
    CHECK(clip_oracle(2.0 + 10 * 2.0 * 0.5, 1.0, 2.0, 2.0, 0.5) == 3.0);
    CHECK(clip_oracle(-100.0, 1.0, 2.0, 2.0, 0.5) == 0.0);
    CHECK_THROWS_AS(clip_oracle(0.0, 2.0, 1.0, 2.0, 1.0), UsageError);
  }

  TEST_CASE("clipping bias with t_clip = ln N") {
    const double sigma = 1.0, tc = std::log(10.0);
    const double f = 0.0;
    Rng rng = make_rng(17);
    std::normal_distribution<double> n01;
    RunningStats diff;
    for (int i = 0; i < 1000000; ++i) {
      const double reply = f + sigma * n01(rng);
      diff.add(clip_oracle(reply, f, f + 1.0, tc, sigma) - reply);
    }
    // E (a - xi)+ - E (xi - b)+ for the two cut points a, b in sigma units
    auto excess = [](double a) { return std::exp(-a * a / 2) / std::sqrt(2 * M_PI) - a * 0.5 * std::erfc(a / std::sqrt(2.0)); };
    const double exact = sigma * (excess(tc) - excess((1.0 - f) / sigma + tc));
    CHECK(testing::within(diff.mean(), exact, diff.standard_error()));
    CHECK(std::abs(diff.mean()) <= sigma * std::exp(-tc * tc / 2) + 3 * diff.standard_error());
  }

  TEST_CASE("assumptions of a diagonal quadratic") {
    ProblemSpec spec;
    spec.kind = ProblemKind::DiagQuadratic;
    spec.dim = 5;
    spec.mu = 0.1;
    spec.lips_grad = 1.0;
    const Oracle oracle(make_problem(spec));
    const auto r = validate_assumptions(oracle, ChainParams::lazy(5, 2, 0.1), 2000, 4);
    CHECK(r.strong_convexity_min >= 0.1 - 1e-9);
    CHECK(r.strong_convexity_min <= 0.1 + 0.05);
    REQUIRE(r.grad_lipschitz_max.has_value());
    CHECK(*r.grad_lipschitz_max <= 1.0 + 1e-9);
    CHECK(*r.grad_lipschitz_max >= 1.0 - 0.05);
  }

  TEST_CASE("assumptions of the Gaussian quadratic") {
    const Oracle oracle(testing::quadratic(3));
    const double s = 0.5;
    const auto r = validate_assumptions(oracle, ChainParams::lazy(3, 4, s), 50, 5);
    CHECK(r.regime == NoiseRegime::SecondMoment);
    CHECK_FALSE(r.uniform_noise_bound_holds);
    CHECK_FALSE(r.notes.empty());
    const Vector x(Vector::Constant(3, 0.4));
    const double m = noise_second_moment(oracle, ChainParams::lazy(3, 4, s), x, 100000, 6);
    const double expected = s * s * x.squaredNorm();
    // (F - f)^2 = <x, Z>^2 has variance 2 expected^2
    CHECK(testing::within(m, expected, std::sqrt(2.0 / 100000) * expected));
  }

  TEST_CASE("assumptions of the one-point hard instance") {
    const double mu = 1.0;
    const Oracle oracle(hard_one_point(4, 0.3, mu, {1, -1, 1, -1}));
    const auto r = validate_assumptions(oracle, ChainParams::lazy(4, 1, 0.1), 2000, 7);
    CHECK(r.strong_convexity_min >= mu / 2 - 1e-9);
    REQUIRE(r.grad_lipschitz_max.has_value());
    CHECK(*r.grad_lipschitz_max <= 1.5 * mu + 1e-9);
  }

  TEST_CASE("adversarial perturbations") {
    const auto q = testing::quadratic(3);
    const Vector z = Vector::Zero(3);
    const Vector x = Vector::Constant(3, 0.2);
    const Oracle plain(q), shifted(q, AdversarialSpec::constant(0.01)), hashed(q, AdversarialSpec::sign_hash(0.01));
    CHECK(static_cast<double>(shifted.evaluate(PointView(x), z) - plain.evaluate(PointView(x), z)) ==
          doctest::Approx(0.01));
    int plus = 0, minus = 0;
    Rng rng = make_rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
      Vector y(3);
      for (auto& v : y) v = u(rng);
      const double d = static_cast<double>(hashed.evaluate(PointView(y), z) - plain.evaluate(PointView(y), z));
      CHECK(std::abs(d) <= 0.01 * (1 + 1e-12));
      (d > 0 ? plus : minus)++;
    }
    CHECK(plus > 300);
    CHECK(minus > 300);
    CHECK_THROWS_AS(Oracle(q, AdversarialSpec::constant(-1.0)), ConfigError);
  }
}
