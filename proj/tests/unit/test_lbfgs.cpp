#include <doctest.h>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/lbfgs.hpp"

using namespace nmodes;

namespace {

double rosenbrock(const Eigen::VectorXd& x, Eigen::VectorXd& g) {
  double f = 0.0;
  g.setZero(x.size());
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i], b = 1.0 - x[i];
    f += 100.0 * a * a + b * b;
    g[i] += -400.0 * a * x[i] - 2.0 * b;
    g[i + 1] += 200.0 * a;
  }
  return f;
}

}  // namespace

TEST_CASE("minimizes Rosenbrock") {
  Eigen::VectorXd x0(6);
  x0 << -1.2, 1.0, -1.2, 1.0, -1.2, 1.0;
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-10;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, x0, opt);
  CHECK(r.converged);
  CHECK(r.status == LbfgsStatus::converged);
  CHECK((r.x - Eigen::VectorXd::Ones(6)).norm() < 1e-7);
}

TEST_CASE("ill-conditioned quadratic converges") {
  const int n = 50;
  Eigen::VectorXd d(n);
  for (int i = 0; i < n; ++i) d[i] = std::pow(10.0, 4.0 * i / (n - 1));
  auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = d.cwiseProduct(x);
    return 0.5 * x.dot(g);
  };
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-8;
  opt.max_iterations = 5000;  // limited memory needs far more than n steps here
  const LbfgsResult r = lbfgs_minimize(f, Eigen::VectorXd::Ones(n), opt);
  CHECK(r.converged);
  CHECK(r.x.norm() < 1e-8);
}

TEST_CASE("monotone decrease over accepted steps") {
  Lbfgs opt;
  Eigen::VectorXd x(2), g;
  x << -1.2, 1.0;
  double f = rosenbrock(x, g);
  for (int k = 0; k < 40; ++k) {
    const double before = f;
    const auto s = opt.step(rosenbrock, x, f, g);
    if (!s.accepted) break;
    CHECK(f <= before);
  }
}

TEST_CASE("an inconsistent gradient makes the line search fail") {
  // The returned gradient points uphill, so no step satisfies sufficient decrease.
  auto bad = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -x;
    return 0.5 * x.squaredNorm();
  };
  const LbfgsResult r = lbfgs_minimize(bad, Eigen::VectorXd::Ones(3));
  CHECK_FALSE(r.converged);
  CHECK(r.status == LbfgsStatus::line_search_failed);
  CHECK(r.f <= 1.5);
}

TEST_CASE("non-finite objective values are rejected by the line search") {
  // log barrier: infinite outside x > 0, so large trial steps must be cut back.
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(1);
    if (x[0] <= 0.0) {
      g[0] = std::nan("");
      return std::numeric_limits<double>::infinity();
    }
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  LbfgsOptions opt;
  opt.gradient_tolerance = 1e-10;
  const LbfgsResult r = lbfgs_minimize(f, Eigen::VectorXd::Constant(1, 20.0), opt);
  CHECK(r.converged);
  CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("max iterations is reported") {
  LbfgsOptions opt;
  opt.max_iterations = 3;
  opt.gradient_tolerance = 0.0;
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const LbfgsResult r = lbfgs_minimize(rosenbrock, x0, opt);
  CHECK(r.status == LbfgsStatus::max_iterations);
  CHECK(r.iterations == 3);
  opt.history = 0;
  CHECK_THROWS_AS(lbfgs_minimize(rosenbrock, x0, opt), InputError);
}
