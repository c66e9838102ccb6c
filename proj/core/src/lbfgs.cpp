#include "neuralmodes/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "neuralmodes/errors.hpp"

namespace nmodes {

namespace {

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), clamped
// to the interval; falls back to bisection when the cubic is degenerate.
double cubic_minimizer(double a, double fa, double da, double b, double fb, double db) {
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  if (!(disc >= 0.0) || !std::isfinite(fb) || !std::isfinite(db)) return 0.5 * (a + b);
  const double d2 = std::copysign(std::sqrt(disc), b - a);
  const double t = b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2);
  if (!std::isfinite(t)) return 0.5 * (a + b);
  return std::clamp(t, std::min(a, b), std::max(a, b));
}

struct Trial {
  double alpha = 0.0, f = 0.0, d = 0.0;
};

}  // namespace

void LbfgsOptions::validate() const {
  if (history < 1) throw InputError("lbfgs: history must be >= 1");
  if (!(0.0 < c1 && c1 < c2 && c2 < 1.0)) throw InputError("lbfgs: require 0 < c1 < c2 < 1");
  if (max_line_search < 1) throw InputError("lbfgs: max_line_search must be >= 1");
  if (!(gradient_tolerance >= 0.0)) throw InputError("lbfgs: gradient_tolerance must be >= 0");
}

std::string to_string(LbfgsStatus s) {
  switch (s) {
    case LbfgsStatus::converged: return "converged";
    case LbfgsStatus::max_iterations: return "max_iterations";
    case LbfgsStatus::line_search_failed: return "line_search_failed";
  }
  return "unknown";
}

Lbfgs::Lbfgs(LbfgsOptions options) : options_(options) { options_.validate(); }

Eigen::VectorXd Lbfgs::direction(const Eigen::VectorXd& g) const {
  Eigen::VectorXd q = -g;
  const int k = static_cast<int>(s_.size());
  std::vector<double> alpha(k), rho(k);
  for (int i = k - 1; i >= 0; --i) {
    rho[i] = 1.0 / y_[i].dot(s_[i]);
    alpha[i] = rho[i] * s_[i].dot(q);
    q -= alpha[i] * y_[i];
  }
  if (k > 0) q *= s_.back().dot(y_.back()) / y_.back().squaredNorm();
  for (int i = 0; i < k; ++i) {
    const double beta = rho[i] * y_[i].dot(q);
    q += (alpha[i] - beta) * s_[i];
  }
  return q;
}

Lbfgs::StepResult Lbfgs::step(const Objective& objective, Eigen::VectorXd& x, double& f, Eigen::VectorXd& g) {
  StepResult out;
  Eigen::VectorXd d = direction(g);
  double d0 = g.dot(d);
  if (!(d0 < 0.0)) {
    reset();
    d = -g;
    d0 = -g.squaredNorm();
  }
  if (d0 == 0.0) return out;

  const double f0 = f;
  Eigen::VectorXd xt(x.size()), gt(x.size());
  Eigen::VectorXd best_x = x, best_g = g;
  double best_f = f0;

  auto eval = [&](double alpha) {
    xt = x + alpha * d;
    const double ft = objective(xt, gt);
    ++out.evaluations;
    if (!std::isfinite(ft) || !gt.allFinite()) return Trial{alpha, std::numeric_limits<double>::infinity(), 0.0};
    if (ft < best_f) {
      best_f = ft;
      best_x = xt;
      best_g = gt;
    }
    return Trial{alpha, ft, gt.dot(d)};
  };
  auto armijo = [&](const Trial& t) { return t.f <= f0 + options_.c1 * t.alpha * d0; };
  auto curvature = [&](const Trial& t) { return std::abs(t.d) <= -options_.c2 * d0; };

  double alpha = s_.empty() ? std::min(1.0, 1.0 / std::sqrt(-d0)) : 1.0;
  Trial prev{0.0, f0, d0};
  bool found = false;
  double accepted_f = f0;
  Trial lo, hi;
  bool bracketed = false;
  int evals_left = options_.max_line_search;

  while (evals_left-- > 0) {
    const Trial cur = eval(alpha);
    if (!armijo(cur) || (prev.alpha > 0.0 && cur.f >= prev.f)) {
      lo = prev;
      hi = cur;
      bracketed = true;
      break;
    }
    if (curvature(cur)) {
      found = true;
      accepted_f = cur.f;
      break;
    }
    if (cur.d >= 0.0) {
      lo = cur;
      hi = prev;
      bracketed = true;
      break;
    }
    prev = cur;
    alpha *= 4.0;
  }

  // Zoom inside the bracket [lo, hi]; lo always satisfies Armijo.
  while (!found && bracketed && evals_left-- > 0) {
    double a;
    if (std::isfinite(hi.f)) {
      a = cubic_minimizer(lo.alpha, lo.f, lo.d, hi.alpha, hi.f, hi.d);
      const double width = std::abs(hi.alpha - lo.alpha);
      const double lo_edge = std::min(lo.alpha, hi.alpha) + 0.1 * width;
      const double hi_edge = std::max(lo.alpha, hi.alpha) - 0.1 * width;
      if (a < lo_edge || a > hi_edge) a = 0.5 * (lo.alpha + hi.alpha);
    } else {
      a = lo.alpha + 0.1 * (hi.alpha - lo.alpha);
    }
    if (std::abs(hi.alpha - lo.alpha) <= 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
    const Trial cur = eval(a);
    if (!armijo(cur) || cur.f >= lo.f) {
      hi = cur;
    } else {
      if (curvature(cur)) {
        found = true;
        accepted_f = cur.f;
        break;
      }
      if (cur.d * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
      lo = cur;
    }
  }

  if (found) {
    const Eigen::VectorXd s = xt - x;
    const Eigen::VectorXd y = gt - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * y.squaredNorm() && sy > 0.0) {
      s_.push_back(s);
      y_.push_back(y);
      if (static_cast<int>(s_.size()) > options_.history) {
        s_.pop_front();
        y_.pop_front();
      }
    }
    out.step = s.norm();
    x = xt;
    f = accepted_f;
    g = gt;
    out.accepted = true;
    return out;
  }
  // Line search failed: keep the lowest point seen and drop the history,
  // which is the usual culprit.
  reset();
  if (best_f < f0) {
    out.step = (best_x - x).norm();
    x = best_x;
    f = best_f;
    g = best_g;
  }
  return out;
}

LbfgsResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const LbfgsOptions& options) {
  Lbfgs solver(options);
  LbfgsResult r;
  r.x = x0;
  Eigen::VectorXd g(x0.size());
  r.f = objective(r.x, g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !g.allFinite()) throw NumericError("lbfgs: objective is not finite at the starting point");
  r.gradient_norm = g.norm();
  bool retried = false;
  while (true) {
    if (r.gradient_norm <= options.gradient_tolerance) {
      r.converged = true;
      r.status = LbfgsStatus::converged;
      return r;
    }
    if (r.iterations >= options.max_iterations) {
      r.status = LbfgsStatus::max_iterations;
      return r;
    }
    const Lbfgs::StepResult st = solver.step(objective, r.x, r.f, g);
    r.evaluations += st.evaluations;
    ++r.iterations;
    r.gradient_norm = g.norm();
    if (st.accepted || st.step > 0.0) {
      retried = false;
      continue;
    }
    // No progress at all. One retry from steepest descent, then give up.
    if (retried) {
      r.converged = r.gradient_norm <= options.gradient_tolerance;
      r.status = r.converged ? LbfgsStatus::converged : LbfgsStatus::line_search_failed;
      return r;
    }
    retried = true;
  }
}

}  // namespace nmodes
