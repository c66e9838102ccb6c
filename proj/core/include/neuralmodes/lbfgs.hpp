#pragma once

#include <deque>
#include <functional>
#include <string>

#include <Eigen/Core>

namespace nmodes {

struct LbfgsOptions {
  int history = 10;
  double gradient_tolerance = 1e-6;  // on the 2-norm of the gradient
  int max_iterations = 1000;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search = 25;

  void validate() const;
};

/// Evaluates f(x) and writes its gradient into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

enum class LbfgsStatus { converged, max_iterations, line_search_failed };

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  LbfgsStatus status = LbfgsStatus::max_iterations;
};

std::string to_string(LbfgsStatus s);

/// Limited-memory BFGS with a strong Wolfe line search. The object carries
/// the curvature history so callers can drive it one iteration at a time
/// (training on resampled batches) or run it to convergence via minimize().
class Lbfgs {
 public:
  explicit Lbfgs(LbfgsOptions options = {});

  struct StepResult {
    bool accepted = false;
    double step = 0.0;
    int evaluations = 0;
  };

  /// One iteration from (x, f, g), which must be consistent. On acceptance
  /// x, f, g hold the new iterate. On line-search failure they keep the best
  /// point seen, which is never worse than the input.
  StepResult step(const Objective& objective, Eigen::VectorXd& x, double& f, Eigen::VectorXd& g);

  void reset() {
    s_.clear();
    y_.clear();
  }
  const LbfgsOptions& options() const { return options_; }

 private:
  Eigen::VectorXd direction(const Eigen::VectorXd& g) const;

  LbfgsOptions options_;
  std::deque<Eigen::VectorXd> s_, y_;
};

LbfgsResult lbfgs_minimize(const Objective& objective, const Eigen::VectorXd& x0, const LbfgsOptions& options = {});

}  // namespace nmodes
