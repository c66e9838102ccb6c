#include "neuralmodes/modal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "neuralmodes/errors.hpp"

namespace nmodes {

namespace {

void check_symmetric_input(const Eigen::SparseMatrix<double>& h, int m) {
  if (h.rows() != h.cols()) throw InputError("linear_modes: Hessian must be square");
  if (m < 1) throw InputError("linear_modes: mode count must be >= 1");
}

// Flip each column so its entry of largest magnitude is positive.
void fix_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index c = 0; c < modes.cols(); ++c) {
    Eigen::Index arg = 0;
    modes.col(c).cwiseAbs().maxCoeff(&arg);
    if (modes(arg, c) < 0) modes.col(c) *= -1.0;
  }
}

// Largest eigenvalue by a short Lanczos run with full reorthogonalization.
double estimate_lambda_max(const Eigen::SparseMatrix<double>& h) {
  const Eigen::Index n = h.rows();
  const int steps = static_cast<int>(std::min<Eigen::Index>(n, 60));
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd v(n, steps);
  Eigen::VectorXd q = Eigen::VectorXd::NullaryExpr(n, [&] { return normal(rng); });
  q.normalize();
  Eigen::VectorXd alpha(steps), beta(steps);
  int k = 0;
  for (; k < steps; ++k) {
    v.col(k) = q;
    Eigen::VectorXd w = h * q;
    alpha[k] = q.dot(w);
    for (int pass = 0; pass < 2; ++pass) w -= v.leftCols(k + 1) * (v.leftCols(k + 1).transpose() * w);
    beta[k] = w.norm();
    if (beta[k] <= 1e-14 * std::abs(alpha[k]) || k + 1 == steps) {
      ++k;
      break;
    }
    q = w / beta[k];
  }
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
  for (int i = 0; i < k; ++i) {
    t(i, i) = alpha[i];
    if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

}  // namespace

LinearModeBasis linear_modes(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options) {
  return hessian.rows() <= options.dense_limit ? linear_modes_dense(hessian, m, options)
                                               : linear_modes_iterative(hessian, m, options);
}

LinearModeBasis linear_modes_dense(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options) {
  check_symmetric_input(hessian, m);
  const Eigen::MatrixXd dense(hessian);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
  if (es.info() != Eigen::Success) throw NumericError("linear_modes: eigensolver failed");
  const Eigen::VectorXd& evals = es.eigenvalues();
  const double lambda_max = evals.maxCoeff();
  const double threshold = options.rigid_tolerance * lambda_max;
  int rigid = 0;
  while (rigid < evals.size() && evals[rigid] < threshold) ++rigid;
  if (rigid + m > evals.size())
    throw InputError("linear_modes: requested " + std::to_string(m) + " modes but only " +
                     std::to_string(evals.size() - rigid) + " non-rigid modes exist");
  LinearModeBasis basis;
  basis.modes = es.eigenvectors().middleCols(rigid, m);
  basis.eigenvalues = evals.segment(rigid, m);
  basis.num_filtered_rigid = rigid;
  basis.lambda_max = lambda_max;
  fix_signs(basis.modes);
  return basis;
}

// Shift-invert block subspace iteration with Rayleigh-Ritz projection. A
// block method resolves repeated eigenvalues (the rigid null space and
// symmetric mode pairs) that single-vector Krylov runs miss.
LinearModeBasis linear_modes_iterative(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options) {
  check_symmetric_input(hessian, m);
  const Eigen::Index n = hessian.rows();
  const double lambda_max = estimate_lambda_max(hessian);
  const double threshold = options.rigid_tolerance * lambda_max;
  const double shift = -threshold;

  Eigen::SparseMatrix<double> shifted = hessian;
  for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) -= shift;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(shifted);
  if (solver.info() != Eigen::Success) throw NumericError("linear_modes: factorization of shifted Hessian failed");

  int wanted = m + 6;
  for (int attempt = 0; attempt < 4; ++attempt) {
    if (wanted > n) wanted = static_cast<int>(n);
    const int block = static_cast<int>(std::min<Eigen::Index>(n, std::max(2 * wanted, wanted + 8)));
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(n, block, [&] { return normal(rng); });
    Eigen::VectorXd ritz;
    Eigen::MatrixXd vecs;
    bool converged = false;
    for (int iter = 0; iter < 2000 && !converged; ++iter) {
      const Eigen::MatrixXd y = solver.solve(x);
      const Eigen::MatrixXd a = y.transpose() * x;  // Y^T (H - shift) Y
      const Eigen::MatrixXd b = y.transpose() * y;
      Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(0.5 * (a + a.transpose()),
                                                                     0.5 * (b + b.transpose()));
      if (ges.info() != Eigen::Success) throw NumericError("linear_modes: Rayleigh-Ritz step failed");
      x = y * ges.eigenvectors();  // B-orthonormal, i.e. orthonormal columns
      ritz = ges.eigenvalues().array() + shift;
      // Residual check on the wanted pairs.
      const Eigen::MatrixXd hx = hessian * x.leftCols(wanted);
      double worst = 0.0;
      for (int c = 0; c < wanted; ++c) {
        const double nrm = x.col(c).norm();
        worst = std::max(worst, (hx.col(c) - ritz[c] * x.col(c)).norm() / nrm);
      }
      converged = worst <= 1e-11 * lambda_max;
      vecs = x;
    }
    if (!converged) throw NumericError("linear_modes: subspace iteration did not converge");

    // Re-orthonormalize and recompute Rayleigh quotients.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(vecs.leftCols(wanted));
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, wanted);
    const Eigen::MatrixXd proj = q.transpose() * (hessian * q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(0.5 * (proj + proj.transpose()));
    const Eigen::MatrixXd u = q * small.eigenvectors();
    const Eigen::VectorXd mu = small.eigenvalues();
    int rigid = 0;
    while (rigid < mu.size() && mu[rigid] < threshold) ++rigid;
    if (rigid + m <= wanted) {
      LinearModeBasis basis;
      basis.modes = u.middleCols(rigid, m);
      basis.eigenvalues = mu.segment(rigid, m);
      basis.num_filtered_rigid = rigid;
      basis.lambda_max = lambda_max;
      fix_signs(basis.modes);
      return basis;
    }
    if (wanted == n)
      throw InputError("linear_modes: requested " + std::to_string(m) + " modes but only " +
                       std::to_string(wanted - rigid) + " non-rigid modes exist");
    wanted = rigid + m + 4;
  }
  throw NumericError("linear_modes: could not isolate the requested modes");
}

Eigen::VectorXd linear_displacement(const Eigen::VectorXd& z, const LinearModeBasis& basis) {
  if (z.size() != basis.size())
    throw InputError("linear_displacement: z has length " + std::to_string(z.size()) + ", basis has " +
                     std::to_string(basis.size()) + " modes");
  return basis.modes * z;
}

}  // namespace nmodes
