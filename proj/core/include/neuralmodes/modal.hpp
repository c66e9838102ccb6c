#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace nmodes {

/// Unit eigenvectors of the rest Hessian for the smallest non-rigid
/// eigenvalues, ascending.
struct LinearModeBasis {
  Eigen::MatrixXd modes;        // 3n x m, orthonormal columns
  Eigen::VectorXd eigenvalues;  // ascending
  int num_filtered_rigid = 0;
  double lambda_max = 0.0;      // largest eigenvalue of the Hessian

  int size() const { return static_cast<int>(modes.cols()); }
  int num_dofs() const { return static_cast<int>(modes.rows()); }
};

struct ModalOptions {
  /// Eigenvalues below rigid_tolerance * lambda_max count as rigid motion.
  double rigid_tolerance = 1e-8;
  /// Problems up to this many DoFs use the dense solver; larger ones use
  /// shift-invert subspace iteration.
  int dense_limit = 10000;
};

LinearModeBasis linear_modes(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options = {});

/// Dense and iterative back ends, exposed for testing.
LinearModeBasis linear_modes_dense(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options);
LinearModeBasis linear_modes_iterative(const Eigen::SparseMatrix<double>& hessian, int m, const ModalOptions& options);

/// l = modes * z.
Eigen::VectorXd linear_displacement(const Eigen::VectorXd& z, const LinearModeBasis& basis);

}  // namespace nmodes
