#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/energy.hpp"
#include "neuralmodes/mlp.hpp"
#include "neuralmodes/modal.hpp"

namespace nmodes {

/// n(z, aux) = X(aux) + l(z) + y(z, aux) with l = modes * z and y the
/// network correction. Network inputs are [z; aux] mapped onto [-1, 1] by
/// the joined domain box.
struct SubspaceModel {
  MlpParams mlp;
  LinearModeBasis basis;
  DomainBox box;  // modal coordinates only
  AuxSpec aux;
  std::string fingerprint;       // of the energy family the model was built for
  std::string mesh_fingerprint;  // mesh and material of the reference model

  /// Network [m + aux_dim, hidden..., 3n] with a zero final layer.
  static SubspaceModel create(const EnergyFamily& family, LinearModeBasis basis, DomainBox box,
                              const std::vector<int>& hidden, uint64_t seed);

  int m() const { return basis.size(); }
  int aux_dim() const { return aux.dim(); }
  int num_dofs() const { return basis.num_dofs(); }
  DomainBox input_box() const { return DomainBox::join(box, aux.box()); }
  void validate() const;

  Eigen::VectorXd network_input(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values) const;
  Eigen::MatrixXd network_inputs(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& aux_values) const;

  Eigen::VectorXd correction(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values = {}) const;
  /// l + y.
  Eigen::VectorXd displacement(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values = {}) const;
  Eigen::VectorXd decode(const EnergyModel& energy, const Eigen::VectorXd& z,
                         const Eigen::VectorXd& aux_values = {}) const;
  /// d(l + y)/dz, 3n x m, exact.
  Eigen::MatrixXd displacement_jacobian(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values = {}) const;
  /// cotangent^T d(l + y)/dz, exact.
  Eigen::VectorXd displacement_vjp(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values,
                                   const Eigen::VectorXd& cotangent) const;

  /// Throws InputError when the model was built for a different mesh or material.
  void check_compatible(const EnergyFamily& family) const;
};

struct LossWeights {
  double lambda = 1e8;  // (l^T y)^2 penalty
  double eta = 1e7;     // |y(0)|^2 penalty
};

/// Loss breakdown for one batch.
struct LossValue {
  double loss = 0.0;
  double mean_energy = 0.0;
  double mean_constraint = 0.0;  // mean (l^T y)^2
  double origin_norm = 0.0;      // |y(0)|, averaged over origin points
};

/// L = mean_b [E(X + l_b + y_b) + lambda (l_b^T y_b)^2] + eta mean_a |y(0, a)|^2,
/// with the origin term averaged over `origin_aux` columns (one empty column
/// when there is no aux). `zs` and `aux_values` hold one sample per column.
/// When `grad` is non-null it receives dL/dtheta.
LossValue loss_batch(const SubspaceModel& model, const EnergyFamily& family, const Eigen::MatrixXd& zs,
                     const Eigen::MatrixXd& aux_values, const Eigen::MatrixXd& origin_aux, const LossWeights& w,
                     Eigen::VectorXd* grad);

/// Aux values where the origin term is imposed: `points` evenly spaced
/// values over the aux range, or a single empty column without aux.
Eigen::MatrixXd origin_aux_points(const AuxSpec& aux, int points = 5);

/// Unit-normalized latent directions at z = 0: forward differences of
/// l + y with step 1e-4 times the box width per axis.
Eigen::MatrixXd jacobian_at_origin(const SubspaceModel& model, const Eigen::VectorXd& aux_values = {});

}  // namespace nmodes
