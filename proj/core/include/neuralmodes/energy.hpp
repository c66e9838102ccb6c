#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "neuralmodes/mesh.hpp"

namespace nmodes {

/// Quadratic spring pulling one vertex toward a target that moves as
/// anchor + amplitude * sin(2 pi frequency t + phase).
struct Attachment {
  int vertex = 0;
  double stiffness = 0.0;  // N/m
  Eigen::Vector3d anchor = Eigen::Vector3d::Zero();
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
  double frequency = 0.0;  // Hz
  double phase = 0.0;

  Eigen::Vector3d target(double t) const;
};

/// Attachments pinning each listed vertex at its rest position.
std::vector<Attachment> pin_at_rest(const Mesh& mesh, const std::vector<int>& vertices, double stiffness);

struct ElementStress {
  Eigen::VectorXd frobenius;  // |S| per element, Pa
  Eigen::VectorXd weights;    // areas (shell) or volumes (solid)

  double weighted_mean() const;
  double max() const;
};

/// Elastic energy of a shell (StVK membrane + hinge bending) or a solid
/// (StVK linear tets), plus attachment penalties. Immutable; all queries are
/// pure functions of (x, t) and safe to call concurrently.
class EnergyModel {
 public:
  EnergyModel(Mesh mesh, MaterialParams material, std::vector<Attachment> attachments = {});

  double energy(const Eigen::VectorXd& x, double t = 0.0) const;
  /// Energy and its gradient in one pass over the elements.
  double energy_and_gradient(const Eigen::VectorXd& x, double t, Eigen::VectorXd& grad) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& x, double t = 0.0) const;
  /// Exactly symmetric sparse Hessian.
  Eigen::SparseMatrix<double> hessian(const Eigen::VectorXd& x, double t = 0.0) const;
  /// Per-element Frobenius norm of the second Piola-Kirchhoff stress.
  ElementStress element_stress(const Eigen::VectorXd& x) const;
  /// Number of tets with non-positive deformed volume (StVK tolerates them).
  int count_inverted(const Eigen::VectorXd& x) const;

  const Mesh& mesh() const { return mesh_; }
  const RestData& rest() const { return rest_; }
  const MaterialParams& material() const { return material_; }
  const std::vector<Attachment>& attachments() const { return attachments_; }
  const Eigen::VectorXd& rest_positions() const { return mesh_.rest_positions; }
  int num_dofs() const { return mesh_.num_dofs(); }
  double total_mass() const { return rest_.total_mass; }
  /// Lumped mass expanded to one entry per degree of freedom.
  const Eigen::VectorXd& dof_mass() const { return dof_mass_; }

  /// Hash of mesh geometry, connectivity, and material; attachments are
  /// boundary conditions and do not enter it.
  const std::string& fingerprint() const { return fingerprint_; }

  EnergyModel with_attachments(std::vector<Attachment> attachments) const;

 private:
  void check_input(const Eigen::VectorXd& x) const;
  double accumulate(const Eigen::VectorXd& x, double t, Eigen::VectorXd* grad) const;

  Mesh mesh_;
  MaterialParams material_;
  std::vector<Attachment> attachments_;
  RestData rest_;
  Eigen::VectorXd dof_mass_;
  std::string fingerprint_;
};

using EnergyModelPtr = std::shared_ptr<const EnergyModel>;

}  // namespace nmodes
