#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/energy.hpp"
#include "neuralmodes/lbfgs.hpp"
#include "neuralmodes/subspace.hpp"

namespace nmodes {

struct DynamicsOptions {
  double h = 0.04;  // s
  bool rigid = false;
  /// Replace the network by y = 0 (linear modal dynamics).
  bool linear_baseline = false;
  /// Reduced-gradient tolerance relative to total_mass / h^2.
  double relative_tolerance = 1e-6;
  int max_iterations = 50;

  void validate() const;
};

/// Reduced state. Rigid DoFs are an axis-angle rotation about the rest
/// center of mass followed by a translation.
struct DynamicsState {
  Eigen::VectorXd u;       // displacement at t
  Eigen::VectorXd u_prev;  // displacement at t - h
  Eigen::VectorXd z;
  Eigen::Matrix<double, 6, 1> rigid = Eigen::Matrix<double, 6, 1>::Zero();
  double t = 0.0;
  // Diagnostics of the step that produced this state.
  int iterations = 0;
  bool converged = true;
  double gradient_norm = 0.0;
};

/// Full-space subspace dynamics driver for one model and one energy model
/// (which carries the time-varying attachments).
class SubspaceDynamics {
 public:
  SubspaceDynamics(const SubspaceModel& model, EnergyModelPtr energy, DynamicsOptions options = {},
                   Eigen::VectorXd aux = {});

  /// State at rest velocity with modal coordinates z (and rigid DoFs).
  DynamicsState initial_state(const Eigen::VectorXd& z,
                              const Eigen::Matrix<double, 6, 1>& rigid = Eigen::Matrix<double, 6, 1>::Zero()) const;

  /// One implicit-Euler step: minimizes |u - 2 u_n + u_prev|_M^2 / (2 h^2) + E(X + u, t + h)
  /// over the reduced variables, seeded at the current ones.
  DynamicsState step(const DynamicsState& s) const;

  /// Displacement for reduced variables (z, rigid).
  Eigen::VectorXd displacement(const Eigen::VectorXd& z, const Eigen::Matrix<double, 6, 1>& rigid) const;

  /// Objective of the step from `s` at reduced variables q = [z; rigid].
  double step_objective(const DynamicsState& s, const Eigen::VectorXd& q, Eigen::VectorXd* grad) const;

  /// Kinetic energy of (u - u_prev) / h plus elastic energy at time t.
  double total_energy(const DynamicsState& s) const;

  double tolerance() const { return tolerance_; }
  const DynamicsOptions& options() const { return options_; }
  const EnergyModel& energy() const { return *energy_; }

 private:
  int num_reduced() const { return model_.m() + (options_.rigid ? 6 : 0); }

  SubspaceModel model_;
  EnergyModelPtr energy_;
  DynamicsOptions options_;
  Eigen::VectorXd aux_;
  Eigen::Vector3d center_;
  double tolerance_ = 0.0;
};

/// Rotation matrix of an axis-angle vector and its derivatives dR/dw_k.
Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& w);
std::array<Eigen::Matrix3d, 3> axis_angle_derivatives(const Eigen::Vector3d& w);

struct TrajectoryFrame {
  double t = 0.0;
  Eigen::VectorXd z;
  Eigen::Matrix<double, 6, 1> rigid = Eigen::Matrix<double, 6, 1>::Zero();
  double wall_ms = 0.0;
  int iterations = 0;
  bool converged = true;
  double elastic_energy = 0.0;
  double total_energy = 0.0;
  std::string error;  // non-empty if the step threw; the state was held
};

struct Trajectory {
  std::vector<TrajectoryFrame> frames;
  std::vector<Eigen::VectorXd> positions;  // one per frame, full space

  double mean_step_ms() const;
  double max_step_ms() const;
  std::string to_csv() const;
  /// Binary frame file: "NMFRAMES" magic, uint32 version, uint32 vertex count,
  /// uint32 frame count, then per frame a float64 time and 3n float64 positions.
  void write_frames(const std::string& path) const;
};

Trajectory read_frames(const std::string& path);

/// Runs `steps` steps from `initial`; frame 0 is the initial state.
Trajectory simulate(const SubspaceDynamics& dyn, const DynamicsState& initial, int steps);

struct Keyframe {
  double t = 0.0;
  Eigen::VectorXd z;
};

/// Piecewise-linear interpolation of z, clamped outside [t_0, t_K]. Keys
/// must be sorted with strictly increasing times; a single key is constant.
Eigen::VectorXd interpolate_keyframes(const std::vector<Keyframe>& keys, double t);
void validate_keyframes(const std::vector<Keyframe>& keys);

}  // namespace nmodes
