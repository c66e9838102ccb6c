#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/energy.hpp"
#include "neuralmodes/lbfgs.hpp"
#include "neuralmodes/modal.hpp"

namespace nmodes {

/// Ground-truth point of the nonlinear compliant-mode manifold.
struct OracleSample {
  Eigen::VectorXd z;
  Eigen::VectorXd aux;
  Eigen::VectorXd x_star;
  double e_star = 0.0;
  bool converged = false;
  double gradient_norm = 0.0;  // of the projected gradient at x_star
  double tolerance = 0.0;      // the projected-gradient target it was solved to
  int iterations = 0;
};

struct OracleOptions {
  double relative_tolerance = 1e-6;  // times max(1, |grad E(X + l)|)
  int max_iterations = 20000;
  int history = 10;
};

/// Minimizes E(X + u) subject to modes^T u = z. Iterates stay on the affine
/// constraint set: u = l + P v with P = I - modes modes^T, so only the
/// projected gradient drives the search. `warm_start`, a full displacement,
/// is projected onto the constraint set before use.
OracleSample oracle_solve(const EnergyModel& energy, const Eigen::MatrixXd& modes, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& aux = {}, const OracleOptions& options = {},
                          const Eigen::VectorXd* warm_start = nullptr);

/// Applies P = I - E E^T to a vector.
Eigen::VectorXd project_out(const Eigen::MatrixXd& modes, const Eigen::VectorXd& v);

struct DatasetSpec {
  enum class Kind { grid, random };
  Kind kind = Kind::grid;
  int resolution = 9;  // grid
  int count = 0;       // random
  uint64_t seed = 0;   // random

  static DatasetSpec make_grid(int resolution);
  static DatasetSpec make_random(int count, uint64_t seed);
  std::string describe() const;
  void validate() const;
};

struct OracleManifest {
  int version = 1;
  DatasetSpec spec;
  OracleOptions options;
  DomainBox box;  // z box followed by aux box
  std::string family_fingerprint;
  std::string basis_hash;
  int num_samples = 0;
  int num_converged = 0;
  double max_gradient_norm = 0.0;
  long total_iterations = 0;
  double wall_seconds = 0.0;
};

struct OracleDataset {
  OracleManifest manifest;
  std::vector<OracleSample> samples;

  int size() const { return static_cast<int>(samples.size()); }
  int num_unconverged() const;
  /// Contiguous slice [begin, end) with a manifest describing it.
  OracleDataset slice(int begin, int end) const;
  /// Content hash over manifest and samples.
  std::string hash() const;
};

/// Hash of the modal basis used to build datasets and models.
std::string basis_hash(const Eigen::MatrixXd& modes);

/// Solves the oracle for every sample point of `spec` inside `box` (z box
/// joined with the aux range). Grid samples are ordered lexicographically
/// and solved in runs along the last axis, each warm-started from its
/// predecessor. Throws NumericError if more than 1% of samples fail.
OracleDataset generate_oracle_dataset(const EnergyFamily& family, const Eigen::MatrixXd& modes,
                                      const DatasetSpec& spec, const DomainBox& box, const OracleOptions& options = {});

/// Contiguous splits, e.g. {900, 100, 300}. Sizes must sum to the dataset size.
std::vector<OracleDataset> split_dataset(const OracleDataset& data, const std::vector<int>& sizes);

void save_dataset(const OracleDataset& data, const std::string& path);
OracleDataset load_dataset(const std::string& path);
/// One row per sample: index, z..., aux..., e_star, converged, gradient_norm.
void export_dataset_csv(const OracleDataset& data, const std::string& path);

}  // namespace nmodes
