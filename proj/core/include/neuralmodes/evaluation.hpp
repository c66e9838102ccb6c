#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/subspace.hpp"

namespace nmodes {

/// Maps an oracle sample to predicted full positions.
using Predictor = std::function<Eigen::VectorXd(const OracleSample&)>;

Predictor model_predictor(const SubspaceModel& model, const EnergyFamily& family);
/// Returns x_star itself; evaluating it gives an all-zero error report.
Predictor oracle_predictor();

/// dE = E(prediction) - e_star per sample.
struct EnergyBlock {
  double delta_avg = 0.0, delta_max = 0.0, delta_std = 0.0;
  double delta_min = 0.0;
  double energy_avg = 0.0;         // prediction
  double oracle_energy_avg = 0.0;  // e_star
  int below_tolerance = 0;         // samples with dE < -10 * oracle tolerance
};

/// Per element d|S| = | |S|_pred - |S|_oracle |, reduced per sample by the
/// element-weighted mean ("weighted") and by the maximum over elements
/// ("max"), then averaged over samples. Raw |S| values use the same reductions.
struct StressBlock {
  double weighted_delta_avg = 0.0, weighted_delta_max = 0.0;
  double weighted_avg = 0.0, weighted_oracle_avg = 0.0;
  double max_delta_avg = 0.0, max_delta_max = 0.0;
  double max_avg = 0.0, max_oracle_avg = 0.0;
};

/// Nodal forces F = -grad E. Norms are summed over samples and divided by
/// the sample count.
struct ForceBlock {
  double delta_l1 = 0.0, delta_l2 = 0.0;
  double force_l1 = 0.0, force_l2 = 0.0;
  double oracle_force_l2 = 0.0;
  double oracle_projected_max = 0.0;  // max over samples of |P grad E(x_star)|
};

struct SplitMetrics {
  std::string name;
  int count = 0;
  int discarded = 0;  // unconverged oracle samples left out
  bool valid = true;  // false when more than 1% were discarded
  double l2 = 0.0;    // mean |x_pred - x_star|^2
  EnergyBlock energy;
  StressBlock stress;
  ForceBlock force;
};

/// Converged samples only; `pred` holds the matching predictions.
EnergyBlock energy_metrics(const EnergyFamily& family, const std::vector<const OracleSample*>& samples,
                           const std::vector<Eigen::VectorXd>& pred);
StressBlock stress_metrics(const EnergyFamily& family, const std::vector<const OracleSample*>& samples,
                           const std::vector<Eigen::VectorXd>& pred);
ForceBlock force_metrics(const EnergyFamily& family, const Eigen::MatrixXd& modes,
                         const std::vector<const OracleSample*>& samples, const std::vector<Eigen::VectorXd>& pred);

SplitMetrics evaluate_split(const Predictor& predict, const EnergyFamily& family, const Eigen::MatrixXd& modes,
                            const OracleDataset& data, const std::string& name);

/// Lightweight summary used during training: mean L2 distance and mean
/// predicted energy over the converged samples.
struct SplitSummary {
  double l2 = 0.0;
  double energy = 0.0;
  double delta_energy = 0.0;
};
SplitSummary summarize_split(const SubspaceModel& model, const EnergyFamily& family, const OracleDataset& data);

struct CorrelationResult {
  Eigen::MatrixXd matrix;       // E^T E of unit latent directions
  Eigen::VectorXd eigenvalues;  // ascending
  int collapsed = 0;            // eigenvalues below 0.1
  std::string verdict;
};
CorrelationResult correlation_from_directions(const Eigen::MatrixXd& directions);
CorrelationResult correlation_from_eigenvalues(const Eigen::VectorXd& eigenvalues);
CorrelationResult correlation_diagnostic(const SubspaceModel& model, const Eigen::VectorXd& aux = {});

struct StructureReport {
  double origin_residual = 0.0;  // |n(0) - X| / mesh scale
  bool symmetry_checked = false;
  int symmetry_axis = -1;
  double symmetry_residual = 0.0;  // mean |sigma(n(z)) - n(sigma_z z)| / mesh scale
  std::string notice;
  double smoothness = 0.0;  // max |d^2 n / ds^2| along sampled latent segments
};
StructureReport structure_checks(const SubspaceModel& model, const EnergyFamily& family, uint64_t seed = 0,
                                 int samples = 32);

/// Mean (l^T y)^2 / (|l|^2 |y|^2) over the given z (columns); points with
/// l = 0 or y = 0 are skipped.
double constraint_ratio(const SubspaceModel& model, const Eigen::MatrixXd& zs, const Eigen::MatrixXd& aux = {});

struct MetricsReport {
  std::string checkpoint_hash;
  std::vector<std::string> dataset_hashes;
  std::string stress_measure = "second Piola-Kirchhoff stress, Frobenius norm";
  std::vector<SplitMetrics> splits;
  std::vector<SplitMetrics> subintervals;
  std::optional<CorrelationResult> correlation;
  std::optional<StructureReport> structure;

  std::string to_json() const;
  std::string to_csv() const;
  std::string summary() const;
};

/// `parts` contiguous index ranges of the dataset, evaluated separately.
std::vector<SplitMetrics> evaluate_subintervals(const Predictor& predict, const EnergyFamily& family,
                                                const Eigen::MatrixXd& modes, const OracleDataset& data,
                                                int parts = 5);

}  // namespace nmodes
