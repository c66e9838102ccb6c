#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "neuralmodes/lbfgs.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/subspace.hpp"

namespace nmodes {

enum class Sampling { grid, stochastic };
enum class EarlyStop { none, l2, energy };

std::string to_string(Sampling s);
std::string to_string(EarlyStop s);
Sampling parse_sampling(const std::string& s);
EarlyStop parse_early_stop(const std::string& s);

struct TrainConfig {
  LossWeights weights;
  Sampling sampling = Sampling::grid;
  int grid_resolution = 9;
  int batch_size = 512;  // stochastic sampling
  int epochs = 2000;     // one optimizer iteration per epoch
  LbfgsOptions optimizer = default_optimizer();
  uint64_t seed = 0;
  EarlyStop early_stop = EarlyStop::none;
  int patience = 0;  // evaluations without improvement; 0 never stops
  int eval_every = 10;
  std::vector<int> hidden = {64, 64, 64, 64, 64};
  uint64_t init_seed = 0;

  static LbfgsOptions default_optimizer() {
    LbfgsOptions o;
    o.gradient_tolerance = 0.0;
    return o;
  }
  void validate() const;
};

constexpr double kNoValue = std::numeric_limits<double>::quiet_NaN();

struct EpochRecord {
  int epoch = 0;
  double loss = kNoValue;
  double mean_energy = kNoValue;
  double mean_constraint = kNoValue;
  double origin_norm = kNoValue;
  int evaluations = 0;
  double seconds = 0.0;  // cumulative wall time
  // Periodic evaluation; NaN on epochs without one.
  double val_l2 = kNoValue, val_energy = kNoValue;
  double test_l2 = kNoValue, test_energy = kNoValue;
};

struct TrainingHistory {
  std::string mode;  // "self_supervised" or "l2_supervised"
  std::vector<EpochRecord> epochs;
  int best_l2_epoch = -1;
  int best_energy_epoch = -1;
  std::string stop_reason;

  int last_epoch() const { return epochs.empty() ? 0 : epochs.back().epoch; }
  std::string to_csv() const;
};

/// Optional held-out sets evaluated every eval_every epochs.
struct TrainMonitor {
  const OracleDataset* validation = nullptr;
  const OracleDataset* test = nullptr;
  bool verbose = false;
};

struct TrainResult {
  SubspaceModel model;       // final, or the early-stopping choice when enabled
  SubspaceModel last;        // parameters after the final epoch
  SubspaceModel best_l2;     // best validation L2 (equals last without validation)
  SubspaceModel best_energy; // best validation energy
  TrainingHistory history;
  bool diverged = false;
};

/// Self-supervised training of `init` on the loss of loss_batch. A non-empty
/// `resume` history continues its epoch numbering.
TrainResult train(const SubspaceModel& init, const EnergyFamily& family, const TrainConfig& cfg,
                  const TrainMonitor& monitor = {}, TrainingHistory resume = {});

/// Same architecture, loss mean |x(z) - x_star(z)|^2 over the converged samples.
TrainResult train_supervised_l2(const SubspaceModel& init, const EnergyFamily& family, const OracleDataset& dataset,
                                const TrainConfig& cfg, const TrainMonitor& monitor = {},
                                TrainingHistory resume = {});

/// L2 loss and its parameter gradient; exposed for testing.
double l2_loss(const SubspaceModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
               Eigen::VectorXd* grad);

}  // namespace nmodes
