#include "neuralmodes/training.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/evaluation.hpp"

namespace nmodes {

std::string to_string(Sampling s) { return s == Sampling::grid ? "grid" : "stochastic"; }

std::string to_string(EarlyStop s) {
  switch (s) {
    case EarlyStop::none: return "none";
    case EarlyStop::l2: return "l2";
    case EarlyStop::energy: return "energy";
  }
  return "none";
}

Sampling parse_sampling(const std::string& s) {
  if (s == "grid") return Sampling::grid;
  if (s == "stochastic") return Sampling::stochastic;
  throw InputError("unknown sampling mode '" + s + "' (expected grid or stochastic)");
}

EarlyStop parse_early_stop(const std::string& s) {
  if (s == "none") return EarlyStop::none;
  if (s == "l2") return EarlyStop::l2;
  if (s == "energy") return EarlyStop::energy;
  throw InputError("unknown early-stop metric '" + s + "' (expected none, l2 or energy)");
}

void TrainConfig::validate() const {
  if (!(weights.lambda >= 0.0) || !(weights.eta >= 0.0)) throw InputError("train: lambda and eta must be >= 0");
  if (sampling == Sampling::grid && grid_resolution < 2) throw InputError("train: grid resolution must be >= 2");
  if (sampling == Sampling::stochastic && batch_size < 1) throw InputError("train: batch size must be >= 1");
  if (epochs < 0) throw InputError("train: epochs must be >= 0");
  if (eval_every < 1) throw InputError("train: eval_every must be >= 1");
  if (patience < 0) throw InputError("train: patience must be >= 0");
  for (int w : hidden)
    if (w < 1) throw InputError("train: hidden widths must be >= 1");
  optimizer.validate();
}

std::string TrainingHistory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,mean_energy,mean_constraint,origin_norm,evaluations,seconds,val_l2,val_energy,test_l2,"
         "test_energy\n";
  auto put = [&](double v) {
    out << ',';
    if (std::isfinite(v)) out << v;
  };
  for (const auto& r : epochs) {
    out << r.epoch;
    put(r.loss);
    put(r.mean_energy);
    put(r.mean_constraint);
    put(r.origin_norm);
    out << ',' << r.evaluations;
    put(r.seconds);
    put(r.val_l2);
    put(r.val_energy);
    put(r.test_l2);
    put(r.test_energy);
    out << '\n';
  }
  return out.str();
}

namespace {

// Per-epoch objective over the flat parameter vector plus a callback that
// fills the loss breakdown for the most recent evaluation.
struct EpochObjective {
  Objective f;
  std::function<void(EpochRecord&)> describe;
};

using ObjectiveFactory = std::function<EpochObjective(int epoch)>;

TrainResult run_training(const SubspaceModel& init, const EnergyFamily& family, const TrainConfig& cfg,
                         const TrainMonitor& monitor, TrainingHistory history, const std::string& mode,
                         SubspaceModel& work, const ObjectiveFactory& factory, bool resample) {
  cfg.validate();
  init.validate();
  init.check_compatible(family);
  if (!history.mode.empty() && history.mode != mode)
    throw InputError("cannot resume a " + history.mode + " history in " + mode + " mode");
  history.mode = mode;

  TrainResult result;
  result.last = result.best_l2 = result.best_energy = init;
  Lbfgs optimizer(cfg.optimizer);
  const auto t0 = std::chrono::steady_clock::now();
  const double seconds_before = history.epochs.empty() ? 0.0 : history.epochs.back().seconds;
  const int first_epoch = history.last_epoch() + 1;

  double best_l2 = std::numeric_limits<double>::infinity();
  double best_energy = std::numeric_limits<double>::infinity();
  int since_improvement = 0;
  Eigen::VectorXd theta = init.mlp.theta, grad;
  Eigen::VectorXd last_good = theta;

  EpochObjective obj = factory(first_epoch);
  double f = obj.f(theta, grad);
  if (!std::isfinite(f)) throw NumericError(mode + " training: loss is not finite at the initial parameters");

  int stalls = 0;
  history.stop_reason = "epochs";
  for (int e = first_epoch; e < first_epoch + cfg.epochs; ++e) {
    if (resample && e > first_epoch) {
      obj = factory(e);
      f = obj.f(theta, grad);
      if (!std::isfinite(f)) {
        theta = last_good;
        result.diverged = true;
        history.stop_reason = "diverged";
        break;
      }
    }
    const Lbfgs::StepResult st = optimizer.step(obj.f, theta, f, grad);
    if (!std::isfinite(f) || !theta.allFinite()) {
      theta = last_good;
      result.diverged = true;
      history.stop_reason = "diverged";
      break;
    }
    last_good = theta;

    EpochRecord rec;
    rec.epoch = e;
    rec.loss = f;
    rec.evaluations = st.evaluations;
    if (!st.accepted) {
      // The last evaluation was not at the returned point; re-evaluate.
      Eigen::VectorXd g2;
      obj.f(theta, g2);
    }
    obj.describe(rec);

    if (!st.accepted && st.step == 0.0) {
      ++stalls;
    } else {
      stalls = 0;
    }

    const bool last_epoch = e + 1 == first_epoch + cfg.epochs || (!resample && stalls >= 2);
    if ((monitor.validation || monitor.test) && ((e - first_epoch + 1) % cfg.eval_every == 0 || last_epoch)) {
      work.mlp.theta = theta;
      if (monitor.validation) {
        const SplitSummary v = summarize_split(work, family, *monitor.validation);
        rec.val_l2 = v.l2;
        rec.val_energy = v.energy;
        bool improved = false;
        if (v.l2 < best_l2) {
          best_l2 = v.l2;
          result.best_l2 = work;
          history.best_l2_epoch = e;
          if (cfg.early_stop == EarlyStop::l2) improved = true;
        }
        if (v.energy < best_energy) {
          best_energy = v.energy;
          result.best_energy = work;
          history.best_energy_epoch = e;
          if (cfg.early_stop == EarlyStop::energy) improved = true;
        }
        since_improvement = improved ? 0 : since_improvement + 1;
      }
      if (monitor.test) {
        const SplitSummary t = summarize_split(work, family, *monitor.test);
        rec.test_l2 = t.l2;
        rec.test_energy = t.energy;
      }
    }
    rec.seconds = seconds_before + std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (monitor.verbose && (std::isfinite(rec.val_l2) || std::isfinite(rec.test_l2) || e % 50 == 0))
      std::cerr << mode << " epoch " << e << " loss " << rec.loss << " E " << rec.mean_energy << " val_E "
                << rec.val_energy << " test_E " << rec.test_energy << " t " << rec.seconds << "s\n";
    history.epochs.push_back(rec);

    if (!resample && stalls >= 2) {
      history.stop_reason = "stalled";
      break;
    }
    if (cfg.early_stop != EarlyStop::none && cfg.patience > 0 && monitor.validation &&
        since_improvement >= cfg.patience) {
      history.stop_reason = "early_stop";
      break;
    }
  }

  work.mlp.theta = theta;
  result.last = work;
  if (!monitor.validation) {
    result.best_l2 = result.best_energy = work;
  }
  result.model = work;
  if (monitor.validation && cfg.early_stop == EarlyStop::l2 && history.best_l2_epoch >= 0) result.model = result.best_l2;
  if (monitor.validation && cfg.early_stop == EarlyStop::energy && history.best_energy_epoch >= 0)
    result.model = result.best_energy;
  result.history = std::move(history);
  return result;
}

}  // namespace

TrainResult train(const SubspaceModel& init, const EnergyFamily& family, const TrainConfig& cfg,
                  const TrainMonitor& monitor, TrainingHistory resume) {
  auto work = std::make_shared<SubspaceModel>(init);
  const int m = init.m();
  const int a = init.aux_dim();
  const Eigen::MatrixXd origin_aux = origin_aux_points(init.aux);

  auto zs = std::make_shared<Eigen::MatrixXd>();
  auto auxs = std::make_shared<Eigen::MatrixXd>();
  if (cfg.sampling == Sampling::grid) {
    const Eigen::MatrixXd pts = init.input_box().grid(cfg.grid_resolution);
    *zs = pts.topRows(m);
    *auxs = pts.bottomRows(a);
  }
  auto rng = std::make_shared<std::mt19937_64>(cfg.seed + 0x9e3779b97f4a7c15ULL * (resume.last_epoch() + 1));
  auto last = std::make_shared<LossValue>();

  const ObjectiveFactory factory = [=, &family, &cfg](int) {
    if (cfg.sampling == Sampling::stochastic) {
      const Eigen::MatrixXd pts = work->input_box().uniform(cfg.batch_size, *rng);
      *zs = pts.topRows(m);
      *auxs = pts.bottomRows(a);
    }
    EpochObjective obj;
    obj.f = [=, &family, &cfg](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
      work->mlp.theta = theta;
      try {
        *last = loss_batch(*work, family, *zs, *auxs, origin_aux, cfg.weights, &g);
      } catch (const NumericError&) {
        g.setZero(theta.size());
        return std::numeric_limits<double>::infinity();
      }
      return last->loss;
    };
    obj.describe = [=](EpochRecord& r) {
      r.mean_energy = last->mean_energy;
      r.mean_constraint = last->mean_constraint;
      r.origin_norm = last->origin_norm;
    };
    return obj;
  };
  return run_training(init, family, cfg, monitor, std::move(resume), "self_supervised", *work, factory,
                      cfg.sampling == Sampling::stochastic);
}

double l2_loss(const SubspaceModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
               Eigen::VectorXd* grad) {
  MlpTape tape;
  const Eigen::MatrixXd y = mlp_forward_batch(model.mlp, inputs, grad ? &tape : nullptr);
  const Eigen::MatrixXd diff = y - targets;
  const double n = static_cast<double>(inputs.cols());
  const double loss = diff.squaredNorm() / n;
  if (grad) *grad = mlp_pullback_batch(model.mlp, tape, 2.0 * diff / n);
  return loss;
}

TrainResult train_supervised_l2(const SubspaceModel& init, const EnergyFamily& family, const OracleDataset& dataset,
                                const TrainConfig& cfg, const TrainMonitor& monitor, TrainingHistory resume) {
  if (dataset.manifest.family_fingerprint != family.fingerprint())
    throw InputError("l2 training: dataset was generated for a different energy model");
  if (dataset.manifest.basis_hash != basis_hash(init.basis.modes))
    throw InputError("l2 training: dataset was generated with a different modal basis");
  std::vector<const OracleSample*> used;
  for (const auto& s : dataset.samples)
    if (s.converged) used.push_back(&s);
  if (used.empty()) throw InputError("l2 training: dataset has no converged samples");

  const int m = init.m();
  const int a = init.aux_dim();
  const int n = static_cast<int>(used.size());
  Eigen::MatrixXd zs(m, n), auxs(a, n), targets(init.num_dofs(), n);
  for (int k = 0; k < n; ++k) {
    zs.col(k) = used[k]->z;
    if (a) auxs.col(k) = used[k]->aux;
    const EnergyModelPtr em = family.at(used[k]->aux);
    targets.col(k) = used[k]->x_star - em->rest_positions() - init.basis.modes * used[k]->z;
  }
  auto work = std::make_shared<SubspaceModel>(init);
  const Eigen::MatrixXd inputs = init.network_inputs(zs, auxs);
  auto last = std::make_shared<double>(0.0);
  const ObjectiveFactory factory = [=](int) {
    EpochObjective obj;
    obj.f = [=](const Eigen::VectorXd& theta, Eigen::VectorXd& g) {
      work->mlp.theta = theta;
      *last = l2_loss(*work, inputs, targets, &g);
      if (!std::isfinite(*last) || !g.allFinite()) {
        g.setZero(theta.size());
        return std::numeric_limits<double>::infinity();
      }
      return *last;
    };
    obj.describe = [](EpochRecord&) {};
    return obj;
  };
  return run_training(init, family, cfg, monitor, std::move(resume), "l2_supervised", *work, factory, false);
}

}  // namespace nmodes
