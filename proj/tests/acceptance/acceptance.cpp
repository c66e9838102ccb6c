// Acceptance run for the sheet benchmark: one PASS/FAIL line per criterion.
//
//   acceptance            all criteria
//   acceptance 1 2 9      a subset (4-8 share one training run)
//
// Exit status is the number of failed criteria (0 when all pass).

#include <chrono>
#include <cstdio>
#include <iostream>
#include <set>
#include <sstream>

#include "neuralmodes/config.hpp"
#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/evaluation.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/training.hpp"
#include "support.hpp"

using namespace nmodes;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << "criterion " << id << " (" << name << "): " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
            << std::endl;
  failures += !o.pass;
}

ExperimentConfig benchmark() { return ExperimentConfig::sheet_benchmark(); }

// 1 ------------------------------------------------------------------------

Outcome derivatives() {
  const auto t0 = Clock::now();
  const MaterialParams mat = benchmark().material;
  const EnergyModel shell(make_rect_sheet(10, 10, 1.0), mat);
  const EnergyModel solid(make_box_tets(3, 3, 2, {1.0, 1.0, 0.5}), mat);
  double grad_err = 0.0, hess_err = 0.0;
  for (const EnergyModel* em : {&shell, &solid}) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      const Eigen::VectorXd x = testing::random_state(em->mesh(), seed);
      const double h = 1e-6 * em->mesh().scale();
      const Eigen::VectorXd g = em->gradient(x);
      const Eigen::VectorXd fd =
          testing::central_gradient([&](const Eigen::VectorXd& p) { return em->energy(p); }, x, h);
      grad_err = std::max(grad_err, testing::max_rel_error(g, fd));

      std::mt19937_64 rng(seed + 10);
      const Eigen::VectorXd v = testing::random_vector(x.size(), rng).normalized();
      const Eigen::VectorXd hv = em->hessian(x) * v;
      const Eigen::VectorXd gd = (em->gradient(x + h * v) - em->gradient(x - h * v)) / (2 * h);
      hess_err = std::max(hess_err, testing::max_rel_error(hv, gd));
    }
  }
  const double wall = seconds_since(t0);
  return {grad_err < 1e-5 && hess_err < 1e-4 && wall < 60.0,
          fmt("max rel grad err %.2e (< 1e-5), Hv err %.2e (< 1e-4), %.1f s (< 60 s)", grad_err, hess_err, wall)};
}

// 2 ------------------------------------------------------------------------

Outcome modal() {
  const auto t0 = Clock::now();
  const EnergyModel em(make_rect_sheet(10, 10, 1.0), benchmark().material);
  const auto h = em.hessian(em.rest_positions());
  const LinearModeBasis b = linear_modes(h, 3);
  const double wall = seconds_since(t0);
  double res = 0.0;
  for (int i = 0; i < b.size(); ++i)
    res = std::max(res, (h * b.modes.col(i) - b.eigenvalues[i] * b.modes.col(i)).norm() / b.lambda_max);
  const double ortho = (b.modes.transpose() * b.modes - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff();
  std::ostringstream ev;
  for (int i = 0; i < 3; ++i) ev << (i ? ", " : "") << b.eigenvalues[i];
  return {b.num_filtered_rigid == 6 && res <= 1e-8 && ortho <= 1e-8 && wall < 10.0,
          fmt("%d rigid filtered, residual %.2e lambda_max, orthonormality %.2e, %.2f s; eigenvalues ",
              b.num_filtered_rigid, res, ortho, wall) +
              ev.str()};
}

// 3 ------------------------------------------------------------------------

Outcome oracle_validity() {
  const auto t0 = Clock::now();
  const EnergyModel em(make_rect_sheet(10, 10, 1.0), benchmark().material);
  const LinearModeBasis b = linear_modes(em.hessian(em.rest_positions()), 3);
  std::mt19937_64 rng(2024);
  const Eigen::MatrixXd zs = DomainBox::cube(3, 0.625).uniform(50, rng);
  double max_res = 0.0;
  int above_linear = 0, decreases = 0, unconverged = 0, perturbations = 0;
  const double eps = 1e-3 * em.mesh().scale();
  for (int c = 0; c < 50; ++c) {
    const Eigen::VectorXd z = zs.col(c);
    const OracleSample s = oracle_solve(em, b.modes, z);
    unconverged += !s.converged;
    max_res = std::max(max_res, (b.modes.transpose() * (s.x_star - em.rest_positions()) - z).cwiseAbs().maxCoeff());
    above_linear += s.e_star > em.energy(em.rest_positions() + b.modes * z);
    for (int k = 0; k < 100; ++k) {
      // Feasible: keeps every modal coordinate, i.e. lies in the null space of E^T.
      const Eigen::VectorXd d = project_out(b.modes, testing::random_vector(s.x_star.size(), rng)).normalized();
      decreases += em.energy(s.x_star + eps * d) < s.e_star;
      ++perturbations;
    }
  }
  const double wall = seconds_since(t0);
  return {max_res < 1e-9 && above_linear == 0 && decreases == 0 && unconverged == 0 && wall < 600,
          fmt("constraint residual %.2e (< 1e-9), %d samples above E(X+l), %d/%d perturbations decreased, "
              "%d unconverged, %.1f s",
              max_res, above_linear, decreases, perturbations, unconverged, wall)};
}

// 4-8 ----------------------------------------------------------------------

struct Benchmark {
  EnergyFamilyPtr family;
  LinearModeBasis basis;
  OracleDataset train, val, test;
  double oracle_seconds = 0.0;
  TrainResult self, l2;
  double self_seconds = 0.0, l2_seconds = 0.0;
  SplitMetrics self_test, l2_test;
};

Benchmark run_benchmark() {
  Benchmark bm;
  const ExperimentConfig cfg = benchmark();
  bm.family = cfg.build_family();
  const EnergyModel& em = *bm.family->reference();
  bm.basis = linear_modes(em.hessian(em.rest_positions()), cfg.modes);
  const DomainBox box = cfg.domain();

  auto t0 = Clock::now();
  bm.train = generate_oracle_dataset(*bm.family, bm.basis.modes, DatasetSpec::make_grid(9), box, cfg.oracle);
  bm.val = generate_oracle_dataset(*bm.family, bm.basis.modes, DatasetSpec::make_grid(7), box, cfg.oracle);
  bm.test = generate_oracle_dataset(*bm.family, bm.basis.modes, DatasetSpec::make_grid(11), box, cfg.oracle);
  bm.oracle_seconds = seconds_since(t0);
  std::cout << fmt("  oracle datasets 9^3/7^3/11^3: %d/%d/%d unconverged, E* test mean %.4g, %.1f s",
                   bm.train.num_unconverged(), bm.val.num_unconverged(), bm.test.num_unconverged(),
                   evaluate_split(oracle_predictor(), *bm.family, bm.basis.modes, bm.test, "t").energy.oracle_energy_avg,
                   bm.oracle_seconds)
            << std::endl;

  const SubspaceModel init = SubspaceModel::create(*bm.family, bm.basis, box, cfg.train.hidden, cfg.train.init_seed);
  TrainConfig tc = cfg.train;
  tc.epochs = 5000;
  tc.eval_every = 25;
  TrainMonitor mon;
  mon.validation = &bm.val;
  mon.test = &bm.test;

  t0 = Clock::now();
  bm.self = train(init, *bm.family, tc, mon);
  bm.self_seconds = seconds_since(t0);
  std::cout << fmt("  self-supervised: %zu epochs, stop %s, %.1f s", bm.self.history.epochs.size(),
                   bm.self.history.stop_reason.c_str(), bm.self_seconds)
            << std::endl;

  t0 = Clock::now();
  bm.l2 = train_supervised_l2(init, *bm.family, bm.train, tc, mon);
  bm.l2_seconds = seconds_since(t0);
  std::cout << fmt("  l2-supervised: %zu epochs, stop %s, %.1f s", bm.l2.history.epochs.size(),
                   bm.l2.history.stop_reason.c_str(), bm.l2_seconds)
            << std::endl;

  bm.self_test = evaluate_split(model_predictor(bm.self.model, *bm.family), *bm.family, bm.basis.modes, bm.test, "self");
  bm.l2_test = evaluate_split(model_predictor(bm.l2.model, *bm.family), *bm.family, bm.basis.modes, bm.test, "l2");
  return bm;
}

Outcome energy_gap(const Benchmark& bm) {
  const double s = bm.self_test.energy.delta_avg, l = bm.l2_test.energy.delta_avg;
  const bool budget = bm.oracle_seconds <= 7200 && bm.self_seconds <= 7200 && bm.l2_seconds <= 7200;
  return {s <= l / 3.0 && budget && bm.self_test.valid && bm.l2_test.valid,
          fmt("test dE_avg self %.4g vs l2 %.4g (ratio %.1fx, need >= 3x); oracle %.0f s, self %.0f s, l2 %.0f s",
              s, l, l / s, bm.oracle_seconds, bm.self_seconds, bm.l2_seconds)};
}

std::pair<double, double> final_and_min_test_energy(const TrainingHistory& h) {
  double last = std::nan(""), lo = std::numeric_limits<double>::infinity();
  for (const auto& r : h.epochs) {
    if (!std::isfinite(r.test_energy)) continue;
    last = r.test_energy;
    lo = std::min(lo, r.test_energy);
  }
  return {last, lo};
}

Outcome overfitting(const Benchmark& bm) {
  const auto [lf, lm] = final_and_min_test_energy(bm.l2.history);
  const auto [sf, sm] = final_and_min_test_energy(bm.self.history);
  return {lf > 1.25 * lm && sf <= 1.10 * sm,
          fmt("l2 final test energy %.4g vs min %.4g (+%.0f%%, need > 25%%); self final %.4g vs min %.4g (+%.1f%%, "
              "need <= 10%%)",
              lf, lm, 100 * (lf / lm - 1), sf, sm, 100 * (sf / sm - 1))};
}

Outcome stress_force(const Benchmark& bm) {
  const double ss = bm.self_test.stress.weighted_delta_avg, ls = bm.l2_test.stress.weighted_delta_avg;
  const double sf = bm.self_test.force.delta_l2, lf = bm.l2_test.force.delta_l2;
  return {ss <= 0.5 * ls && sf <= 0.5 * lf,
          fmt("d|S| area-weighted self %.4g vs l2 %.4g (%.1fx); |dF|_2 self %.4g vs l2 %.4g (%.1fx); need >= 2x", ss,
              ls, ls / ss, sf, lf, lf / sf)};
}

Outcome structure(const Benchmark& bm) {
  const StructureReport r = structure_checks(bm.self.model, *bm.family, 0);
  Eigen::MatrixXd zs(3, bm.test.size());
  for (int k = 0; k < bm.test.size(); ++k) zs.col(k) = bm.test.samples[k].z;
  const double cr = constraint_ratio(bm.self.model, zs);
  return {r.origin_residual < 0.01 && cr < 1e-4,
          fmt("origin residual %.2e of mesh scale (< 1e-2), mean (l.y)^2/(|l|^2|y|^2) %.2e (< 1e-4); "
              "symmetry residual %.2e, smoothness %.3g",
              r.origin_residual, cr, r.symmetry_residual, r.smoothness)};
}

Outcome collapse(const Benchmark& bm) {
  const CorrelationResult c = correlation_diagnostic(bm.self.model);
  const SubspaceModel zero = SubspaceModel::create(*bm.family, bm.basis, bm.self.model.box, {64, 64, 64, 64, 64}, 0);
  const CorrelationResult z = correlation_diagnostic(zero);
  const double id_err = (z.matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  bool in_range = true;
  for (int i = 0; i < c.eigenvalues.size(); ++i) in_range &= c.eigenvalues[i] >= 0.5 && c.eigenvalues[i] <= 1.5;
  return {in_range && id_err < 1e-12,
          fmt("trained eigenvalues %.4f %.4f %.4f (in [0.5, 1.5]), %s; zero-network |C - I|_max %.1e", c.eigenvalues[0],
              c.eigenvalues[1], c.eigenvalues[2], c.verdict.c_str(), id_err)};
}

// 9 ------------------------------------------------------------------------

Outcome dynamics(const SubspaceModel& model, const EnergyFamily& family) {
  ExperimentConfig cfg = benchmark();
  cfg.pins.select = "min";
  cfg.pins.axis = 0;
  const Mesh mesh = family.reference()->mesh();
  const EnergyModelPtr pinned = cfg.build_dynamics_energy(mesh);

  // Rest: the subspace shape at z = 0 under static pins.
  const SubspaceDynamics rest_dyn(model, pinned, cfg.dynamics.options);
  const Trajectory rest = simulate(rest_dyn, rest_dyn.initial_state(Eigen::VectorXd::Zero(model.m())), 100);
  double max_du = 0.0, later_du = 0.0;
  for (size_t k = 1; k < rest.positions.size(); ++k) {
    const double du = (rest.positions[k] - rest.positions[k - 1]).norm();
    max_du = std::max(max_du, du);
    if (k > 1) later_du = std::max(later_du, du);
  }
  // Diagnostics only: the reduced force left at z = 0 by y(0) != 0, and the
  // same test with y = 0.
  Eigen::VectorXd g0;
  const DynamicsState s0 = rest_dyn.initial_state(Eigen::VectorXd::Zero(model.m()));
  rest_dyn.step_objective(s0, Eigen::VectorXd::Zero(model.m()), &g0);
  DynamicsOptions lin = cfg.dynamics.options;
  lin.linear_baseline = true;
  const SubspaceDynamics lin_dyn(model, pinned, lin);
  const Trajectory lin_rest = simulate(lin_dyn, lin_dyn.initial_state(Eigen::VectorXd::Zero(model.m())), 100);
  double lin_du = 0.0;
  for (size_t k = 1; k < lin_rest.positions.size(); ++k)
    lin_du = std::max(lin_du, (lin_rest.positions[k] - lin_rest.positions[k - 1]).norm());

  // Free vibration of the unpinned sheet from a bent state.
  const SubspaceDynamics free_dyn(model, family.reference(), cfg.dynamics.options);
  const Trajectory vib = simulate(free_dyn, free_dyn.initial_state(Eigen::Vector3d(0.5, -0.3, 0.4)), 100);
  double worst_rise = 0.0;
  int rises = 0, failed = 0;
  for (size_t k = 1; k < vib.frames.size(); ++k) {
    failed += !vib.frames[k].error.empty();
    const double rise = vib.frames[k].total_energy - vib.frames[k - 1].total_energy;
    // A step solved to reduced-gradient tolerance tol may miss the minimizer by
    // O(tol * |dq|); allow that much.
    const Eigen::VectorXd dq = vib.frames[k].z - vib.frames[k - 1].z;
    const double slack = free_dyn.tolerance() * dq.norm() + 1e-12 * vib.frames[0].total_energy;
    if (rise > slack) {
      ++rises;
      worst_rise = std::max(worst_rise, rise);
    }
  }
  const double mean_ms = 0.5 * (rest.mean_step_ms() + vib.mean_step_ms());
  return {max_du < 1e-8 && rises == 0 && failed == 0,
          fmt("rest max |du| per step %.2e (< 1e-8) [after step 1: %.2e; reduced force at z=0 %.3g vs tolerance %.3g; "
              "linear modes %.2e]; free vibration energy %.4g -> %.4g, %d rises beyond tolerance "
              "(worst %.2e), %d failed steps; step wall time %.2f ms mean, %.2f ms max (h = 40 ms; reported)",
              max_du, later_du, g0.norm(), rest_dyn.tolerance(), lin_du, vib.frames.front().total_energy, vib.frames.back().total_energy, rises, worst_rise, failed,
              mean_ms, std::max(rest.max_step_ms(), vib.max_step_ms()))};
}

// 10 -----------------------------------------------------------------------

Outcome keyframing(const SubspaceModel& model, const EnergyFamily& family) {
  const EnergyModel& em = *family.reference();
  const std::vector<Keyframe> keys = {{0.0, Eigen::Vector3d(0.5, 0.2, -0.3)}, {1.0, Eigen::Vector3d(-0.4, 0.5, 0.3)},
                                      {2.5, Eigen::Vector3d(0.0, -0.6, 0.1)}};
  bool exact = true;
  for (const auto& k : keys) exact &= model.decode(em, interpolate_keyframes(keys, k.t)) == model.decode(em, k.z);
  double worst = 0.0;
  bool finite = true;
  for (size_t k = 0; k + 1 < keys.size(); ++k) {
    const double tm = 0.5 * (keys[k].t + keys[k + 1].t);
    const double em_mid = em.energy(model.decode(em, interpolate_keyframes(keys, tm)));
    const double ends = std::max(em.energy(model.decode(em, keys[k].z)), em.energy(model.decode(em, keys[k + 1].z)));
    finite &= std::isfinite(em_mid);
    worst = std::max(worst, em_mid / ends);
  }
  return {exact && finite && worst <= 10.0,
          fmt("key frames bitwise equal: %s; midpoint energy / max endpoint energy %.3f (<= 10)", exact ? "yes" : "no",
              worst)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> want;
  for (int i = 1; i < argc; ++i) want.insert(std::atoi(argv[i]));
  auto on = [&](int id) { return want.empty() || want.count(id); };

  if (on(1)) report(1, "derivatives", derivatives());
  if (on(2)) report(2, "modal analysis", modal());
  if (on(3)) report(3, "oracle validity", oracle_validity());

  const bool need_training = on(4) || on(5) || on(6) || on(7) || on(8) || on(9) || on(10);
  if (need_training) {
    const Benchmark bm = run_benchmark();
    if (on(4)) report(4, "sheet benchmark energy gap", energy_gap(bm));
    if (on(5)) report(5, "overfitting", overfitting(bm));
    if (on(6)) report(6, "stress and force gaps", stress_force(bm));
    if (on(7)) report(7, "origin and orthogonality", structure(bm));
    if (on(8)) report(8, "mode collapse", collapse(bm));
    if (on(9)) report(9, "dynamics", dynamics(bm.self.model, *bm.family));
    if (on(10)) report(10, "keyframing", keyframing(bm.self.model, *bm.family));
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : "all criteria passed") << std::endl;
  return failures;
}
