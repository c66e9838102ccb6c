// Hot paths of the sheet benchmark: energy queries, network passes, the
// training loss, the oracle solve and one dynamics step.

#include <random>

#include <benchmark/benchmark.h>

#include "neuralmodes/config.hpp"
#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/subspace.hpp"

using namespace nmodes;

namespace {

struct Sheet {
  EnergyFamilyPtr family;
  SubspaceModel model;
  Eigen::VectorXd state;

  Sheet() {
    const ExperimentConfig cfg = ExperimentConfig::sheet_benchmark();
    family = cfg.build_family();
    const EnergyModel& em = *family->reference();
    model = SubspaceModel::create(*family, linear_modes(em.hessian(em.rest_positions()), 3), cfg.domain(),
                                  cfg.train.hidden, 0);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.02);
    for (Eigen::Index i = 0; i < model.mlp.theta.size(); ++i) model.mlp.theta[i] = n(rng);
    state = em.rest_positions();
    for (Eigen::Index i = 0; i < state.size(); ++i) state[i] += n(rng);
  }
};

const Sheet& sheet() {
  static const Sheet s;
  return s;
}

void BM_Energy(benchmark::State& st) {
  const auto& s = sheet();
  for (auto _ : st) benchmark::DoNotOptimize(s.family->reference()->energy(s.state));
}
BENCHMARK(BM_Energy);

void BM_EnergyGradient(benchmark::State& st) {
  const auto& s = sheet();
  Eigen::VectorXd g;
  for (auto _ : st) benchmark::DoNotOptimize(s.family->reference()->energy_and_gradient(s.state, 0.0, g));
}
BENCHMARK(BM_EnergyGradient);

void BM_Hessian(benchmark::State& st) {
  const auto& s = sheet();
  for (auto _ : st) benchmark::DoNotOptimize(s.family->reference()->hessian(s.state).nonZeros());
}
BENCHMARK(BM_Hessian);

void BM_MlpForwardBatch(benchmark::State& st) {
  const auto& s = sheet();
  const Eigen::MatrixXd in = Eigen::MatrixXd::Random(3, st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(mlp_forward_batch(s.model.mlp, in).data());
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_MlpForwardBatch)->Arg(1)->Arg(729);

void BM_LossAndGradient(benchmark::State& st) {
  const auto& s = sheet();
  const Eigen::MatrixXd zs = s.model.box.grid(9);
  const Eigen::MatrixXd aux(0, zs.cols());
  const Eigen::MatrixXd origin = origin_aux_points(s.model.aux);
  Eigen::VectorXd g;
  for (auto _ : st) benchmark::DoNotOptimize(loss_batch(s.model, *s.family, zs, aux, origin, {}, &g).loss);
}
BENCHMARK(BM_LossAndGradient)->Unit(benchmark::kMillisecond);

void BM_OracleSolve(benchmark::State& st) {
  const auto& s = sheet();
  const Eigen::Vector3d z(0.4, -0.3, 0.5);
  for (auto _ : st) benchmark::DoNotOptimize(oracle_solve(*s.family->reference(), s.model.basis.modes, z).e_star);
}
BENCHMARK(BM_OracleSolve)->Unit(benchmark::kMillisecond);

void BM_DynamicsStep(benchmark::State& st) {
  const auto& s = sheet();
  DynamicsOptions opt;
  opt.rigid = st.range(0) != 0;
  const SubspaceDynamics dyn(s.model, s.family->reference(), opt);
  const DynamicsState s0 = dyn.initial_state(Eigen::Vector3d(0.3, -0.2, 0.1));
  for (auto _ : st) benchmark::DoNotOptimize(dyn.step(s0).z.data());
}
BENCHMARK(BM_DynamicsStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
