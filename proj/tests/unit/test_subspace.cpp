#include <doctest.h>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/subspace.hpp"
#include "support.hpp"

using namespace nmodes;
using nmodes::testing::central_gradient;
using nmodes::testing::max_rel_error;

namespace {

SubspaceModel randomized(const EnergyFamily& fam, uint64_t seed, double scale) {
  const EnergyModel& em = *fam.reference();
  LinearModeBasis b = linear_modes(em.hessian(em.rest_positions()), 2);
  SubspaceModel m = SubspaceModel::create(fam, b, DomainBox::cube(2, 0.5), {6, 5}, seed);
  std::mt19937_64 rng(seed);
  m.mlp.theta = testing::random_vector(m.mlp.theta.size(), rng, scale);
  return m;
}

}  // namespace

TEST_CASE("loss gradient matches finite differences on a four-vertex sheet") {
  const EnergyFamily fam(std::make_shared<EnergyModel>(make_rect_sheet(1, 1, 1.0), testing::soft_material()));
  SubspaceModel m = randomized(fam, 1, 0.05);
  Eigen::MatrixXd zs(2, 3);
  zs << 0.3, -0.2, 0.1, 0.05, 0.4, -0.35;
  const Eigen::MatrixXd aux(0, 3);
  const LossWeights w{10.0, 5.0};
  Eigen::VectorXd g;
  const LossValue v = loss_batch(m, fam, zs, aux, origin_aux_points(fam.aux()), w, &g);
  auto f = [&](const Eigen::VectorXd& theta) {
    SubspaceModel q = m;
    q.mlp.theta = theta;
    return loss_batch(q, fam, zs, aux, origin_aux_points(fam.aux()), w, nullptr).loss;
  };
  CHECK(max_rel_error(g, central_gradient(f, m.mlp.theta, 1e-6)) < 1e-6);
  CHECK(v.loss == doctest::Approx(v.mean_energy + w.lambda * v.mean_constraint + w.eta * v.origin_norm * v.origin_norm));
}

TEST_CASE("loss gradient with an aspect-ratio family") {
  AuxSpec aux;
  aux.name = "aspect_ratio";
  aux.lo = 0.8;
  aux.hi = 1.25;
  aux.reference = 1.0;
  aux.nx = aux.ny = 2;
  const EnergyFamily fam(aux, testing::soft_material());
  const EnergyModel& em = *fam.reference();
  LinearModeBasis b = linear_modes(em.hessian(em.rest_positions()), 2);
  SubspaceModel m = SubspaceModel::create(fam, b, DomainBox::cube(2, 0.5), {5}, 2);
  std::mt19937_64 rng(2);
  m.mlp.theta = testing::random_vector(m.mlp.theta.size(), rng, 0.05);
  CHECK(m.mlp.input_dim() == 3);

  Eigen::MatrixXd zs(2, 2), av(1, 2);
  zs << 0.3, -0.2, 0.1, 0.4;
  av << 0.9, 1.2;
  const Eigen::MatrixXd origins = origin_aux_points(aux);
  CHECK(origins.cols() == 5);
  CHECK(origins(0, 0) == 0.8);
  CHECK(origins(0, 4) == 1.25);
  Eigen::VectorXd g;
  loss_batch(m, fam, zs, av, origins, {10.0, 5.0}, &g);
  auto f = [&](const Eigen::VectorXd& theta) {
    SubspaceModel q = m;
    q.mlp.theta = theta;
    return loss_batch(q, fam, zs, av, origins, {10.0, 5.0}, nullptr).loss;
  };
  CHECK(max_rel_error(g, central_gradient(f, m.mlp.theta, 1e-6)) < 1e-6);
  CHECK(fam.at(Eigen::VectorXd::Constant(1, 0.9))->num_dofs() == fam.num_dofs());
  CHECK(fam.at(Eigen::VectorXd::Constant(1, 0.9)) == fam.at(Eigen::VectorXd::Constant(1, 0.9)));
}

TEST_CASE("decode is rest plus linear plus correction") {
  const EnergyFamily fam(std::make_shared<EnergyModel>(make_rect_sheet(3, 3, 1.0), testing::soft_material()));
  const SubspaceModel zero = randomized(fam, 3, 0.0);
  const Eigen::Vector2d z(0.1, -0.3);
  CHECK((zero.decode(*fam.reference(), z) - fam.reference()->rest_positions() - zero.basis.modes * z).norm() < 1e-12);

  const SubspaceModel m = randomized(fam, 4, 0.3);
  const Eigen::VectorXd y = m.correction(z);
  CHECK((m.displacement(z) - m.basis.modes * z - y).norm() < 1e-15);
  const Eigen::MatrixXd j = m.displacement_jacobian(z);
  Eigen::MatrixXd fd(m.num_dofs(), 2);
  for (int i = 0; i < 2; ++i) {
    Eigen::Vector2d a = z, b = z;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    fd.col(i) = (m.displacement(a) - m.displacement(b)) / 2e-6;
  }
  CHECK((j - fd).cwiseAbs().maxCoeff() < 1e-7);
  std::mt19937_64 rng(1);
  const Eigen::VectorXd c = testing::random_vector(m.num_dofs(), rng);
  CHECK((m.displacement_vjp(z, {}, c) - j.transpose() * c).norm() < 1e-10);
}

TEST_CASE("shape and compatibility checks") {
  const EnergyFamily fam(std::make_shared<EnergyModel>(make_rect_sheet(3, 3, 1.0), testing::soft_material()));
  const SubspaceModel m = randomized(fam, 3, 0.0);
  CHECK_THROWS_AS(m.correction(Eigen::VectorXd::Zero(3)), InputError);
  CHECK_NOTHROW(m.check_compatible(fam));
  MaterialParams stiff = testing::soft_material();
  stiff.young_modulus *= 2;
  const EnergyFamily other(std::make_shared<EnergyModel>(make_rect_sheet(3, 3, 1.0), stiff));
  CHECK_THROWS_AS(m.check_compatible(other), InputError);
}
