#include <doctest.h>

#include <Eigen/Geometry>

#include "neuralmodes/energy.hpp"
#include "neuralmodes/errors.hpp"
#include "support.hpp"

using namespace nmodes;
using nmodes::testing::central_gradient;
using nmodes::testing::max_rel_error;

namespace {

EnergyModel sheet_model() { return EnergyModel(make_rect_sheet(3, 3, 1.0), testing::soft_material()); }
EnergyModel box_model() { return EnergyModel(make_box_tets(2, 2, 1, {1.0, 1.0, 0.5}), testing::soft_material()); }

Eigen::VectorXd transform(const Eigen::VectorXd& x, const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index v = 0; v < x.size() / 3; ++v) out.segment<3>(3 * v) = r * x.segment<3>(3 * v) + t;
  return out;
}

}  // namespace

TEST_CASE("rest state has zero energy and gradient") {
  for (const EnergyModel& em : {sheet_model(), box_model()}) {
    CHECK(em.energy(em.rest_positions()) == doctest::Approx(0.0));
    CHECK(em.gradient(em.rest_positions()).norm() < 1e-10);
  }
}

TEST_CASE("gradient matches central differences") {
  for (const EnergyModel& em : {sheet_model(), box_model()}) {
    for (uint64_t seed = 1; seed <= 3; ++seed) {
      const Eigen::VectorXd x = testing::random_state(em.mesh(), seed);
      const Eigen::VectorXd g = em.gradient(x);
      const Eigen::VectorXd fd = central_gradient([&](const Eigen::VectorXd& p) { return em.energy(p); }, x, 1e-6);
      CHECK(max_rel_error(g, fd) < 1e-6);
    }
  }
}

TEST_CASE("hessian is symmetric and matches gradient differences") {
  for (const EnergyModel& em : {sheet_model(), box_model()}) {
    const Eigen::VectorXd x = testing::random_state(em.mesh(), 7);
    const Eigen::SparseMatrix<double> h = em.hessian(x);
    CHECK((Eigen::MatrixXd(h) - Eigen::MatrixXd(h).transpose()).cwiseAbs().maxCoeff() == 0.0);
    std::mt19937_64 rng(3);
    const Eigen::VectorXd v = testing::random_vector(x.size(), rng).normalized();
    const double eps = 1e-6;
    const Eigen::VectorXd fd = (em.gradient(x + eps * v) - em.gradient(x - eps * v)) / (2 * eps);
    CHECK(max_rel_error(h * v, fd) < 1e-6);
  }
}

TEST_CASE("energy is invariant under rigid motion") {
  for (const EnergyModel& em : {sheet_model(), box_model()}) {
    const Eigen::VectorXd x = testing::random_state(em.mesh(), 11);
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
    const double e0 = em.energy(x);
    CHECK(em.energy(transform(x, r, {0.3, -1.0, 2.0})) == doctest::Approx(e0).epsilon(1e-9));
  }
}

TEST_CASE("bending a sheet costs energy, stretching costs more") {
  const EnergyModel em(make_rect_sheet(10, 10, 1.0), testing::soft_material());
  const Mesh& m = em.mesh();
  // Cylinder of radius R: isometric, so only the hinges pay.
  const double R = 1.0;
  Eigen::VectorXd bent = m.rest_positions;
  for (int v = 0; v < m.num_vertices(); ++v) {
    const double s = m.vertex(v).x();
    bent[3 * v] = R * std::sin(s / R);
    bent[3 * v + 2] = R * (1 - std::cos(s / R));
  }
  const double plate = em.material().hinge_stiffness() * 6.0;
  const double continuum = 0.5 * plate / (R * R) * 1.0;  // D k^2 / 2 over unit area
  CHECK(em.energy(bent) == doctest::Approx(continuum).epsilon(0.15));

  Eigen::VectorXd stretched = m.rest_positions * 1.01;
  CHECK(em.energy(stretched) > 10 * em.energy(bent));
}

TEST_CASE("uniaxial stretch of a tet block matches StVK closed form") {
  const EnergyModel em = box_model();
  const Mesh& m = em.mesh();
  const double s = 1.05;
  Eigen::VectorXd x = m.rest_positions;
  for (int v = 0; v < m.num_vertices(); ++v) x[3 * v] *= s;
  const double eg = 0.5 * (s * s - 1.0);
  const MaterialParams& mat = em.material();
  const double psi = mat.lame_mu() * eg * eg + 0.5 * mat.lame_lambda() * eg * eg;
  CHECK(em.energy(x) == doctest::Approx(psi * 0.5).epsilon(1e-10));

  const ElementStress st = em.element_stress(x);
  const double s11 = 2 * mat.lame_mu() * eg + mat.lame_lambda() * eg;
  const double s22 = mat.lame_lambda() * eg;
  const double expected = std::sqrt(s11 * s11 + 2 * s22 * s22);
  CHECK(st.max() == doctest::Approx(expected).epsilon(1e-10));
  CHECK(st.weighted_mean() == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("attachments pull toward moving targets") {
  const Mesh m = make_rect_sheet(2, 2, 1.0);
  Attachment a;
  a.vertex = 4;
  a.stiffness = 10.0;
  a.anchor = m.vertex(4);
  a.amplitude = {0.0, 0.0, 0.1};
  a.frequency = 1.0;
  const EnergyModel em(m, testing::soft_material(), {a});
  // At t = 1/4 the target is 0.1 above rest.
  CHECK(em.energy(m.rest_positions, 0.25) == doctest::Approx(0.5 * 10.0 * 0.01));
  const Eigen::VectorXd g = em.gradient(m.rest_positions, 0.25);
  CHECK(g[14] == doctest::Approx(-1.0));

  const auto pins = pin_at_rest(m, {0, 8}, 1e5);
  CHECK(pins.size() == 2);
  CHECK(em.fingerprint() == EnergyModel(m, testing::soft_material()).fingerprint());
}

TEST_CASE("inputs are checked") {
  const EnergyModel em = sheet_model();
  CHECK_THROWS_AS(em.energy(Eigen::VectorXd::Zero(5)), InputError);
  Eigen::VectorXd x = em.rest_positions();
  x[0] = std::nan("");
  CHECK_THROWS_AS(em.energy(x), NumericError);
}
