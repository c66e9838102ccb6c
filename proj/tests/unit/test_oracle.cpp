#include <doctest.h>

#include <filesystem>

#include "neuralmodes/config.hpp"
#include "neuralmodes/errors.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/oracle.hpp"
#include "support.hpp"

using namespace nmodes;

namespace {

struct Fixture {
  EnergyModelPtr em;
  LinearModeBasis basis;
  Fixture() {
    em = std::make_shared<EnergyModel>(make_rect_sheet(5, 5, 1.0), ExperimentConfig::sheet_benchmark().material);
    basis = linear_modes(em->hessian(em->rest_positions()), 3);
  }
};

}  // namespace

TEST_CASE("oracle preserves the constraint and beats the linear shape") {
  Fixture f;
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd zs = DomainBox::cube(3, 0.625).uniform(6, rng);
  for (int c = 0; c < zs.cols(); ++c) {
    const Eigen::VectorXd z = zs.col(c);
    const OracleSample s = oracle_solve(*f.em, f.basis.modes, z);
    REQUIRE(s.converged);
    const Eigen::VectorXd u = s.x_star - f.em->rest_positions();
    CHECK((f.basis.modes.transpose() * u - z).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(s.e_star <= f.em->energy(f.em->rest_positions() + f.basis.modes * z));
    CHECK(s.e_star == doctest::Approx(f.em->energy(s.x_star)));
    const Eigen::VectorXd pg = project_out(f.basis.modes, f.em->gradient(s.x_star));
    CHECK(pg.norm() <= s.tolerance);
  }
}

TEST_CASE("feasible perturbations do not lower the oracle energy") {
  Fixture f;
  const Eigen::Vector3d z(0.4, -0.3, 0.5);
  const OracleSample s = oracle_solve(*f.em, f.basis.modes, z);
  REQUIRE(s.converged);
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    const Eigen::VectorXd d = project_out(f.basis.modes, testing::random_vector(s.x_star.size(), rng)).normalized();
    CHECK(f.em->energy(s.x_star + 1e-3 * d) >= s.e_star);
  }
}

TEST_CASE("warm start reaches the same minimizer") {
  Fixture f;
  const Eigen::Vector3d z0(0.2, 0.1, 0.0), z1(0.25, 0.1, 0.0);
  const OracleSample a = oracle_solve(*f.em, f.basis.modes, z0);
  const Eigen::VectorXd warm = a.x_star - f.em->rest_positions();
  const OracleSample cold = oracle_solve(*f.em, f.basis.modes, z1);
  const OracleSample hot = oracle_solve(*f.em, f.basis.modes, z1, {}, {}, &warm);
  CHECK(hot.converged);
  CHECK(hot.e_star == doctest::Approx(cold.e_star).epsilon(1e-4));
}

TEST_CASE("grid datasets are ordered, hashed and round-trip") {
  Fixture f;
  const EnergyFamily fam(f.em);
  const DomainBox box = DomainBox::cube(3, 0.625);
  const OracleDataset d = generate_oracle_dataset(fam, f.basis.modes, DatasetSpec::make_grid(3), box);
  REQUIRE(d.size() == 27);
  CHECK(d.num_unconverged() == 0);
  CHECK(d.samples[0].z == box.lo);
  CHECK(d.samples[1].z[2] == doctest::Approx(0.0));
  CHECK(d.samples[26].z == box.hi);
  CHECK(d.manifest.family_fingerprint == fam.fingerprint());
  CHECK(d.manifest.basis_hash == basis_hash(f.basis.modes));

  const auto path = std::filesystem::temp_directory_path() / "nmodes_ds_test.json";
  save_dataset(d, path.string());
  const OracleDataset back = load_dataset(path.string());
  CHECK(back.hash() == d.hash());
  CHECK(back.samples[13].x_star == d.samples[13].x_star);
  std::filesystem::remove(path);

  const auto parts = split_dataset(d, {20, 2, 5});
  CHECK(parts[1].size() == 2);
  CHECK(parts[2].samples[0].z == d.samples[22].z);
  CHECK_THROWS_AS(split_dataset(d, {20, 2}), InputError);

  const OracleDataset again = generate_oracle_dataset(fam, f.basis.modes, DatasetSpec::make_grid(3), box);
  for (int i = 0; i < d.size(); ++i) CHECK(again.samples[i].x_star == d.samples[i].x_star);
}

TEST_CASE("random datasets are reproducible from the seed") {
  Fixture f;
  const EnergyFamily fam(f.em);
  const DomainBox box = DomainBox::cube(3, 0.625);
  const auto a = generate_oracle_dataset(fam, f.basis.modes, DatasetSpec::make_random(4, 17), box);
  const auto b = generate_oracle_dataset(fam, f.basis.modes, DatasetSpec::make_random(4, 17), box);
  CHECK(a.hash() == b.hash());
  for (const auto& s : a.samples) CHECK(box.contains(s.z));
}

TEST_CASE("bad inputs and failed solves are reported") {
  Fixture f;
  const EnergyFamily fam(f.em);
  CHECK_THROWS_AS(oracle_solve(*f.em, f.basis.modes, Eigen::VectorXd::Zero(2)), InputError);
  CHECK_THROWS_AS(DatasetSpec::make_grid(1).validate(), InputError);
  OracleOptions starve;
  starve.max_iterations = 1;
  CHECK_THROWS_AS(
      generate_oracle_dataset(fam, f.basis.modes, DatasetSpec::make_random(4, 1), DomainBox::cube(3, 0.625), starve),
      NumericError);
}
