#include <doctest.h>

#include <json.hpp>

#include "neuralmodes/config.hpp"
#include "neuralmodes/errors.hpp"
#include "neuralmodes/evaluation.hpp"
#include "neuralmodes/modal.hpp"
#include "support.hpp"

using namespace nmodes;

namespace {

struct Fixture {
  EnergyFamilyPtr fam;
  SubspaceModel linear;
  OracleDataset data;
  Fixture() {
    fam = std::make_shared<EnergyFamily>(
        std::make_shared<EnergyModel>(make_rect_sheet(4, 4, 1.0), ExperimentConfig::sheet_benchmark().material));
    const EnergyModel& em = *fam->reference();
    linear = SubspaceModel::create(*fam, linear_modes(em.hessian(em.rest_positions()), 3), DomainBox::cube(3, 0.625),
                                   {16, 16}, 0);
    data = generate_oracle_dataset(*fam, linear.basis.modes, DatasetSpec::make_grid(3), linear.box);
  }
};

}  // namespace

TEST_CASE("oracle evaluated against itself has zero error") {
  Fixture f;
  const SplitMetrics s = evaluate_split(oracle_predictor(), *f.fam, f.linear.basis.modes, f.data, "self");
  CHECK(s.count == 27);
  CHECK(s.valid);
  CHECK(s.l2 == 0.0);
  CHECK(s.energy.delta_avg == 0.0);
  CHECK(s.energy.delta_max == 0.0);
  CHECK(s.stress.weighted_delta_avg == 0.0);
  CHECK(s.force.delta_l2 == 0.0);
  CHECK(s.force.oracle_projected_max <= f.data.manifest.max_gradient_norm + 1e-12);
}

TEST_CASE("linear subspace is never below the oracle") {
  Fixture f;
  const SplitMetrics s = evaluate_split(model_predictor(f.linear, *f.fam), *f.fam, f.linear.basis.modes, f.data, "lin");
  CHECK(s.energy.delta_min >= 0.0);
  CHECK(s.energy.delta_avg > 0.0);
  CHECK(s.energy.below_tolerance == 0);
  CHECK(s.l2 > 0.0);

  const auto parts = evaluate_subintervals(model_predictor(f.linear, *f.fam), *f.fam, f.linear.basis.modes, f.data);
  REQUIRE(parts.size() == 5);
  int total = 0;
  for (const auto& p : parts) total += p.count;
  CHECK(total == 27);
  CHECK(parts[0].name == "0-20%");
}

TEST_CASE("zero network correlation is the identity") {
  Fixture f;
  const CorrelationResult c = correlation_diagnostic(f.linear);
  CHECK((c.matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(c.collapsed == 0);
  CHECK(c.verdict == "no collapse");

  Eigen::MatrixXd dirs(3, 3);
  dirs << 1, 1, 0, 0, 0, 0, 0, 0, 1;  // two identical directions
  const CorrelationResult d = correlation_from_directions(dirs);
  CHECK(d.collapsed == 1);
  CHECK(d.verdict == "effectively 2-dimensional");
}

TEST_CASE("structure checks on the linear subspace") {
  Fixture f;
  const StructureReport r = structure_checks(f.linear, *f.fam, 1);
  CHECK(r.origin_residual == 0.0);
  CHECK(r.symmetry_checked);
  CHECK(r.symmetry_residual < 1e-10);
  CHECK(r.smoothness < 1e-6);
  CHECK(constraint_ratio(f.linear, f.linear.box.grid(4)) == 0.0);
}

TEST_CASE("report serializes and rejects foreign datasets") {
  Fixture f;
  MetricsReport rep;
  rep.checkpoint_hash = "abc";
  rep.dataset_hashes = {f.data.hash()};
  rep.splits.push_back(evaluate_split(oracle_predictor(), *f.fam, f.linear.basis.modes, f.data, "test"));
  rep.correlation = correlation_diagnostic(f.linear);
  const auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j.at("checkpoint_hash") == "abc");
  CHECK(rep.to_csv().find("test") != std::string::npos);
  CHECK_FALSE(rep.summary().empty());

  OracleDataset foreign = f.data;
  foreign.manifest.family_fingerprint = "ffff";
  CHECK_THROWS_AS(evaluate_split(oracle_predictor(), *f.fam, f.linear.basis.modes, foreign, "x"), InputError);
}
