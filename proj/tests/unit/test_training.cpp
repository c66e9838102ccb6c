#include <doctest.h>

#include <filesystem>

#include "neuralmodes/checkpoint.hpp"
#include "neuralmodes/errors.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/training.hpp"
#include "support.hpp"

using namespace nmodes;

namespace {

struct Small {
  EnergyFamilyPtr fam;
  SubspaceModel init;
  TrainConfig cfg;
  Small() {
    MaterialParams mat = testing::soft_material();
    mat.young_modulus = 1e6;
    fam = std::make_shared<EnergyFamily>(std::make_shared<EnergyModel>(make_rect_sheet(3, 3, 1.0), mat));
    const EnergyModel& em = *fam->reference();
    init = SubspaceModel::create(*fam, linear_modes(em.hessian(em.rest_positions()), 2), DomainBox::cube(2, 0.4),
                                 {8, 8}, 1);
    cfg.hidden = {8, 8};
    cfg.grid_resolution = 4;
    cfg.epochs = 40;
    cfg.weights = {1e4, 1e4};
  }
};

}  // namespace

TEST_CASE("self-supervised training lowers the loss and keeps a history") {
  Small s;
  const TrainResult r = train(s.init, *s.fam, s.cfg);
  REQUIRE(r.history.epochs.size() == 40);
  CHECK(r.history.mode == "self_supervised");
  CHECK(r.history.epochs.back().loss < 0.5 * r.history.epochs.front().loss);
  CHECK_FALSE(r.diverged);
  CHECK(r.history.epochs.front().epoch == 1);

  const TrainResult more = train(r.last, *s.fam, s.cfg, {}, r.history);
  CHECK(more.history.epochs.size() == 80);
  CHECK(more.history.epochs[40].epoch == 41);
  CHECK_THROWS_AS(train_supervised_l2(r.last, *s.fam, OracleDataset{}, s.cfg, {}, r.history), InputError);
}

TEST_CASE("stochastic sampling is reproducible from its seed") {
  Small s;
  s.cfg.sampling = Sampling::stochastic;
  s.cfg.batch_size = 16;
  s.cfg.epochs = 8;
  const TrainResult a = train(s.init, *s.fam, s.cfg), b = train(s.init, *s.fam, s.cfg);
  CHECK(a.model.mlp.theta == b.model.mlp.theta);
  s.cfg.seed = 2;
  const TrainResult c = train(s.init, *s.fam, s.cfg);
  CHECK(c.model.mlp.theta != a.model.mlp.theta);
}

TEST_CASE("supervised baseline fits oracle data and checks provenance") {
  Small s;
  const OracleDataset d =
      generate_oracle_dataset(*s.fam, s.init.basis.modes, DatasetSpec::make_grid(3), s.init.box);
  TrainConfig cfg = s.cfg;
  cfg.epochs = 30;
  TrainMonitor mon;
  mon.validation = &d;
  cfg.eval_every = 5;
  const TrainResult r = train_supervised_l2(s.init, *s.fam, d, cfg, mon);
  CHECK(r.history.mode == "l2_supervised");
  CHECK(r.history.epochs.back().loss < r.history.epochs.front().loss);
  CHECK(r.history.best_l2_epoch >= 0);
  CHECK(std::isfinite(r.history.epochs.back().val_l2));

  OracleDataset wrong = d;
  wrong.manifest.basis_hash = "0";
  CHECK_THROWS_AS(train_supervised_l2(s.init, *s.fam, wrong, cfg), InputError);
}

TEST_CASE("l2 loss gradient matches finite differences") {
  Small s;
  std::mt19937_64 rng(4);
  SubspaceModel m = s.init;
  m.mlp.theta = testing::random_vector(m.mlp.theta.size(), rng, 0.1);
  Eigen::MatrixXd in(2, 3), tgt(m.num_dofs(), 3);
  for (int c = 0; c < 3; ++c) {
    in.col(c) = testing::random_vector(2, rng, 0.3);
    tgt.col(c) = testing::random_vector(m.num_dofs(), rng, 0.01);
  }
  Eigen::VectorXd g;
  l2_loss(m, in, tgt, &g);
  auto f = [&](const Eigen::VectorXd& theta) {
    SubspaceModel q = m;
    q.mlp.theta = theta;
    return l2_loss(q, in, tgt, nullptr);
  };
  CHECK(testing::max_rel_error(g, testing::central_gradient(f, m.mlp.theta, 1e-6)) < 1e-6);
}

TEST_CASE("checkpoints round-trip exactly") {
  Small s;
  s.cfg.epochs = 5;
  const TrainResult r = train(s.init, *s.fam, s.cfg);
  Checkpoint c;
  c.kind = "self_supervised";
  c.model = r.model;
  c.mesh = s.fam->reference()->mesh();
  c.material = s.fam->reference()->material();
  c.train_config = s.cfg;
  c.history = r.history;
  const auto path = std::filesystem::temp_directory_path() / "nmodes_ckpt_test.json";
  save_checkpoint(c, path.string());
  const Checkpoint back = load_checkpoint(path.string());
  CHECK(back.model.mlp.theta == c.model.mlp.theta);
  CHECK(back.model.basis.modes == c.model.basis.modes);
  CHECK(back.model.fingerprint == c.model.fingerprint);
  CHECK(back.history.epochs.size() == 5);
  CHECK(std::isnan(back.history.epochs[0].val_l2));
  CHECK(back.train_config->grid_resolution == 4);
  CHECK_NOTHROW(back.model.check_compatible(*back.family()));
  const Eigen::Vector2d z(0.1, 0.2);
  CHECK(back.model.displacement(z) == c.model.displacement(z));
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/ckpt.json"), InputError);
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.epochs = -1;
  CHECK_THROWS_AS(c.validate(), InputError);
  CHECK(parse_sampling("stochastic") == Sampling::stochastic);
  CHECK_THROWS_AS(parse_early_stop("sometimes"), InputError);
}
