// nmodes: command-line pipeline for nonlinear modal subspaces.
//
//   nmodes modes     --config sheet.json
//   nmodes oracle    --config sheet.json --checkpoint out/sheet.linear.json
//   nmodes train     --config sheet.json --checkpoint out/sheet.linear.json --mode self
//   nmodes eval      --checkpoint out/sheet.self_supervised.json --dataset out/dataset_test.json
//   nmodes simulate  --config sheet.json --checkpoint ...
//   nmodes keyframe  --checkpoint ... --keys keys.json
//   nmodes serve     --checkpoint ... --port 8080
//
// Exit codes: 0 success, 1 usage or input error, 2 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "neuralmodes/checkpoint.hpp"
#include "neuralmodes/config.hpp"
#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/errors.hpp"
#include "neuralmodes/evaluation.hpp"
#include "neuralmodes/hash.hpp"
#include "neuralmodes/modal.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/service.hpp"
#include "neuralmodes/training.hpp"

namespace fs = std::filesystem;
using namespace nmodes;
using json = nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string output_dir;
  int modes = 0;
  long long seed = -1;
  double young_modulus = 0.0;
};

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig::sheet_benchmark()
                                               : ExperimentConfig::load(c.config_path);
  if (c.modes > 0) cfg.modes = c.modes;
  if (c.seed >= 0) {
    cfg.seed = static_cast<uint64_t>(c.seed);
    cfg.train.seed = cfg.seed;
    cfg.train.init_seed = cfg.seed;
  }
  if (c.young_modulus > 0.0) cfg.material.young_modulus = c.young_modulus;
  if (const char* env = std::getenv("NMODES_OUTPUT_DIR"); env && *env) cfg.output_dir = env;
  if (!c.output_dir.empty()) cfg.output_dir = c.output_dir;
  cfg.validate();
  return cfg;
}

fs::path output_dir(const ExperimentConfig& cfg) {
  fs::path p(cfg.output_dir);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Checkpoint linear_checkpoint(const ExperimentConfig& cfg, const EnergyFamily& family) {
  const EnergyModel& ref = *family.reference();
  if (cfg.modes >= family.num_dofs()) throw InputError("requested more modes than the mesh has degrees of freedom");
  LinearModeBasis basis = linear_modes(ref.hessian(ref.rest_positions()), cfg.modes);
  Checkpoint c;
  c.kind = "linear";
  c.model = SubspaceModel::create(family, std::move(basis), cfg.domain(), cfg.train.hidden, cfg.train.init_seed);
  c.mesh = ref.mesh();
  c.material = ref.material();
  if (family.aux_dim() == 0) c.pins = ref.attachments();
  return c;
}

Checkpoint checkpoint_or_modes(const std::string& path, const ExperimentConfig& cfg, const EnergyFamily& family) {
  if (path.empty()) return linear_checkpoint(cfg, family);
  Checkpoint c = load_checkpoint(path);
  c.model.check_compatible(family);
  return c;
}

void print_history_tail(const TrainingHistory& h) {
  if (h.epochs.empty()) return;
  const auto& r = h.epochs.back();
  std::cout << "epoch " << r.epoch << " loss " << r.loss << " mean energy " << r.mean_energy << " stop "
            << h.stop_reason << '\n';
}

// ---------------------------------------------------------------------------

int cmd_modes(const Common& common, const std::string& out_path) {
  const ExperimentConfig cfg = load_config(common);
  const EnergyFamilyPtr family = cfg.build_family();
  const Checkpoint c = linear_checkpoint(cfg, *family);
  const fs::path dir = output_dir(cfg);
  const fs::path path = out_path.empty() ? dir / (cfg.name + ".linear.json") : fs::path(out_path);
  save_checkpoint(c, path.string());
  std::ostringstream csv;
  csv << "mode,eigenvalue\n" << std::setprecision(17);
  std::cout << std::setprecision(10);
  for (int i = 0; i < c.model.basis.size(); ++i) {
    csv << i << ',' << c.model.basis.eigenvalues[i] << '\n';
    std::cout << "mode " << i << " eigenvalue " << c.model.basis.eigenvalues[i] << '\n';
  }
  write_text(dir / (cfg.name + ".eigenvalues.csv"), csv.str());
  std::cout << "filtered rigid modes " << c.model.basis.num_filtered_rigid << '\n'
            << "basis hash " << basis_hash(c.model.basis.modes) << '\n'
            << "wrote " << path.string() << '\n';
  return 0;
}

int cmd_oracle(const Common& common, const std::string& ckpt_path, const std::string& spec, bool csv) {
  ExperimentConfig cfg = load_config(common);
  if (spec.empty()) throw InputError("empty dataset spec; use --spec grid or --spec random");
  if (spec == "random") cfg.datasets.random = true;
  else if (spec == "grid") cfg.datasets.random = false;
  else throw InputError("unknown dataset spec '" + spec + "'");
  cfg.validate();

  const EnergyFamilyPtr family = cfg.build_family();
  const Checkpoint c = checkpoint_or_modes(ckpt_path, cfg, *family);
  const DomainBox box =
      family->aux_dim() ? DomainBox::join(c.model.box, c.model.aux.box()) : c.model.box;
  const fs::path dir = output_dir(cfg);
  const char* names[3] = {"train", "validation", "test"};
  std::vector<OracleDataset> parts;
  if (cfg.datasets.random) {
    const OracleDataset all = generate_oracle_dataset(*family, c.model.basis.modes,
                                                      DatasetSpec::make_random(cfg.datasets.random_count, cfg.seed),
                                                      box, cfg.oracle);
    parts = split_dataset(all, cfg.datasets.split);
  } else {
    const int res[3] = {cfg.datasets.train_resolution, cfg.datasets.validation_resolution,
                        cfg.datasets.test_resolution};
    for (int r : res)
      parts.push_back(generate_oracle_dataset(*family, c.model.basis.modes, DatasetSpec::make_grid(r), box, cfg.oracle));
  }
  json manifest = {{"config", json::parse(cfg.to_json())}, {"datasets", json::array()}};
  for (int i = 0; i < 3; ++i) {
    const fs::path p = dir / ("dataset_" + std::string(names[i]) + ".json");
    save_dataset(parts[i], p.string());
    if (csv) export_dataset_csv(parts[i], (dir / ("dataset_" + std::string(names[i]) + ".csv")).string());
    manifest["datasets"].push_back({{"split", names[i]},
                                    {"path", p.filename().string()},
                                    {"spec", parts[i].manifest.spec.describe()},
                                    {"samples", parts[i].size()},
                                    {"unconverged", parts[i].num_unconverged()},
                                    {"hash", parts[i].hash()},
                                    {"wall_seconds", parts[i].manifest.wall_seconds}});
    std::cout << names[i] << ": " << parts[i].size() << " samples, " << parts[i].num_unconverged()
              << " unconverged, " << parts[i].manifest.wall_seconds << " s -> " << p.string() << '\n';
  }
  write_text(dir / "datasets.manifest.json", manifest.dump(2));
  return 0;
}

struct TrainArgs {
  std::string checkpoint;
  std::string mode = "self";
  std::string sampling;
  std::string train_data, validation, test;
  std::string early_stop;
  int epochs = 0;
  bool resume = false;
  bool quiet = false;
  std::string out;
};

int cmd_train(const Common& common, const TrainArgs& a) {
  ExperimentConfig cfg = load_config(common);
  if (a.mode != "self" && a.mode != "l2") throw InputError("--mode must be self or l2");
  if (!a.sampling.empty()) cfg.train.sampling = parse_sampling(a.sampling);
  if (!a.early_stop.empty()) cfg.train.early_stop = parse_early_stop(a.early_stop);
  if (a.epochs > 0) cfg.train.epochs = a.epochs;
  cfg.validate();
  if (a.mode == "l2" && a.train_data.empty()) throw InputError("l2-supervised training needs --train-data");
  if (a.resume && a.checkpoint.empty()) throw InputError("--resume needs --checkpoint");

  const EnergyFamilyPtr family = cfg.build_family();
  Checkpoint c = checkpoint_or_modes(a.checkpoint, cfg, *family);
  const std::string kind = a.mode == "self" ? "self_supervised" : "l2_supervised";
  TrainingHistory resume;
  if (a.resume) {
    if (c.kind != kind) throw InputError("cannot resume a " + c.kind + " checkpoint as " + kind);
    resume = c.history;
  } else if (c.kind != "linear") {
    throw InputError("training starts from a linear checkpoint; pass --resume to continue " + c.kind);
  }

  std::optional<OracleDataset> val, test;
  if (!a.validation.empty()) val = load_dataset(a.validation);
  if (!a.test.empty()) test = load_dataset(a.test);
  TrainMonitor mon;
  mon.validation = val ? &*val : nullptr;
  mon.test = test ? &*test : nullptr;
  mon.verbose = !a.quiet;

  TrainResult r;
  if (a.mode == "self") {
    r = train(c.model, *family, cfg.train, mon, resume);
  } else {
    const OracleDataset data = load_dataset(a.train_data);
    r = train_supervised_l2(c.model, *family, data, cfg.train, mon, resume);
  }
  Checkpoint out = c;
  out.kind = kind;
  out.model = r.model;
  out.train_config = cfg.train;
  out.history = r.history;
  const fs::path dir = output_dir(cfg);
  const fs::path path = a.out.empty() ? dir / (cfg.name + "." + kind + ".json") : fs::path(a.out);
  save_checkpoint(out, path.string());
  write_text(dir / (cfg.name + "." + kind + ".history.csv"), r.history.to_csv());
  print_history_tail(r.history);
  std::cout << "wrote " << path.string() << '\n';
  if (val) {
    // best-on-validation checkpoints, one per metric
    for (const auto& [tag, model] : {std::pair{"best_l2", &r.best_l2}, std::pair{"best_energy", &r.best_energy}}) {
      Checkpoint b = out;
      b.model = *model;
      const fs::path bp = path.parent_path() / (path.stem().string() + "." + tag + ".json");
      save_checkpoint(b, bp.string());
      std::cout << "wrote " << bp.string() << '\n';
    }
  }
  if (r.diverged) {
    std::cerr << "training diverged; saved the last finite parameters\n";
    return 2;
  }
  return 0;
}

int cmd_eval(const Common& common, const std::string& ckpt_path, const std::vector<std::string>& datasets,
             bool subintervals, bool oracle_sanity, bool structure, const std::string& prefix) {
  const Checkpoint c = load_checkpoint(ckpt_path);
  const EnergyFamilyPtr family = c.family();
  MetricsReport report;
  report.checkpoint_hash = hash_file(ckpt_path);
  const Predictor pred = oracle_sanity ? oracle_predictor() : model_predictor(c.model, *family);
  for (const auto& p : datasets) {
    const OracleDataset d = load_dataset(p);
    if (d.manifest.family_fingerprint != c.model.fingerprint)
      throw InputError("dataset " + p + " was generated for a different energy model");
    if (d.manifest.basis_hash != basis_hash(c.model.basis.modes))
      throw InputError("dataset " + p + " was generated with a different modal basis");
    report.dataset_hashes.push_back(d.hash());
    report.splits.push_back(evaluate_split(pred, *family, c.model.basis.modes, d, fs::path(p).stem().string()));
    if (subintervals) {
      auto parts = evaluate_subintervals(pred, *family, c.model.basis.modes, d);
      report.subintervals.insert(report.subintervals.end(), parts.begin(), parts.end());
    }
  }
  if (structure && !oracle_sanity) {
    report.correlation = correlation_diagnostic(c.model, c.model.aux_dim() ? Eigen::VectorXd::Constant(1, c.model.aux.reference)
                                                                           : Eigen::VectorXd());
    report.structure = structure_checks(c.model, *family, 0);
  }
  std::string dir_s = common.output_dir;
  if (dir_s.empty())
    if (const char* env = std::getenv("NMODES_OUTPUT_DIR"); env && *env) dir_s = env;
  if (dir_s.empty()) dir_s = fs::path(ckpt_path).parent_path().string();
  if (dir_s.empty()) dir_s = ".";
  fs::create_directories(dir_s);
  const std::string stem = prefix.empty() ? fs::path(ckpt_path).stem().string() + ".metrics" : prefix;
  write_text(fs::path(dir_s) / (stem + ".json"), report.to_json());
  write_text(fs::path(dir_s) / (stem + ".csv"), report.to_csv());
  std::cout << report.summary();
  return 0;
}

struct SimArgs {
  std::string checkpoint;
  int steps = -1;
  double h = 0.0;
  bool linear_baseline = false;
  bool rigid = false;
  std::vector<double> z0;
  std::vector<double> aux;
};

int cmd_simulate(const Common& common, const SimArgs& a) {
  ExperimentConfig cfg = load_config(common);
  if (a.steps >= 0) cfg.dynamics.steps = a.steps;
  if (a.h > 0.0) cfg.dynamics.options.h = a.h;
  if (a.linear_baseline) cfg.dynamics.options.linear_baseline = true;
  if (a.rigid) cfg.dynamics.options.rigid = true;
  cfg.validate();
  const Checkpoint c = load_checkpoint(a.checkpoint);
  Eigen::VectorXd aux = Eigen::Map<const Eigen::VectorXd>(a.aux.data(), a.aux.size());
  if (c.model.aux_dim() > 0 && aux.size() == 0) aux = Eigen::VectorXd::Constant(1, c.model.aux.reference);
  const Mesh mesh = c.model.aux_dim() ? c.family()->at(aux)->mesh() : c.mesh;
  const EnergyModelPtr energy = cfg.build_dynamics_energy(mesh);
  const SubspaceDynamics dyn(c.model, energy, cfg.dynamics.options, aux);

  Eigen::VectorXd z0 = cfg.dynamics.initial_z.size() ? cfg.dynamics.initial_z : Eigen::VectorXd::Zero(c.model.m());
  if (!a.z0.empty()) z0 = Eigen::Map<const Eigen::VectorXd>(a.z0.data(), a.z0.size());
  if (z0.size() != c.model.m()) throw InputError("--z0 must have one entry per mode");
  const Trajectory traj = simulate(dyn, dyn.initial_state(z0), cfg.dynamics.steps);

  const fs::path dir = output_dir(cfg);
  const std::string stem = cfg.name + (cfg.dynamics.options.linear_baseline ? ".linear_dynamics" : ".dynamics");
  write_text(dir / (stem + ".csv"), traj.to_csv());
  traj.write_frames((dir / (stem + ".frames")).string());
  int failed = 0;
  for (const auto& f : traj.frames) failed += f.error.empty() ? 0 : 1;
  std::cout << traj.frames.size() << " frames, mean step " << traj.mean_step_ms() << " ms, max step "
            << traj.max_step_ms() << " ms";
  if (failed) std::cout << ", " << failed << " failed steps";
  std::cout << "\nwrote " << (dir / (stem + ".frames")).string() << '\n';
  return failed ? 2 : 0;
}

int cmd_keyframe(const Common& common, const std::string& ckpt_path, const std::string& keys_path, double fps,
                 std::vector<double> aux_v) {
  const Checkpoint c = load_checkpoint(ckpt_path);
  const json j = json::parse(read_text(keys_path), nullptr, false);
  if (j.is_discarded()) throw InputError(keys_path + " is not valid JSON");
  const json& arr = j.is_object() ? j.at("keys") : j;
  std::vector<Keyframe> keys;
  for (const auto& k : arr) {
    Keyframe key;
    key.t = k.at("t").get<double>();
    const auto z = k.at("z").get<std::vector<double>>();
    key.z = Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
    if (key.z.size() != c.model.m()) throw InputError("keyframe z must have one entry per mode");
    keys.push_back(key);
  }
  validate_keyframes(keys);
  if (!(fps > 0.0)) throw InputError("--fps must be positive");
  Eigen::VectorXd aux = Eigen::Map<const Eigen::VectorXd>(aux_v.data(), aux_v.size());
  if (c.model.aux_dim() > 0 && aux.size() == 0) aux = Eigen::VectorXd::Constant(1, c.model.aux.reference);
  const EnergyModelPtr em = c.family()->at(aux);

  Trajectory traj;
  const double t0 = keys.front().t, t1 = keys.back().t;
  const long n = static_cast<long>(std::floor((t1 - t0) * fps + 1e-9)) + 1;
  std::vector<double> times;
  for (long i = 0; i < n; ++i) times.push_back(t0 + i / fps);
  if (times.back() < t1) times.push_back(t1);
  for (double t : times) {
    TrajectoryFrame f;
    f.t = t;
    f.z = interpolate_keyframes(keys, t);
    const Eigen::VectorXd x = c.model.decode(*em, f.z, aux);
    f.elastic_energy = f.total_energy = em->energy(x);
    traj.frames.push_back(f);
    traj.positions.push_back(x);
  }
  std::string dir_s = common.output_dir;
  if (dir_s.empty())
    if (const char* env = std::getenv("NMODES_OUTPUT_DIR"); env && *env) dir_s = env;
  if (dir_s.empty()) dir_s = ".";
  fs::create_directories(dir_s);
  const fs::path stem = fs::path(dir_s) / (fs::path(keys_path).stem().string() + ".keyframes");
  traj.write_frames(stem.string() + ".frames");
  write_text(stem.string() + ".csv", traj.to_csv());
  std::cout << traj.frames.size() << " frames -> " << stem.string() << ".frames\n";
  return 0;
}

int cmd_serve(const std::string& ckpt_path, const std::string& host, int port) {
  const EvalService service(load_checkpoint(ckpt_path));
  std::cout << "serving " << ckpt_path << " on http://" << host << ':' << port << std::endl;
  service.listen(host, port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear modal subspaces: modes, oracle data, training, evaluation and dynamics"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "Experiment config (JSON); defaults to the sheet benchmark");
    sub->add_option("--output-dir", common.output_dir, "Output directory (overrides $NMODES_OUTPUT_DIR and the config)");
    sub->add_option("--modes", common.modes, "Number of modes m");
    sub->add_option("--seed", common.seed, "Seed for sampling and initialization");
    sub->add_option("--young-modulus", common.young_modulus, "Young's modulus in Pa");
  };

  auto* modes = app.add_subcommand("modes", "Compute linear modes and write a linear checkpoint");
  add_common(modes);
  std::string modes_out;
  modes->add_option("--out", modes_out, "Checkpoint path");

  auto* oracle = app.add_subcommand("oracle", "Generate train/validation/test oracle datasets");
  add_common(oracle);
  std::string oracle_ckpt, oracle_spec = "grid";
  bool oracle_csv = false;
  oracle->add_option("--checkpoint", oracle_ckpt, "Linear checkpoint providing the basis");
  oracle->add_option("--spec", oracle_spec, "grid (three resolutions) or random (one split set)");
  oracle->add_flag("--csv", oracle_csv, "Also export CSV tables");

  auto* trn = app.add_subcommand("train", "Train a subspace network");
  add_common(trn);
  TrainArgs ta;
  trn->add_option("--checkpoint", ta.checkpoint, "Linear checkpoint, or a trained one with --resume");
  trn->add_option("--mode", ta.mode, "self or l2")->check(CLI::IsMember({"self", "l2"}));
  trn->add_option("--sampling", ta.sampling, "grid or stochastic")->check(CLI::IsMember({"grid", "stochastic"}));
  trn->add_option("--train-data", ta.train_data, "Oracle dataset (l2 mode)");
  trn->add_option("--validation", ta.validation, "Validation dataset for monitoring and early stopping");
  trn->add_option("--test", ta.test, "Test dataset for monitoring");
  trn->add_option("--early-stop", ta.early_stop, "none, l2 or energy")->check(CLI::IsMember({"none", "l2", "energy"}));
  trn->add_option("--epochs", ta.epochs, "Epochs (optimizer iterations)");
  trn->add_flag("--resume", ta.resume, "Continue training and history of --checkpoint");
  trn->add_flag("--quiet", ta.quiet, "No per-evaluation progress");
  trn->add_option("--out", ta.out, "Checkpoint path");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint against oracle datasets");
  add_common(ev);
  std::string ev_ckpt, ev_prefix;
  std::vector<std::string> ev_data;
  bool ev_sub = false, ev_oracle = false, ev_structure = false;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint")->required();
  ev->add_option("--dataset", ev_data, "Oracle dataset(s)")->required();
  ev->add_flag("--subintervals", ev_sub, "Also report five contiguous parts of each dataset");
  ev->add_flag("--oracle", ev_oracle, "Evaluate the oracle against itself");
  ev->add_flag("--structure", ev_structure, "Add latent structure and correlation checks");
  ev->add_option("--name", ev_prefix, "Report file stem");

  auto* sim = app.add_subcommand("simulate", "Run subspace dynamics");
  add_common(sim);
  SimArgs sa;
  sim->add_option("--checkpoint", sa.checkpoint, "Checkpoint")->required();
  sim->add_option("--steps", sa.steps, "Number of steps");
  sim->add_option("--dt", sa.h, "Time step in seconds");
  sim->add_option("--z0", sa.z0, "Initial modal coordinates");
  sim->add_option("--aux", sa.aux, "Auxiliary parameter values");
  sim->add_flag("--linear-baseline", sa.linear_baseline, "Use y = 0 (linear modal dynamics)");
  sim->add_flag("--rigid", sa.rigid, "Add rigid rotation and translation");

  auto* kf = app.add_subcommand("keyframe", "Decode linearly interpolated keyframes");
  add_common(kf);
  std::string kf_ckpt, kf_keys;
  double kf_fps = 30.0;
  std::vector<double> kf_aux;
  kf->add_option("--checkpoint", kf_ckpt, "Checkpoint")->required();
  kf->add_option("--keys", kf_keys, "JSON list of {t, z}")->required();
  kf->add_option("--fps", kf_fps, "Output frame rate");
  kf->add_option("--aux", kf_aux, "Auxiliary parameter values");

  auto* srv = app.add_subcommand("serve", "Serve /model/info, /eval and /keyframes over HTTP");
  std::string srv_ckpt, srv_host = "127.0.0.1";
  int srv_port = 8080;
  srv->add_option("--checkpoint", srv_ckpt, "Checkpoint")->required();
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--port", srv_port, "Port")->check(CLI::Range(1, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*modes) return cmd_modes(common, modes_out);
    if (*oracle) return cmd_oracle(common, oracle_ckpt, oracle_spec, oracle_csv);
    if (*trn) return cmd_train(common, ta);
    if (*ev) return cmd_eval(common, ev_ckpt, ev_data, ev_sub, ev_oracle, ev_structure, ev_prefix);
    if (*sim) return cmd_simulate(common, sa);
    if (*kf) return cmd_keyframe(common, kf_ckpt, kf_keys, kf_fps, kf_aux);
    if (*srv) return cmd_serve(srv_ckpt, srv_host, srv_port);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
