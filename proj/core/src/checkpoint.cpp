#include "neuralmodes/checkpoint.hpp"

#include <fstream>

#include "json_io.hpp"

namespace nmodes {

using jsonio::json;

EnergyFamilyPtr Checkpoint::family() const {
  if (model.aux.dim() > 0) return std::make_shared<EnergyFamily>(model.aux, material);
  return std::make_shared<EnergyFamily>(std::make_shared<EnergyModel>(mesh, material, pins));
}

namespace {

json history_json(const TrainingHistory& h) {
  json rows = json::array();
  for (const auto& r : h.epochs) {
    rows.push_back({r.epoch, jsonio::real(r.loss), jsonio::real(r.mean_energy), jsonio::real(r.mean_constraint),
                    jsonio::real(r.origin_norm), r.evaluations, r.seconds, jsonio::real(r.val_l2),
                    jsonio::real(r.val_energy), jsonio::real(r.test_l2), jsonio::real(r.test_energy)});
  }
  return {{"mode", h.mode},
          {"best_l2_epoch", h.best_l2_epoch},
          {"best_energy_epoch", h.best_energy_epoch},
          {"stop_reason", h.stop_reason},
          {"columns",
           {"epoch", "loss", "mean_energy", "mean_constraint", "origin_norm", "evaluations", "seconds", "val_l2",
            "val_energy", "test_l2", "test_energy"}},
          {"rows", rows}};
}

TrainingHistory history_from(const json& j) {
  TrainingHistory h;
  h.mode = j.value("mode", "");
  h.best_l2_epoch = j.value("best_l2_epoch", -1);
  h.best_energy_epoch = j.value("best_energy_epoch", -1);
  h.stop_reason = j.value("stop_reason", "");
  for (const auto& row : j.at("rows")) {
    if (row.size() != 11) throw InputError("history row has " + std::to_string(row.size()) + " columns");
    EpochRecord r;
    r.epoch = row[0];
    r.loss = jsonio::real(row[1]);
    r.mean_energy = jsonio::real(row[2]);
    r.mean_constraint = jsonio::real(row[3]);
    r.origin_norm = jsonio::real(row[4]);
    r.evaluations = row[5];
    r.seconds = row[6];
    r.val_l2 = jsonio::real(row[7]);
    r.val_energy = jsonio::real(row[8]);
    r.test_l2 = jsonio::real(row[9]);
    r.test_energy = jsonio::real(row[10]);
    h.epochs.push_back(r);
  }
  return h;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  ckpt.model.validate();
  const auto& mdl = ckpt.model;
  json layers = json::array();
  for (int k = 0; k < mdl.mlp.num_layers(); ++k)
    layers.push_back({{"in", mdl.mlp.widths[k]},
                      {"out", mdl.mlp.widths[k + 1]},
                      {"weight_offset", mdl.mlp.weight_offset(k)},
                      {"bias_offset", mdl.mlp.bias_offset(k)},
                      {"activation", k + 1 < mdl.mlp.num_layers() ? "gelu_tanh" : "identity"}});
  json j;
  j["format"] = "neuralmodes.checkpoint";
  j["version"] = Checkpoint::kVersion;
  j["kind"] = ckpt.kind;
  j["network"] = {{"widths", mdl.mlp.widths}, {"layers", layers}, {"theta", jsonio::vec(mdl.mlp.theta)}};
  j["basis"] = {{"modes", jsonio::mat(mdl.basis.modes)},
                {"eigenvalues", jsonio::vec(mdl.basis.eigenvalues)},
                {"num_filtered_rigid", mdl.basis.num_filtered_rigid},
                {"lambda_max", mdl.basis.lambda_max}};
  j["domain"] = jsonio::box(mdl.box);
  j["aux"] = jsonio::aux(mdl.aux);
  j["fingerprint"] = mdl.fingerprint;
  j["mesh_fingerprint"] = mdl.mesh_fingerprint;
  j["mesh"] = {{"kind", ckpt.mesh.kind == MeshKind::shell ? "shell" : "solid"},
               {"rest_positions", jsonio::vec(ckpt.mesh.rest_positions)},
               {"elements", jsonio::imat(ckpt.mesh.elements)}};
  j["material"] = jsonio::material(ckpt.material);
  j["pins"] = json::array();
  for (const auto& a : ckpt.pins)
    j["pins"].push_back({{"vertex", a.vertex}, {"stiffness", a.stiffness}, {"anchor", {a.anchor.x(), a.anchor.y(), a.anchor.z()}}});
  if (ckpt.train_config) j["train_config"] = jsonio::train(*ckpt.train_config);
  j["history"] = history_json(ckpt.history);

  std::ofstream out(path);
  if (!out) throw InputError("cannot write checkpoint " + path);
  out << j.dump();
  if (!out) throw InputError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open checkpoint " + path);
  return jsonio::guarded("checkpoint " + path, [&] {
    const json j = json::parse(in);
    if (j.value("format", "") != "neuralmodes.checkpoint") throw InputError(path + " is not a checkpoint");
    if (j.value("version", 0) != Checkpoint::kVersion)
      throw InputError(path + ": unsupported checkpoint version " + std::to_string(j.value("version", 0)));
    Checkpoint c;
    c.kind = j.at("kind");
    auto& mdl = c.model;
    mdl.mlp.widths = j.at("network").at("widths").get<std::vector<int>>();
    mdl.mlp.theta = jsonio::vec(j.at("network").at("theta"));
    const json& b = j.at("basis");
    mdl.basis.modes = jsonio::mat(b.at("modes"));
    mdl.basis.eigenvalues = jsonio::vec(b.at("eigenvalues"));
    mdl.basis.num_filtered_rigid = b.at("num_filtered_rigid");
    mdl.basis.lambda_max = b.at("lambda_max");
    mdl.box = jsonio::box(j.at("domain"));
    mdl.aux = jsonio::aux(j.at("aux"));
    mdl.fingerprint = j.at("fingerprint");
    mdl.mesh_fingerprint = j.at("mesh_fingerprint");
    const json& m = j.at("mesh");
    c.mesh.kind = m.at("kind") == "solid" ? MeshKind::solid : MeshKind::shell;
    c.mesh.rest_positions = jsonio::vec(m.at("rest_positions"));
    c.mesh.elements = jsonio::imat(m.at("elements"));
    c.material = jsonio::material(j.at("material"));
    for (const auto& p : j.value("pins", json::array())) {
      Attachment a;
      a.vertex = p.at("vertex");
      a.stiffness = p.at("stiffness");
      const auto v = p.at("anchor").get<std::vector<double>>();
      if (v.size() != 3) throw InputError("pin anchor needs three entries");
      a.anchor = {v[0], v[1], v[2]};
      c.pins.push_back(a);
    }
    if (j.contains("train_config")) c.train_config = jsonio::train(j.at("train_config"));
    if (j.contains("history")) c.history = history_from(j.at("history"));
    mdl.validate();
    c.mesh.validate();
    return c;
  });
}

}  // namespace nmodes
