#include "neuralmodes/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace nmodes {

using jsonio::json;

ExperimentConfig ExperimentConfig::sheet_benchmark() {
  ExperimentConfig c;
  c.name = "sheet";
  c.mesh.type = "sheet";
  c.mesh.nx = c.mesh.ny = 10;
  c.material.young_modulus = 1e9;
  c.material.poisson_ratio = 0.3;
  c.material.density = 1000.0;
  c.material.thickness = 0.01;
  c.modes = 3;
  c.domain_half_width = 0.625;
  c.train.weights = {1e8, 1e7};
  c.train.hidden = {64, 64, 64, 64, 64};
  c.dynamics.options.h = 0.04;
  return c;
}

void ExperimentConfig::validate() const {
  material.validate();
  aux.validate();
  train.validate();
  dynamics.options.validate();
  if (modes < 1) throw InputError("config: modes must be >= 1");
  if (!(domain_half_width > 0.0)) throw InputError("config: domain_half_width must be positive");
  if (mesh.type != "sheet" && mesh.type != "box" && mesh.type != "obj" && mesh.type != "tetgen")
    throw InputError("config: unknown mesh type '" + mesh.type + "'");
  if (mesh.type == "obj" && mesh.path.empty()) throw InputError("config: obj mesh needs a path");
  if (mesh.type == "tetgen" && (mesh.node_path.empty() || mesh.ele_path.empty()))
    throw InputError("config: tetgen mesh needs node_path and ele_path");
  if (aux.dim() > 0 && mesh.type != "sheet") throw InputError("config: the aspect-ratio aux family needs a sheet mesh");
  if (aux.dim() > 0 && (!pins.vertices.empty() || !pins.select.empty()))
    throw InputError("config: pins are not supported together with an aux family");
  if (!pins.select.empty() && pins.select != "min" && pins.select != "max")
    throw InputError("config: pins.select must be min or max");
  if (pins.axis < 0 || pins.axis > 2) throw InputError("config: pins.axis must be 0, 1 or 2");
  if (datasets.random) {
    long sum = 0;
    for (int s : datasets.split) sum += s;
    if (datasets.split.size() != 3 || sum != datasets.random_count)
      throw InputError("config: random split must have three parts summing to random_count");
  }
  if (dynamics.steps < 0) throw InputError("config: dynamics.steps must be >= 0");
  if (dynamics.initial_z.size() != 0 && dynamics.initial_z.size() != modes)
    throw InputError("config: dynamics.initial_z must have one entry per mode");
}

std::string ExperimentConfig::to_json() const {
  json j;
  j["name"] = name;
  j["mesh"] = {{"type", mesh.type},
               {"nx", mesh.nx},
               {"ny", mesh.ny},
               {"aspect_ratio", mesh.aspect_ratio},
               {"side_length", mesh.side_length},
               {"cells", {mesh.cells_x, mesh.cells_y, mesh.cells_z}},
               {"size", {mesh.size.x(), mesh.size.y(), mesh.size.z()}},
               {"path", mesh.path},
               {"node_path", mesh.node_path},
               {"ele_path", mesh.ele_path}};
  j["material"] = jsonio::material(material);
  j["pins"] = {{"vertices", pins.vertices},
               {"select", pins.select},
               {"axis", pins.axis},
               {"tolerance", pins.tolerance},
               {"stiffness", pins.stiffness}};
  j["actuators"] = json::array();
  for (const auto& a : actuators)
    j["actuators"].push_back({{"vertex", a.vertex},
                              {"stiffness", a.stiffness},
                              {"amplitude", {a.amplitude.x(), a.amplitude.y(), a.amplitude.z()}},
                              {"frequency", a.frequency},
                              {"phase", a.phase}});
  j["aux"] = jsonio::aux(aux);
  j["modes"] = modes;
  j["domain_half_width"] = domain_half_width;
  j["train"] = jsonio::train(train);
  j["datasets"] = {{"random", datasets.random},
                   {"train_resolution", datasets.train_resolution},
                   {"validation_resolution", datasets.validation_resolution},
                   {"test_resolution", datasets.test_resolution},
                   {"random_count", datasets.random_count},
                   {"split", datasets.split}};
  j["oracle"] = {{"relative_tolerance", oracle.relative_tolerance},
                 {"max_iterations", oracle.max_iterations},
                 {"history", oracle.history}};
  j["dynamics"] = {{"h", dynamics.options.h},
                   {"steps", dynamics.steps},
                   {"rigid", dynamics.options.rigid},
                   {"relative_tolerance", dynamics.options.relative_tolerance},
                   {"max_iterations", dynamics.options.max_iterations},
                   {"initial_z", jsonio::vec(dynamics.initial_z)}};
  j["output_dir"] = output_dir;
  j["seed"] = seed;
  return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
  return jsonio::guarded("config", [&] {
    const json j = json::parse(text);
    ExperimentConfig c = sheet_benchmark();
    c.name = j.value("name", c.name);
    if (j.contains("mesh")) {
      const json& m = j.at("mesh");
      c.mesh.type = m.value("type", c.mesh.type);
      c.mesh.nx = m.value("nx", c.mesh.nx);
      c.mesh.ny = m.value("ny", c.mesh.ny);
      c.mesh.aspect_ratio = m.value("aspect_ratio", c.mesh.aspect_ratio);
      c.mesh.side_length = m.value("side_length", c.mesh.side_length);
      if (m.contains("cells")) {
        const auto cells = m.at("cells").get<std::vector<int>>();
        if (cells.size() != 3) throw InputError("config: mesh.cells needs three entries");
        c.mesh.cells_x = cells[0];
        c.mesh.cells_y = cells[1];
        c.mesh.cells_z = cells[2];
      }
      if (m.contains("size")) {
        const auto s = m.at("size").get<std::vector<double>>();
        if (s.size() != 3) throw InputError("config: mesh.size needs three entries");
        c.mesh.size = {s[0], s[1], s[2]};
      }
      c.mesh.path = m.value("path", c.mesh.path);
      c.mesh.node_path = m.value("node_path", c.mesh.node_path);
      c.mesh.ele_path = m.value("ele_path", c.mesh.ele_path);
    }
    if (j.contains("material")) c.material = jsonio::material(j.at("material"), c.material);
    if (j.contains("pins")) {
      const json& p = j.at("pins");
      if (p.contains("vertices")) c.pins.vertices = p.at("vertices").get<std::vector<int>>();
      c.pins.select = p.value("select", c.pins.select);
      c.pins.axis = p.value("axis", c.pins.axis);
      c.pins.tolerance = p.value("tolerance", c.pins.tolerance);
      c.pins.stiffness = p.value("stiffness", c.pins.stiffness);
    }
    if (j.contains("actuators")) {
      for (const auto& a : j.at("actuators")) {
        ActuatorSpec s;
        s.vertex = a.value("vertex", s.vertex);
        s.stiffness = a.value("stiffness", s.stiffness);
        if (a.contains("amplitude")) {
          const auto v = a.at("amplitude").get<std::vector<double>>();
          if (v.size() != 3) throw InputError("config: actuator amplitude needs three entries");
          s.amplitude = {v[0], v[1], v[2]};
        }
        s.frequency = a.value("frequency", s.frequency);
        s.phase = a.value("phase", s.phase);
        c.actuators.push_back(s);
      }
    }
    if (j.contains("aux")) c.aux = jsonio::aux(j.at("aux"));
    c.modes = j.value("modes", c.modes);
    c.domain_half_width = j.value("domain_half_width", c.domain_half_width);
    if (j.contains("train")) c.train = jsonio::train(j.at("train"), c.train);
    if (j.contains("datasets")) {
      const json& d = j.at("datasets");
      c.datasets.random = d.value("random", c.datasets.random);
      c.datasets.train_resolution = d.value("train_resolution", c.datasets.train_resolution);
      c.datasets.validation_resolution = d.value("validation_resolution", c.datasets.validation_resolution);
      c.datasets.test_resolution = d.value("test_resolution", c.datasets.test_resolution);
      c.datasets.random_count = d.value("random_count", c.datasets.random_count);
      if (d.contains("split")) c.datasets.split = d.at("split").get<std::vector<int>>();
    }
    if (j.contains("oracle")) {
      const json& o = j.at("oracle");
      c.oracle.relative_tolerance = o.value("relative_tolerance", c.oracle.relative_tolerance);
      c.oracle.max_iterations = o.value("max_iterations", c.oracle.max_iterations);
      c.oracle.history = o.value("history", c.oracle.history);
    }
    if (j.contains("dynamics")) {
      const json& d = j.at("dynamics");
      c.dynamics.options.h = d.value("h", c.dynamics.options.h);
      c.dynamics.steps = d.value("steps", c.dynamics.steps);
      c.dynamics.options.rigid = d.value("rigid", c.dynamics.options.rigid);
      c.dynamics.options.relative_tolerance = d.value("relative_tolerance", c.dynamics.options.relative_tolerance);
      c.dynamics.options.max_iterations = d.value("max_iterations", c.dynamics.options.max_iterations);
      if (d.contains("initial_z")) c.dynamics.initial_z = jsonio::vec(d.at("initial_z"));
    }
    c.output_dir = j.value("output_dir", c.output_dir);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
  });
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = from_json(ss.str());
  // Mesh file paths are relative to the config file.
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(c.mesh.path);
  resolve(c.mesh.node_path);
  resolve(c.mesh.ele_path);
  return c;
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write config " + path);
  out << to_json() << '\n';
}

Mesh ExperimentConfig::build_mesh() const {
  Mesh m;
  if (mesh.type == "sheet") {
    m = make_rect_sheet(mesh.nx, mesh.ny, aux.dim() ? aux.reference : mesh.aspect_ratio, mesh.side_length);
  } else if (mesh.type == "box") {
    m = make_box_tets(mesh.cells_x, mesh.cells_y, mesh.cells_z, mesh.size);
  } else if (mesh.type == "obj") {
    m = load_tri_mesh(mesh.path);
  } else {
    m = load_tet_mesh(mesh.node_path, mesh.ele_path);
  }
  return m;
}

std::vector<int> ExperimentConfig::pinned_vertices(const Mesh& m) const {
  std::vector<int> out = pins.vertices;
  for (int v : out)
    if (v < 0 || v >= m.num_vertices()) throw InputError("config: pinned vertex " + std::to_string(v) + " out of range");
  if (!pins.select.empty()) {
    double lo = m.rest_positions[pins.axis], hi = lo;
    for (int v = 0; v < m.num_vertices(); ++v) {
      lo = std::min(lo, m.vertex(v)[pins.axis]);
      hi = std::max(hi, m.vertex(v)[pins.axis]);
    }
    const double target = pins.select == "min" ? lo : hi;
    for (int v = 0; v < m.num_vertices(); ++v)
      if (std::abs(m.vertex(v)[pins.axis] - target) <= pins.tolerance * std::max(1.0, m.scale())) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EnergyFamilyPtr ExperimentConfig::build_family() const {
  if (aux.dim() > 0) {
    AuxSpec a = aux;
    a.nx = mesh.nx;
    a.ny = mesh.ny;
    a.side_length = mesh.side_length;
    return std::make_shared<EnergyFamily>(a, material);
  }
  Mesh m = build_mesh();
  auto pins_att = pin_at_rest(m, pinned_vertices(m), pins.stiffness);
  return std::make_shared<EnergyFamily>(std::make_shared<EnergyModel>(std::move(m), material, std::move(pins_att)));
}

EnergyModelPtr ExperimentConfig::build_dynamics_energy(const Mesh& m) const {
  auto att = pin_at_rest(m, pinned_vertices(m), pins.stiffness);
  for (const auto& a : actuators) {
    if (a.vertex < 0 || a.vertex >= m.num_vertices())
      throw InputError("config: actuator vertex " + std::to_string(a.vertex) + " out of range");
    Attachment at;
    at.vertex = a.vertex;
    at.stiffness = a.stiffness;
    at.anchor = m.vertex(a.vertex);
    at.amplitude = a.amplitude;
    at.frequency = a.frequency;
    at.phase = a.phase;
    att.push_back(at);
  }
  return std::make_shared<EnergyModel>(m, material, std::move(att));
}

}  // namespace nmodes
