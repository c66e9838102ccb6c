#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/mesh.hpp"

namespace nmodes {

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

// Strips '#' comments and surrounding whitespace.
std::string clean_line(const std::string& line) {
  const auto hash = line.find('#');
  std::string s = line.substr(0, hash);
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_obj_index(const std::string& token, int num_vertices, const std::string& where) {
  const std::string head = token.substr(0, token.find('/'));
  int idx = 0;
  try {
    size_t used = 0;
    idx = std::stoi(head, &used);
    if (used != head.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InputError(where + ": bad face index '" + token + "'");
  }
  if (idx < 0) idx = num_vertices + idx + 1;  // relative indices
  if (idx < 1 || idx > num_vertices) throw InputError(where + ": face index " + head + " out of range");
  return idx - 1;
}

std::vector<std::string> read_tetgen_rows(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) {
    auto s = clean_line(line);
    if (!s.empty()) rows.push_back(std::move(s));
  }
  if (rows.empty()) throw InputError(path + ": empty file");
  return rows;
}

}  // namespace

Mesh load_tri_mesh(const std::string& path) {
  auto in = open_input(path);
  std::vector<double> coords;
  std::vector<std::array<int, 3>> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = clean_line(line);
    if (s.empty()) continue;
    std::istringstream ls(s);
    std::string tag;
    ls >> tag;
    const std::string where = path + ":" + std::to_string(line_no);
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw InputError(where + ": malformed vertex");
      coords.insert(coords.end(), {x, y, z});
    } else if (tag == "f") {
      std::vector<std::string> tokens;
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (tokens.size() != 3)
        throw InputError(where + ": non-triangle face with " + std::to_string(tokens.size()) + " vertices");
      const int nv = static_cast<int>(coords.size() / 3);
      faces.push_back({parse_obj_index(tokens[0], nv, where), parse_obj_index(tokens[1], nv, where),
                       parse_obj_index(tokens[2], nv, where)});
    }
    // Other records (vt, vn, o, g, s, usemtl, ...) carry no geometry we use.
  }
  if (faces.empty()) throw InputError(path + ": no faces");
  Mesh mesh;
  mesh.kind = MeshKind::shell;
  mesh.rest_positions = Eigen::Map<const Eigen::VectorXd>(coords.data(), static_cast<Eigen::Index>(coords.size()));
  mesh.elements.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (size_t f = 0; f < faces.size(); ++f)
    for (int k = 0; k < 3; ++k) mesh.elements(static_cast<Eigen::Index>(f), k) = faces[f][k];
  mesh.validate();
  return mesh;
}

Mesh load_tet_mesh(const std::string& node_path, const std::string& ele_path) {
  const auto node_rows = read_tetgen_rows(node_path);
  std::istringstream header(node_rows[0]);
  int num_nodes = 0, dim = 0, num_attr = 0, has_marker = 0;
  if (!(header >> num_nodes >> dim)) throw InputError(node_path + ": malformed header");
  header >> num_attr >> has_marker;
  if (dim != 3) throw InputError(node_path + ": only 3D node files are supported");
  if (static_cast<int>(node_rows.size()) < num_nodes + 1) throw InputError(node_path + ": truncated node list");

  Mesh mesh;
  mesh.kind = MeshKind::solid;
  mesh.rest_positions.resize(3 * num_nodes);
  int base = 0;
  for (int i = 0; i < num_nodes; ++i) {
    std::istringstream row(node_rows[i + 1]);
    int idx;
    double x, y, z;
    if (!(row >> idx >> x >> y >> z)) throw InputError(node_path + ": malformed node row " + std::to_string(i));
    if (i == 0) base = idx;
    if (idx - base != i) throw InputError(node_path + ": node indices must be consecutive");
    mesh.rest_positions.segment<3>(3 * i) << x, y, z;
  }

  const auto ele_rows = read_tetgen_rows(ele_path);
  std::istringstream eh(ele_rows[0]);
  int num_tets = 0, per_tet = 0;
  if (!(eh >> num_tets >> per_tet)) throw InputError(ele_path + ": malformed header");
  if (per_tet != 4) throw InputError(ele_path + ": only linear (4-node) tets are supported");
  if (static_cast<int>(ele_rows.size()) < num_tets + 1) throw InputError(ele_path + ": truncated element list");
  mesh.elements.resize(num_tets, 4);
  for (int t = 0; t < num_tets; ++t) {
    std::istringstream row(ele_rows[t + 1]);
    int idx;
    std::array<int, 4> v{};
    if (!(row >> idx >> v[0] >> v[1] >> v[2] >> v[3]))
      throw InputError(ele_path + ": malformed element row " + std::to_string(t));
    for (int k = 0; k < 4; ++k) {
      v[k] -= base;
      if (v[k] < 0 || v[k] >= num_nodes)
        throw InputError(ele_path + ": element " + std::to_string(t) + " index out of range");
    }
    const Eigen::Vector3d a = mesh.vertex(v[0]);
    const double vol =
        (mesh.vertex(v[1]) - a).dot((mesh.vertex(v[2]) - a).cross(mesh.vertex(v[3]) - a)) / 6.0;
    if (vol == 0.0 || !std::isfinite(vol)) throw InputError(ele_path + ": tet " + std::to_string(t) + " has zero volume");
    if (vol < 0.0) std::swap(v[2], v[3]);
    for (int k = 0; k < 4; ++k) mesh.elements(t, k) = v[k];
  }
  mesh.validate();
  return mesh;
}

void write_obj(const Mesh& mesh, const std::string& path) {
  if (mesh.kind != MeshKind::shell) throw InputError("write_obj: only triangle meshes can be written as OBJ");
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << std::setprecision(17);
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const auto p = mesh.vertex(v);
    out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  for (int f = 0; f < mesh.num_elements(); ++f)
    out << "f " << mesh.elements(f, 0) + 1 << ' ' << mesh.elements(f, 1) + 1 << ' ' << mesh.elements(f, 2) + 1 << '\n';
}

void write_tetgen(const Mesh& mesh, const std::string& node_path, const std::string& ele_path) {
  if (mesh.kind != MeshKind::solid) throw InputError("write_tetgen: only tet meshes can be written as .node/.ele");
  std::ofstream node(node_path);
  if (!node) throw InputError("cannot write '" + node_path + "'");
  node << std::setprecision(17) << mesh.num_vertices() << " 3 0 0\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const auto p = mesh.vertex(v);
    node << v << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  std::ofstream ele(ele_path);
  if (!ele) throw InputError("cannot write '" + ele_path + "'");
  ele << mesh.num_elements() << " 4 0\n";
  for (int t = 0; t < mesh.num_elements(); ++t)
    ele << t << ' ' << mesh.elements(t, 0) << ' ' << mesh.elements(t, 1) << ' ' << mesh.elements(t, 2) << ' '
        << mesh.elements(t, 3) << '\n';
}

}  // namespace nmodes
