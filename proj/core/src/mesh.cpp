#include "neuralmodes/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/Dense>

#include "neuralmodes/errors.hpp"

namespace nmodes {

namespace {

double signed_tet_volume(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c,
                         const Eigen::Vector3d& d) {
  return (b - a).dot((c - a).cross(d - a)) / 6.0;
}

using EdgeKey = std::pair<int, int>;

EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

// Signed dihedral angle between the two triangles of a hinge; zero when flat.
double hinge_angle(const Eigen::Vector3d& x0, const Eigen::Vector3d& x1, const Eigen::Vector3d& x2,
                   const Eigen::Vector3d& x3) {
  const Eigen::Vector3d e = x1 - x0;
  const Eigen::Vector3d n1 = e.cross(x2 - x0);
  const Eigen::Vector3d n2 = (x3 - x0).cross(e);
  return std::atan2(n1.cross(n2).dot(e.normalized()), n1.dot(n2));
}

}  // namespace

double Mesh::scale() const {
  if (num_vertices() == 0) return 0.0;
  const auto pts = rest_positions.reshaped(3, num_vertices());
  return (pts.rowwise().maxCoeff() - pts.rowwise().minCoeff()).norm();
}

void Mesh::validate() const {
  if (rest_positions.size() % 3 != 0) throw InputError("mesh: position array length not a multiple of 3");
  if (!rest_positions.allFinite()) throw InputError("mesh: non-finite rest positions");
  const int n = num_vertices();
  if (elements.cols() != nodes_per_element())
    throw InputError("mesh: expected " + std::to_string(nodes_per_element()) + " indices per element");
  for (int e = 0; e < num_elements(); ++e) {
    for (int k = 0; k < elements.cols(); ++k) {
      const int v = elements(e, k);
      if (v < 0 || v >= n)
        throw InputError("mesh: element " + std::to_string(e) + " references vertex " + std::to_string(v) +
                         " out of range [0, " + std::to_string(n) + ")");
    }
    if (kind == MeshKind::solid) {
      const double vol = signed_tet_volume(vertex(elements(e, 0)), vertex(elements(e, 1)),
                                           vertex(elements(e, 2)), vertex(elements(e, 3)));
      if (!(vol > 0.0)) throw InputError("mesh: tet " + std::to_string(e) + " has non-positive volume");
    } else {
      const double area =
          0.5 * (vertex(elements(e, 1)) - vertex(elements(e, 0)))
                    .cross(vertex(elements(e, 2)) - vertex(elements(e, 0)))
                    .norm();
      if (!(area > 0.0)) throw InputError("mesh: triangle " + std::to_string(e) + " is degenerate");
    }
  }
  if (kind == MeshKind::shell) {
    std::map<EdgeKey, int> count;
    for (int e = 0; e < num_elements(); ++e)
      for (int k = 0; k < 3; ++k) ++count[edge_key(elements(e, k), elements(e, (k + 1) % 3))];
    for (const auto& [edge, c] : count)
      if (c > 2)
        throw InputError("mesh: non-manifold edge (" + std::to_string(edge.first) + ", " +
                         std::to_string(edge.second) + ") shared by " + std::to_string(c) + " triangles");
  }
  for (const auto& p : pinned)
    if (p.vertex < 0 || p.vertex >= n) throw InputError("mesh: pinned vertex out of range");
}

void MaterialParams::validate() const {
  if (!(young_modulus > 0.0)) throw InputError("material: young_modulus must be positive");
  if (!(poisson_ratio > -1.0 && poisson_ratio < 0.5))
    throw InputError("material: poisson_ratio must lie in (-1, 0.5)");
  if (!(density > 0.0)) throw InputError("material: density must be positive");
  if (!(thickness > 0.0)) throw InputError("material: thickness must be positive");
}

double MaterialParams::hinge_stiffness() const {
  if (bending_stiffness > 0.0) return bending_stiffness;
  // Plate rigidity D = E t^3 / (12 (1 - nu^2)). On a regular grid a cylindrical
  // bend of curvature k gives theta = k * dx at axis-aligned edges with
  // |e| / h_e = 3, so D / 6 reproduces the continuum density D k^2 / 2.
  const double plate = young_modulus * thickness * thickness * thickness /
                       (12.0 * (1.0 - poisson_ratio * poisson_ratio));
  return plate / 6.0;
}

std::vector<double> RestData::element_weights() const {
  return tet_volume.empty() ? tri_area : tet_volume;
}

RestData compute_rest_data(const Mesh& mesh, const MaterialParams& material) {
  mesh.validate();
  material.validate();
  RestData rest;
  const int n = mesh.num_vertices();
  rest.lumped_mass = Eigen::VectorXd::Zero(n);

  if (mesh.kind == MeshKind::solid) {
    rest.tet_dm_inv.reserve(mesh.num_elements());
    rest.tet_volume.reserve(mesh.num_elements());
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const Eigen::Vector3d x0 = mesh.vertex(mesh.elements(e, 0));
      Eigen::Matrix3d dm;
      for (int k = 0; k < 3; ++k) dm.col(k) = mesh.vertex(mesh.elements(e, k + 1)) - x0;
      const double vol = dm.determinant() / 6.0;
      if (!(vol > 0.0)) throw InputError("rest data: degenerate tet " + std::to_string(e));
      rest.tet_dm_inv.push_back(dm.inverse());
      rest.tet_volume.push_back(vol);
      rest.total_measure += vol;
      for (int k = 0; k < 4; ++k) rest.lumped_mass[mesh.elements(e, k)] += material.density * vol / 4.0;
    }
    rest.total_mass = material.density * rest.total_measure;
  } else {
    rest.tri_dm_inv.reserve(mesh.num_elements());
    rest.tri_area.reserve(mesh.num_elements());
    std::map<EdgeKey, std::vector<std::pair<int, int>>> edge_faces;  // (triangle, opposite vertex)
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const int i0 = mesh.elements(e, 0), i1 = mesh.elements(e, 1), i2 = mesh.elements(e, 2);
      const Eigen::Vector3d x0 = mesh.vertex(i0), x1 = mesh.vertex(i1), x2 = mesh.vertex(i2);
      const Eigen::Vector3d e1 = x1 - x0, e2 = x2 - x0;
      const Eigen::Vector3d normal = e1.cross(e2);
      const double area = 0.5 * normal.norm();
      if (!(area > 0.0)) throw InputError("rest data: degenerate triangle " + std::to_string(e));
      // Orthonormal frame in the triangle plane with the first axis along e1.
      const Eigen::Vector3d t1 = e1.normalized();
      const Eigen::Vector3d t2 = normal.normalized().cross(t1);
      Eigen::Matrix2d dm;
      dm << e1.dot(t1), e2.dot(t1), e1.dot(t2), e2.dot(t2);
      rest.tri_dm_inv.push_back(dm.inverse());
      rest.tri_area.push_back(area);
      rest.tri_edge_length.emplace_back((x2 - x1).norm(), (x0 - x2).norm(), (x1 - x0).norm());
      rest.total_measure += area;
      for (int k = 0; k < 3; ++k)
        rest.lumped_mass[mesh.elements(e, k)] += material.density * material.thickness * area / 3.0;
      for (int k = 0; k < 3; ++k) {
        const int a = mesh.elements(e, k), b = mesh.elements(e, (k + 1) % 3), c = mesh.elements(e, (k + 2) % 3);
        edge_faces[edge_key(a, b)].emplace_back(e, c);
      }
    }
    rest.total_mass = material.density * material.thickness * rest.total_measure;

    for (const auto& [edge, faces] : edge_faces) {
      if (faces.size() != 2) continue;  // boundary edge
      const auto [f0, opp0] = faces[0];
      const auto [f1, opp1] = faces[1];
      // Orient the edge as it appears in the first triangle.
      int a = edge.first, b = edge.second;
      for (int k = 0; k < 3; ++k) {
        if (mesh.elements(f0, k) == edge.second && mesh.elements(f0, (k + 1) % 3) == edge.first) {
          std::swap(a, b);
          break;
        }
      }
      Hinge h;
      h.v = {a, b, opp0, opp1};
      h.rest_angle = hinge_angle(mesh.vertex(a), mesh.vertex(b), mesh.vertex(opp0), mesh.vertex(opp1));
      const double len = (mesh.vertex(b) - mesh.vertex(a)).norm();
      const double area_sum = rest.tri_area[f0] + rest.tri_area[f1];
      // Heights h_i = 2 A_i / |e|; h_e = (h_0 + h_1) / 6, so |e| / h_e = 3 |e|^2 / (A_0 + A_1).
      h.weight = 3.0 * len * len / area_sum;
      rest.hinges.push_back(h);
    }
  }
  return rest;
}

Mesh make_rect_sheet(int nx, int ny, double aspect_ratio, double side_length) {
  if (nx < 1 || ny < 1) throw InputError("make_rect_sheet: cell counts must be >= 1");
  if (!(aspect_ratio > 0.0)) throw InputError("make_rect_sheet: aspect_ratio must be positive");
  if (!(side_length > 0.0)) throw InputError("make_rect_sheet: side_length must be positive");
  const double lx = side_length, ly = side_length / aspect_ratio;
  Mesh mesh;
  mesh.kind = MeshKind::shell;
  mesh.rest_positions.resize(3 * (nx + 1) * (ny + 1));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int v = id(i, j);
      mesh.rest_positions.segment<3>(3 * v) << lx * (static_cast<double>(i) / nx - 0.5),
          ly * (static_cast<double>(j) / ny - 0.5), 0.0;
    }
  mesh.elements.resize(2 * nx * ny, 3);
  int t = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.elements.row(t++) << a, b, c;
        mesh.elements.row(t++) << a, c, d;
      } else {
        mesh.elements.row(t++) << a, b, d;
        mesh.elements.row(t++) << b, c, d;
      }
    }
  return mesh;
}

Mesh make_box_tets(int nx, int ny, int nz, const Eigen::Vector3d& size) {
  if (nx < 1 || ny < 1 || nz < 1) throw InputError("make_box_tets: cell counts must be >= 1");
  Mesh mesh;
  mesh.kind = MeshKind::solid;
  auto id = [&](int i, int j, int k) { return (k * (ny + 1) + j) * (nx + 1) + i; };
  mesh.rest_positions.resize(3 * (nx + 1) * (ny + 1) * (nz + 1));
  for (int k = 0; k <= nz; ++k)
    for (int j = 0; j <= ny; ++j)
      for (int i = 0; i <= nx; ++i)
        mesh.rest_positions.segment<3>(3 * id(i, j, k))
            << size.x() * (static_cast<double>(i) / nx - 0.5),
            size.y() * (static_cast<double>(j) / ny - 0.5), size.z() * (static_cast<double>(k) / nz - 0.5);
  // Kuhn subdivision of each cube into 6 tets along the main diagonal.
  static constexpr int kPaths[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  std::vector<std::array<int, 4>> tets;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        for (const auto& path : kPaths) {
          std::array<int, 3> c{i, j, k};
          std::array<int, 4> tet{};
          tet[0] = id(c[0], c[1], c[2]);
          for (int s = 0; s < 3; ++s) {
            ++c[path[s]];
            tet[s + 1] = id(c[0], c[1], c[2]);
          }
          tets.push_back(tet);
        }
  mesh.elements.resize(static_cast<int>(tets.size()), 4);
  for (int t = 0; t < static_cast<int>(tets.size()); ++t) {
    auto tet = tets[t];
    if (signed_tet_volume(mesh.vertex(tet[0]), mesh.vertex(tet[1]), mesh.vertex(tet[2]), mesh.vertex(tet[3])) < 0)
      std::swap(tet[2], tet[3]);
    for (int q = 0; q < 4; ++q) mesh.elements(t, q) = tet[q];
  }
  return mesh;
}

std::optional<std::vector<int>> reflection_map(const Mesh& mesh, int axis, double tol) {
  if (axis < 0 || axis > 2) throw InputError("reflection_map: axis must be 0, 1 or 2");
  const int n = mesh.num_vertices();
  const auto pts = mesh.rest_positions.reshaped(3, n);
  const double center = 0.5 * (pts.row(axis).maxCoeff() + pts.row(axis).minCoeff());
  const double tol_abs = tol * std::max(1.0, mesh.scale());

  // Sort vertices lexicographically so reflected lookups are O(n log n).
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  auto less = [&](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    for (int k = 0; k < 3; ++k) {
      if (a[k] < b[k] - tol_abs) return true;
      if (a[k] > b[k] + tol_abs) return false;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) { return less(mesh.vertex(a), mesh.vertex(b)); });

  std::vector<int> perm(n, -1);
  for (int v = 0; v < n; ++v) {
    Eigen::Vector3d p = mesh.vertex(v);
    p[axis] = 2.0 * center - p[axis];
    auto it = std::lower_bound(order.begin(), order.end(), p,
                               [&](int a, const Eigen::Vector3d& q) { return less(mesh.vertex(a), q); });
    if (it == order.end() || (mesh.vertex(*it) - p).cwiseAbs().maxCoeff() > tol_abs) return std::nullopt;
    perm[v] = *it;
  }

  // Connectivity must be preserved as a set of elements.
  auto canonical = [&](int e, bool mapped) {
    std::vector<int> idx(mesh.elements.cols());
    for (int k = 0; k < mesh.elements.cols(); ++k) idx[k] = mapped ? perm[mesh.elements(e, k)] : mesh.elements(e, k);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  std::vector<std::vector<int>> original, mapped;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    original.push_back(canonical(e, false));
    mapped.push_back(canonical(e, true));
  }
  std::sort(original.begin(), original.end());
  std::sort(mapped.begin(), mapped.end());
  if (original != mapped) return std::nullopt;
  return perm;
}

Eigen::VectorXd reflect_positions(const Eigen::VectorXd& x, const std::vector<int>& perm, int axis,
                                  double center) {
  Eigen::VectorXd out(x.size());
  for (int v = 0; v < static_cast<int>(perm.size()); ++v) {
    out.segment<3>(3 * v) = x.segment<3>(3 * perm[v]);
    out[3 * v + axis] = 2.0 * center - out[3 * v + axis];
  }
  return out;
}

}  // namespace nmodes
