#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace nmodes {

enum class MeshKind { shell, solid };

struct PinnedVertex {
  int vertex = 0;
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
};

/// Reference geometry and connectivity. Positions are stored flat as
/// (x0, y0, z0, x1, ...). Elements are triangles (shell) or tets (solid),
/// one per row.
struct Mesh {
  Eigen::VectorXd rest_positions;
  Eigen::MatrixXi elements;
  MeshKind kind = MeshKind::shell;
  std::vector<PinnedVertex> pinned;

  int num_vertices() const { return static_cast<int>(rest_positions.size() / 3); }
  int num_elements() const { return static_cast<int>(elements.rows()); }
  int num_dofs() const { return static_cast<int>(rest_positions.size()); }
  int nodes_per_element() const { return kind == MeshKind::shell ? 3 : 4; }

  Eigen::Vector3d vertex(int i) const { return rest_positions.segment<3>(3 * i); }

  /// Length of the bounding-box diagonal of the rest shape.
  double scale() const;

  /// Throws InputError if indices are out of range, an element is
  /// degenerate, or a shell mesh is not edge-manifold.
  void validate() const;
};

struct MaterialParams {
  double young_modulus = 1.0e4;   // Pa
  double poisson_ratio = 0.3;
  double density = 100.0;         // kg/m^3
  double thickness = 0.01;        // m, shells only
  double bending_stiffness = -1;  // N*m, shells only; <= 0 derives it from the plate formula

  void validate() const;

  double lame_mu() const { return young_modulus / (2.0 * (1.0 + poisson_ratio)); }
  double lame_lambda() const {
    return young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  }
  /// Plane-stress first Lame parameter used by the shell membrane term.
  double membrane_lambda() const {
    const double mu = lame_mu(), lam = lame_lambda();
    return 2.0 * mu * lam / (lam + 2.0 * mu);
  }
  /// Hinge stiffness multiplying (theta - theta_rest)^2 * |e| / h_e.
  double hinge_stiffness() const;
};

/// Interior edge of a shell with its two opposite vertices. Vertices 0 and 1
/// span the edge, vertex 2 belongs to the first triangle, vertex 3 to the second.
struct Hinge {
  std::array<int, 4> v{};
  double rest_angle = 0.0;
  // |e| / h_e with h_e a third of the mean height of the two triangles.
  double weight = 0.0;
};

struct RestData {
  // Solid: inverse reference shape matrices and volumes.
  std::vector<Eigen::Matrix3d> tet_dm_inv;
  std::vector<double> tet_volume;
  // Shell: inverse of the 2x2 reference shape matrix in the triangle plane.
  std::vector<Eigen::Matrix2d> tri_dm_inv;
  std::vector<double> tri_area;
  std::vector<Eigen::Vector3d> tri_edge_length;
  std::vector<Hinge> hinges;

  Eigen::VectorXd lumped_mass;  // per vertex
  double total_mass = 0.0;
  double total_measure = 0.0;   // total volume (solid) or area (shell)

  /// Element weights used for stress averaging (areas or volumes).
  std::vector<double> element_weights() const;
};

RestData compute_rest_data(const Mesh& mesh, const MaterialParams& material);

/// Flat rectangular sheet in the z = 0 plane centered at the origin with
/// side lengths side_length and side_length / aspect_ratio. Cells are split
/// along a diagonal that alternates with (i + j) parity.
Mesh make_rect_sheet(int nx, int ny, double aspect_ratio, double side_length = 1.0);

/// Regular tet grid of an axis-aligned box, 6 tets per cell.
Mesh make_box_tets(int nx, int ny, int nz, const Eigen::Vector3d& size);

Mesh load_tri_mesh(const std::string& path);
Mesh load_tet_mesh(const std::string& node_path, const std::string& ele_path);
void write_obj(const Mesh& mesh, const std::string& path);
void write_tetgen(const Mesh& mesh, const std::string& node_path, const std::string& ele_path);

/// Vertex permutation realizing the reflection that negates coordinate
/// `axis`, or nullopt if the mesh is not mirror symmetric about that plane
/// through its bounding-box center.
std::optional<std::vector<int>> reflection_map(const Mesh& mesh, int axis, double tol = 1e-9);

/// Applies the reflection to a full position vector: out_v = R * x_{perm[v]}
/// with R negating coordinate `axis` about `center`.
Eigen::VectorXd reflect_positions(const Eigen::VectorXd& x, const std::vector<int>& perm, int axis,
                                  double center);

}  // namespace nmodes
