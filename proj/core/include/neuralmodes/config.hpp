#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/energy.hpp"
#include "neuralmodes/oracle.hpp"
#include "neuralmodes/training.hpp"

namespace nmodes {

struct MeshSource {
  std::string type = "sheet";  // sheet | box | obj | tetgen
  // sheet
  int nx = 10, ny = 10;
  double aspect_ratio = 1.0;
  double side_length = 1.0;
  // box
  int cells_x = 4, cells_y = 4, cells_z = 4;
  Eigen::Vector3d size = Eigen::Vector3d::Ones();
  // files
  std::string path;  // obj
  std::string node_path, ele_path;
};

/// Vertices held by penalty springs at their rest positions. Either an
/// explicit list or every vertex whose coordinate on `axis` is within
/// `tolerance` of the minimum ("min") or maximum ("max").
struct PinSpec {
  std::vector<int> vertices;
  std::string select;  // "", "min" or "max"
  int axis = 2;
  double tolerance = 1e-9;
  double stiffness = 1e5;
};

/// Sinusoidally moving attachment used only by dynamics.
struct ActuatorSpec {
  int vertex = 0;
  double stiffness = 1e4;
  Eigen::Vector3d amplitude = Eigen::Vector3d::Zero();
  double frequency = 1.0;
  double phase = 0.0;
};

struct DatasetPlan {
  /// Either three grids (train / validation / test) or one random set split
  /// contiguously.
  bool random = false;
  int train_resolution = 9, validation_resolution = 7, test_resolution = 11;
  int random_count = 1300;
  std::vector<int> split = {900, 100, 300};
};

struct DynamicsConfig {
  DynamicsOptions options;
  int steps = 100;
  Eigen::VectorXd initial_z;  // empty: zero
};

struct ExperimentConfig {
  std::string name = "sheet";
  MeshSource mesh;
  MaterialParams material;
  PinSpec pins;  // empty vertices and select: none
  std::vector<ActuatorSpec> actuators;
  AuxSpec aux;
  int modes = 3;
  double domain_half_width = 0.625;
  TrainConfig train;
  DatasetPlan datasets;
  OracleOptions oracle;
  DynamicsConfig dynamics;
  std::string output_dir = "out";
  uint64_t seed = 0;

  /// The 10x10 sheet benchmark.
  static ExperimentConfig sheet_benchmark();

  void validate() const;
  std::string to_json() const;
  static ExperimentConfig from_json(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  Mesh build_mesh() const;
  std::vector<int> pinned_vertices(const Mesh& mesh) const;
  /// Energy family used for modes, oracle and training (pins included).
  EnergyFamilyPtr build_family() const;
  /// Pins plus actuators, for dynamics.
  EnergyModelPtr build_dynamics_energy(const Mesh& mesh) const;
  DomainBox domain() const { return DomainBox::cube(modes, domain_half_width); }
};

}  // namespace nmodes
