#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "neuralmodes/energy.hpp"

namespace nmodes {

/// Axis-aligned box [lo_i, hi_i].
struct DomainBox {
  Eigen::VectorXd lo, hi;

  static DomainBox cube(int dim, double half_width);

  int dim() const { return static_cast<int>(lo.size()); }
  void validate() const;
  bool contains(const Eigen::VectorXd& p, double slack = 1e-12) const;
  /// Affine map onto [-1, 1]^dim.
  Eigen::VectorXd normalize(const Eigen::VectorXd& p) const;
  Eigen::VectorXd width() const { return hi - lo; }

  /// resolution^dim lexicographic grid points, last axis fastest, one per column.
  Eigen::MatrixXd grid(int resolution) const;
  Eigen::MatrixXd uniform(int count, std::mt19937_64& rng) const;

  /// Concatenation of two boxes (z box followed by aux box).
  static DomainBox join(const DomainBox& a, const DomainBox& b);
};

/// Optional auxiliary network input. The only supported family is the
/// rectangular sheet parameterized by its aspect ratio.
struct AuxSpec {
  std::string name;  // empty or "aspect_ratio"
  double lo = 1.0, hi = 1.0;
  double reference = 1.0;  // the aux value whose mesh defines the linear modes
  int nx = 10, ny = 10;
  double side_length = 1.0;

  int dim() const { return name.empty() ? 0 : 1; }
  void validate() const;
  DomainBox box() const;
};

/// Energy models indexed by auxiliary values. Without aux it wraps a single
/// model. With the aspect-ratio family every member shares connectivity and
/// vertex numbering, so one displacement basis applies to all of them.
class EnergyFamily {
 public:
  explicit EnergyFamily(EnergyModelPtr model);
  EnergyFamily(AuxSpec aux, MaterialParams material);

  const AuxSpec& aux() const { return aux_; }
  int aux_dim() const { return aux_.dim(); }
  int num_dofs() const { return reference_->num_dofs(); }

  /// The model at the reference aux value (or the only model).
  const EnergyModelPtr& reference() const { return reference_; }
  EnergyModelPtr at(const Eigen::VectorXd& aux) const;

  std::string fingerprint() const;

 private:
  AuxSpec aux_;
  MaterialParams material_;
  EnergyModelPtr reference_;
  mutable std::mutex mutex_;
  mutable std::map<double, EnergyModelPtr> cache_;
};

using EnergyFamilyPtr = std::shared_ptr<const EnergyFamily>;

}  // namespace nmodes
