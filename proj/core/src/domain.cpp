#include "neuralmodes/domain.hpp"

#include <cmath>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/hash.hpp"

namespace nmodes {

DomainBox DomainBox::cube(int dim, double half_width) {
  DomainBox b;
  b.lo = Eigen::VectorXd::Constant(dim, -half_width);
  b.hi = Eigen::VectorXd::Constant(dim, half_width);
  return b;
}

void DomainBox::validate() const {
  if (lo.size() != hi.size()) throw InputError("domain box: lo and hi differ in length");
  for (int i = 0; i < dim(); ++i)
    if (!(lo[i] < hi[i])) throw InputError("domain box: axis " + std::to_string(i) + " is empty or inverted");
}

bool DomainBox::contains(const Eigen::VectorXd& p, double slack) const {
  if (p.size() != lo.size()) return false;
  for (int i = 0; i < dim(); ++i) {
    const double pad = slack * (hi[i] - lo[i]);
    if (p[i] < lo[i] - pad || p[i] > hi[i] + pad) return false;
  }
  return true;
}

Eigen::VectorXd DomainBox::normalize(const Eigen::VectorXd& p) const {
  return (2.0 * (p - lo).array() / (hi - lo).array() - 1.0).matrix();
}

Eigen::MatrixXd DomainBox::grid(int resolution) const {
  validate();
  if (resolution < 2) throw InputError("grid resolution must be >= 2");
  const int d = dim();
  long total = 1;
  for (int i = 0; i < d; ++i) total *= resolution;
  Eigen::MatrixXd out(d, total);
  std::vector<int> idx(d, 0);
  for (long c = 0; c < total; ++c) {
    for (int i = 0; i < d; ++i) out(i, c) = lo[i] + (hi[i] - lo[i]) * idx[i] / double(resolution - 1);
    for (int i = d - 1; i >= 0; --i) {
      if (++idx[i] < resolution) break;
      idx[i] = 0;
    }
  }
  return out;
}

Eigen::MatrixXd DomainBox::uniform(int count, std::mt19937_64& rng) const {
  validate();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd out(dim(), count);
  for (int c = 0; c < count; ++c)
    for (int i = 0; i < dim(); ++i) out(i, c) = lo[i] + (hi[i] - lo[i]) * u(rng);
  return out;
}

DomainBox DomainBox::join(const DomainBox& a, const DomainBox& b) {
  DomainBox out;
  out.lo.resize(a.dim() + b.dim());
  out.hi.resize(a.dim() + b.dim());
  out.lo << a.lo, b.lo;
  out.hi << a.hi, b.hi;
  return out;
}

void AuxSpec::validate() const {
  if (name.empty()) return;
  if (name != "aspect_ratio") throw InputError("aux: unsupported auxiliary parameter '" + name + "'");
  if (!(lo > 0.0 && lo < hi)) throw InputError("aux: aspect ratio range must satisfy 0 < lo < hi");
  if (reference < lo || reference > hi) throw InputError("aux: reference value outside range");
  if (nx < 1 || ny < 1) throw InputError("aux: sheet cell counts must be >= 1");
  if (!(side_length > 0.0)) throw InputError("aux: side_length must be positive");
}

DomainBox AuxSpec::box() const {
  DomainBox b;
  b.lo = Eigen::VectorXd::Constant(dim(), lo);
  b.hi = Eigen::VectorXd::Constant(dim(), hi);
  return b;
}

EnergyFamily::EnergyFamily(EnergyModelPtr model) : reference_(std::move(model)) {
  if (!reference_) throw InputError("energy family: null model");
  material_ = reference_->material();
}

EnergyFamily::EnergyFamily(AuxSpec aux, MaterialParams material) : aux_(std::move(aux)), material_(material) {
  aux_.validate();
  if (aux_.dim() == 0) throw InputError("energy family: aux spec is empty; use the single-model constructor");
  reference_ = std::make_shared<EnergyModel>(make_rect_sheet(aux_.nx, aux_.ny, aux_.reference, aux_.side_length),
                                             material_);
}

EnergyModelPtr EnergyFamily::at(const Eigen::VectorXd& aux) const {
  if (aux.size() != aux_dim())
    throw InputError("energy family: aux has length " + std::to_string(aux.size()) + ", expected " +
                     std::to_string(aux_dim()));
  if (aux_dim() == 0) return reference_;
  const double a = aux[0];
  if (!(a > 0.0) || !std::isfinite(a)) throw InputError("energy family: aspect ratio must be positive");
  if (a == aux_.reference) return reference_;
  std::lock_guard lock(mutex_);
  if (auto it = cache_.find(a); it != cache_.end()) return it->second;
  if (cache_.size() > 4096) cache_.clear();
  auto model = std::make_shared<EnergyModel>(make_rect_sheet(aux_.nx, aux_.ny, a, aux_.side_length), material_);
  cache_.emplace(a, model);
  return model;
}

std::string EnergyFamily::fingerprint() const {
  Fnv1a h;
  if (aux_dim() == 0) {
    // Static attachments (pins) change the equilibrium, so they count here.
    const auto& att = reference_->attachments();
    if (att.empty()) return reference_->fingerprint();
    h.text(reference_->fingerprint());
    for (const auto& a : att) {
      h.integer(a.vertex).real(a.stiffness).real(a.frequency).real(a.phase);
      for (int i = 0; i < 3; ++i) h.real(a.anchor[i]).real(a.amplitude[i]);
    }
    return h.hex();
  }
  h.text(reference_->fingerprint())
      .text(aux_.name)
      .real(aux_.lo)
      .real(aux_.hi)
      .real(aux_.reference)
      .integer(aux_.nx)
      .integer(aux_.ny)
      .real(aux_.side_length);
  return h.hex();
}

}  // namespace nmodes
