#include "neuralmodes/subspace.hpp"

#include <cmath>

#include "neuralmodes/errors.hpp"

namespace nmodes {

SubspaceModel SubspaceModel::create(const EnergyFamily& family, LinearModeBasis basis, DomainBox box,
                                    const std::vector<int>& hidden, uint64_t seed) {
  SubspaceModel model;
  if (basis.num_dofs() != family.num_dofs()) throw InputError("subspace model: basis does not match the mesh");
  box.validate();
  if (box.dim() != basis.size())
    throw InputError("subspace model: domain box has " + std::to_string(box.dim()) + " axes but the basis has " +
                     std::to_string(basis.size()) + " modes");
  std::vector<int> widths;
  widths.push_back(basis.size() + family.aux_dim());
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(family.num_dofs());
  model.mlp = mlp_init(widths, seed);
  model.basis = std::move(basis);
  model.box = std::move(box);
  model.aux = family.aux();
  model.fingerprint = family.fingerprint();
  model.mesh_fingerprint = family.reference()->fingerprint();
  return model;
}

void SubspaceModel::validate() const {
  mlp.validate();
  box.validate();
  aux.validate();
  if (box.dim() != m()) throw InputError("subspace model: domain box does not match the mode count");
  if (mlp.input_dim() != m() + aux_dim()) throw InputError("subspace model: network input width mismatch");
  if (mlp.output_dim() != num_dofs()) throw InputError("subspace model: network output width mismatch");
}

void SubspaceModel::check_compatible(const EnergyFamily& family) const {
  if (family.fingerprint() != fingerprint)
    throw InputError("model fingerprint " + fingerprint + " does not match energy model " + family.fingerprint());
}

Eigen::VectorXd SubspaceModel::network_input(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values) const {
  if (z.size() != m())
    throw InputError("z has length " + std::to_string(z.size()) + ", expected " + std::to_string(m()));
  if (aux_values.size() != aux_dim())
    throw InputError("aux has length " + std::to_string(aux_values.size()) + ", expected " +
                     std::to_string(aux_dim()));
  Eigen::VectorXd p(m() + aux_dim());
  p << z, aux_values;
  return input_box().normalize(p);
}

Eigen::MatrixXd SubspaceModel::network_inputs(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& aux_values) const {
  if (zs.rows() != m()) throw InputError("z batch has wrong row count");
  if (aux_values.rows() != aux_dim() || (aux_dim() > 0 && aux_values.cols() != zs.cols()))
    throw InputError("aux batch has wrong shape");
  const DomainBox ib = input_box();
  Eigen::MatrixXd out(m() + aux_dim(), zs.cols());
  out.topRows(m()) = zs;
  if (aux_dim() > 0) out.bottomRows(aux_dim()) = aux_values;
  const Eigen::ArrayXd scale = 2.0 / (ib.hi - ib.lo).array();
  for (Eigen::Index c = 0; c < out.cols(); ++c)
    out.col(c) = ((out.col(c) - ib.lo).array() * scale - 1.0).matrix();
  return out;
}

Eigen::VectorXd SubspaceModel::correction(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values) const {
  return mlp_forward(mlp, network_input(z, aux_values));
}

Eigen::VectorXd SubspaceModel::displacement(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values) const {
  return basis.modes * z + correction(z, aux_values);
}

Eigen::VectorXd SubspaceModel::decode(const EnergyModel& energy, const Eigen::VectorXd& z,
                                      const Eigen::VectorXd& aux_values) const {
  return energy.rest_positions() + displacement(z, aux_values);
}

Eigen::MatrixXd SubspaceModel::displacement_jacobian(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values) const {
  const Eigen::MatrixXd jy = mlp_input_jacobian(mlp, network_input(z, aux_values));
  const Eigen::VectorXd scale = 2.0 / box.width().array();
  return basis.modes + jy.leftCols(m()) * scale.asDiagonal();
}

Eigen::VectorXd SubspaceModel::displacement_vjp(const Eigen::VectorXd& z, const Eigen::VectorXd& aux_values,
                                                const Eigen::VectorXd& cotangent) const {
  const Eigen::VectorXd gi = mlp_input_vjp(mlp, network_input(z, aux_values), cotangent);
  const Eigen::VectorXd scale = 2.0 / box.width().array();
  return basis.modes.transpose() * cotangent + (gi.head(m()).array() * scale.array()).matrix();
}

Eigen::MatrixXd origin_aux_points(const AuxSpec& aux, int points) {
  if (aux.dim() == 0) return Eigen::MatrixXd(0, 1);
  if (points < 2) points = 2;
  Eigen::MatrixXd out(1, points);
  for (int i = 0; i < points; ++i) out(0, i) = aux.lo + (aux.hi - aux.lo) * i / double(points - 1);
  return out;
}

LossValue loss_batch(const SubspaceModel& model, const EnergyFamily& family, const Eigen::MatrixXd& zs,
                     const Eigen::MatrixXd& aux_values, const Eigen::MatrixXd& origin_aux, const LossWeights& w,
                     Eigen::VectorXd* grad) {
  const int batch = static_cast<int>(zs.cols());
  const int origins = static_cast<int>(origin_aux.cols());
  if (batch < 1) throw InputError("loss: empty batch");
  if (origin_aux.rows() != model.aux_dim()) throw InputError("loss: origin aux has wrong row count");
  const int m = model.m();

  Eigen::MatrixXd inputs(m + model.aux_dim(), batch + origins);
  inputs.leftCols(batch) = model.network_inputs(zs, aux_values);
  if (origins > 0)
    inputs.rightCols(origins) = model.network_inputs(Eigen::MatrixXd::Zero(m, origins), origin_aux);

  MlpTape tape;
  const Eigen::MatrixXd y = mlp_forward_batch(model.mlp, inputs, grad ? &tape : nullptr);
  const Eigen::MatrixXd l = model.basis.modes * zs;

  Eigen::MatrixXd cot(grad ? y.rows() : 0, grad ? y.cols() : 0);
  Eigen::VectorXd energies(batch), constraints(batch);
  std::vector<std::string> failures(batch);
#pragma omp parallel for schedule(static)
  for (int b = 0; b < batch; ++b) {
    try {
      const EnergyModelPtr em = family.at(model.aux_dim() ? Eigen::VectorXd(aux_values.col(b)) : Eigen::VectorXd());
      const Eigen::VectorXd x = em->rest_positions() + l.col(b) + y.col(b);
      if (!x.allFinite()) throw NumericError("non-finite decoded positions");
      const double c = l.col(b).dot(y.col(b));
      double e;
      if (grad) {
        Eigen::VectorXd g;
        e = em->energy_and_gradient(x, 0.0, g);
        cot.col(b) = (g + 2.0 * w.lambda * c * l.col(b)) / batch;
      } else {
        e = em->energy(x);
      }
      if (!std::isfinite(e)) throw NumericError("energy is not finite");
      energies[b] = e;
      constraints[b] = c * c;
    } catch (const std::exception& ex) {
      failures[b] = ex.what();
    }
  }
  for (int b = 0; b < batch; ++b) {
    if (!failures[b].empty()) {
      std::string zt;
      for (int i = 0; i < m; ++i) zt += (i ? ", " : "") + std::to_string(zs(i, b));
      throw NumericError("loss: sample " + std::to_string(b) + " (z = [" + zt + "]): " + failures[b]);
    }
  }

  LossValue out;
  out.mean_energy = energies.mean();
  out.mean_constraint = constraints.mean();
  double origin_sq = 0.0;
  for (int a = 0; a < origins; ++a) {
    const double sq = y.col(batch + a).squaredNorm();
    origin_sq += sq;
    out.origin_norm += std::sqrt(sq);
    if (grad) cot.col(batch + a) = 2.0 * w.eta * y.col(batch + a) / origins;
  }
  if (origins > 0) {
    origin_sq /= origins;
    out.origin_norm /= origins;
  }
  out.loss = out.mean_energy + w.lambda * out.mean_constraint + w.eta * origin_sq;
  if (!std::isfinite(out.loss)) throw NumericError("loss is not finite");
  if (grad) *grad = mlp_pullback_batch(model.mlp, tape, cot);
  return out;
}

Eigen::MatrixXd jacobian_at_origin(const SubspaceModel& model, const Eigen::VectorXd& aux_values) {
  const int m = model.m();
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd base = model.displacement(z0, aux_values);
  Eigen::MatrixXd out(model.num_dofs(), m);
  for (int i = 0; i < m; ++i) {
    const double h = 1e-4 * (model.box.hi[i] - model.box.lo[i]);
    Eigen::VectorXd z = z0;
    z[i] = h;
    out.col(i) = (model.displacement(z, aux_values) - base) / h;
    out.col(i).normalize();
  }
  return out;
}

}  // namespace nmodes
