#include "neuralmodes/energy.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <unsupported/Eigen/AutoDiff>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/hash.hpp"

namespace nmodes {

namespace {

// ---------------------------------------------------------------------------
// StVK kernels shared by membrane triangles (D = 2) and tets (D = 3).
// F = Ds * Dm^-1 maps reference edge vectors to deformed ones.

template <int D>
struct StvkElement {
  using MatF = Eigen::Matrix<double, 3, D>;
  using MatD = Eigen::Matrix<double, D, D>;
  using Nodes = Eigen::Matrix<double, 3, D + 1>;

  // Gradient of F_ij w.r.t. node k coordinate i is G(k, j).
  static Eigen::Matrix<double, D + 1, D> shape_gradient(const MatD& dm_inv) {
    Eigen::Matrix<double, D + 1, D> g;
    g.template bottomRows<D>() = dm_inv;
    g.row(0) = -dm_inv.colwise().sum();
    return g;
  }

  static MatF deformation(const Nodes& xs, const MatD& dm_inv) {
    MatF ds;
    for (int k = 0; k < D; ++k) ds.col(k) = xs.col(k + 1) - xs.col(0);
    return ds * dm_inv;
  }

  static MatD green(const MatF& f) { return 0.5 * (f.transpose() * f - MatD::Identity()); }

  static MatD pk2(const MatD& e, double mu, double lambda) {
    return 2.0 * mu * e + lambda * e.trace() * MatD::Identity();
  }

  static double density(const MatD& e, double mu, double lambda) {
    const double tr = e.trace();
    return mu * e.squaredNorm() + 0.5 * lambda * tr * tr;
  }

  // Returns the element energy and adds weight * dW/dx into the node gradient.
  static double energy_gradient(const Nodes& xs, const MatD& dm_inv, double weight, double mu, double lambda,
                                Nodes* grad) {
    const MatF f = deformation(xs, dm_inv);
    const MatD e = green(f);
    if (grad) {
      const MatF p = f * pk2(e, mu, lambda);
      const Eigen::Matrix<double, 3, D> h = weight * p * dm_inv.transpose();
      grad->template rightCols<D>() = h;
      grad->col(0) = -h.rowwise().sum();
    }
    return weight * density(e, mu, lambda);
  }

  static Eigen::Matrix<double, 3 * (D + 1), 3 * (D + 1)> hessian(const Nodes& xs, const MatD& dm_inv,
                                                                  double weight, double mu, double lambda) {
    constexpr int NF = 3 * D;
    constexpr int NX = 3 * (D + 1);
    const MatF f = deformation(xs, dm_inv);
    const MatD e = green(f);
    const MatD s = pk2(e, mu, lambda);
    // dP/dF with F flattened as (i, j) -> i + 3 j.
    Eigen::Matrix<double, NF, NF> hf;
    for (int b = 0; b < D; ++b)
      for (int a = 0; a < 3; ++a) {
        MatF df = MatF::Zero();
        df(a, b) = 1.0;
        const MatD de = 0.5 * (df.transpose() * f + f.transpose() * df);
        const MatD ds = 2.0 * mu * de + lambda * de.trace() * MatD::Identity();
        const MatF dp = df * s + f * ds;
        hf.col(a + 3 * b) = Eigen::Map<const Eigen::Matrix<double, NF, 1>>(dp.data());
      }
    const auto g = shape_gradient(dm_inv);
    // Jacobian of vec(F) w.r.t. node coordinates (node k, coordinate c) -> 3 k + c.
    Eigen::Matrix<double, NF, NX> jac = Eigen::Matrix<double, NF, NX>::Zero();
    for (int k = 0; k <= D; ++k)
      for (int c = 0; c < 3; ++c)
        for (int j = 0; j < D; ++j) jac(c + 3 * j, 3 * k + c) = g(k, j);
    Eigen::Matrix<double, NX, NX> k = weight * jac.transpose() * hf * jac;
    return 0.5 * (k + k.transpose());
  }
};

// ---------------------------------------------------------------------------
// Hinge bending.

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;

double dihedral_angle(const Eigen::Vector3d& x0, const Eigen::Vector3d& x1, const Eigen::Vector3d& x2,
                      const Eigen::Vector3d& x3) {
  const Eigen::Vector3d e = x1 - x0;
  const Eigen::Vector3d n1 = e.cross(x2 - x0);
  const Eigen::Vector3d n2 = (x3 - x0).cross(e);
  return std::atan2(n1.cross(n2).dot(e) / e.norm(), n1.dot(n2));
}

// Gradient of the dihedral angle w.r.t. (x0, x1, x2, x3). Each wing rotates
// about the edge; the edge vertices receive the reaction split by the
// projection parameter of the wing tip onto the edge.
template <typename T>
Eigen::Matrix<T, 12, 1> dihedral_gradient(const Vec3<T>& x0, const Vec3<T>& x1, const Vec3<T>& x2,
                                          const Vec3<T>& x3) {
  using std::sqrt;
  const Vec3<T> e = x1 - x0;
  const Vec3<T> n1 = e.cross(x2 - x0);
  const Vec3<T> n2 = (x3 - x0).cross(e);
  const T elen2 = e.squaredNorm();
  const T elen = sqrt(elen2);
  const Vec3<T> g2 = -(elen / n1.squaredNorm()) * n1;
  const Vec3<T> g3 = -(elen / n2.squaredNorm()) * n2;
  const T t2 = (x2 - x0).dot(e) / elen2;
  const T t3 = (x3 - x0).dot(e) / elen2;
  Eigen::Matrix<T, 12, 1> g;
  g.template segment<3>(0) = -((T(1) - t2) * g2 + (T(1) - t3) * g3);
  g.template segment<3>(3) = -(t2 * g2 + t3 * g3);
  g.template segment<3>(6) = g2;
  g.template segment<3>(9) = g3;
  return g;
}

Eigen::Matrix<double, 12, 12> dihedral_hessian(const Eigen::Matrix<double, 12, 1>& xs) {
  using Deriv = Eigen::Matrix<double, 12, 1>;
  using AD = Eigen::AutoDiffScalar<Deriv>;
  Vec3<AD> p[4];
  for (int k = 0; k < 4; ++k)
    for (int c = 0; c < 3; ++c) p[k][c] = AD(xs[3 * k + c], 12, 3 * k + c);
  const auto g = dihedral_gradient<AD>(p[0], p[1], p[2], p[3]);
  Eigen::Matrix<double, 12, 12> h;
  for (int r = 0; r < 12; ++r) h.row(r) = g[r].derivatives().transpose();
  return h;
}

template <int N>
Eigen::Matrix<double, 3, N> gather(const Eigen::VectorXd& x, const int* idx) {
  Eigen::Matrix<double, 3, N> out;
  for (int k = 0; k < N; ++k) out.col(k) = x.segment<3>(3 * idx[k]);
  return out;
}

template <int N>
void scatter_add(Eigen::VectorXd& g, const int* idx, const Eigen::Matrix<double, 3, N>& local) {
  for (int k = 0; k < N; ++k) g.segment<3>(3 * idx[k]) += local.col(k);
}

template <int N>
void push_block(std::vector<Eigen::Triplet<double>>& trip, const int* idx,
                const Eigen::Matrix<double, 3 * N, 3 * N>& k) {
  for (int a = 0; a < N; ++a)
    for (int b = 0; b < N; ++b)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) trip.emplace_back(3 * idx[a] + i, 3 * idx[b] + j, k(3 * a + i, 3 * b + j));
}

std::array<int, 4> row4(const Eigen::MatrixXi& m, int e) { return {m(e, 0), m(e, 1), m(e, 2), m(e, 3)}; }
std::array<int, 3> row3(const Eigen::MatrixXi& m, int e) { return {m(e, 0), m(e, 1), m(e, 2)}; }

}  // namespace

Eigen::Vector3d Attachment::target(double t) const {
  if (frequency == 0.0 && phase == 0.0) return anchor;
  return anchor + amplitude * std::sin(2.0 * std::numbers::pi * frequency * t + phase);
}

std::vector<Attachment> pin_at_rest(const Mesh& mesh, const std::vector<int>& vertices, double stiffness) {
  std::vector<Attachment> out;
  for (int v : vertices) {
    if (v < 0 || v >= mesh.num_vertices()) throw InputError("pin_at_rest: vertex out of range");
    Attachment a;
    a.vertex = v;
    a.stiffness = stiffness;
    a.anchor = mesh.vertex(v);
    out.push_back(a);
  }
  return out;
}

double ElementStress::weighted_mean() const {
  const double wsum = weights.sum();
  return wsum > 0 ? frobenius.dot(weights) / wsum : 0.0;
}

double ElementStress::max() const { return frobenius.size() ? frobenius.maxCoeff() : 0.0; }

EnergyModel::EnergyModel(Mesh mesh, MaterialParams material, std::vector<Attachment> attachments)
    : mesh_(std::move(mesh)), material_(material), attachments_(std::move(attachments)) {
  rest_ = compute_rest_data(mesh_, material_);
  for (const auto& a : attachments_) {
    if (a.vertex < 0 || a.vertex >= mesh_.num_vertices()) throw InputError("attachment vertex out of range");
    if (!(a.stiffness >= 0.0)) throw InputError("attachment stiffness must be non-negative");
  }
  dof_mass_.resize(mesh_.num_dofs());
  for (int v = 0; v < mesh_.num_vertices(); ++v) dof_mass_.segment<3>(3 * v).setConstant(rest_.lumped_mass[v]);

  Fnv1a h;
  h.text(mesh_.kind == MeshKind::shell ? "shell" : "solid")
      .array(mesh_.rest_positions)
      .array(mesh_.elements)
      .real(material_.young_modulus)
      .real(material_.poisson_ratio)
      .real(material_.density)
      .real(material_.thickness)
      .real(material_.bending_stiffness);
  fingerprint_ = h.hex();
}

EnergyModel EnergyModel::with_attachments(std::vector<Attachment> attachments) const {
  return EnergyModel(mesh_, material_, std::move(attachments));
}

void EnergyModel::check_input(const Eigen::VectorXd& x) const {
  if (x.size() != mesh_.num_dofs())
    throw InputError("energy: position vector has length " + std::to_string(x.size()) + ", expected " +
                     std::to_string(mesh_.num_dofs()));
  if (!x.allFinite()) throw NumericError("energy: non-finite positions");
}

double EnergyModel::accumulate(const Eigen::VectorXd& x, double t, Eigen::VectorXd* grad) const {
  check_input(x);
  if (grad) grad->setZero(x.size());
  double total = 0.0;
  const double mu = material_.lame_mu();

  if (mesh_.kind == MeshKind::solid) {
    const double lambda = material_.lame_lambda();
    using K = StvkElement<3>;
    K::Nodes g;
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto idx = row4(mesh_.elements, e);
      const auto xs = gather<4>(x, idx.data());
      total += K::energy_gradient(xs, rest_.tet_dm_inv[e], rest_.tet_volume[e], mu, lambda, grad ? &g : nullptr);
      if (grad) scatter_add<4>(*grad, idx.data(), g);
    }
  } else {
    const double lambda = material_.membrane_lambda();
    using K = StvkElement<2>;
    K::Nodes g;
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto idx = row3(mesh_.elements, e);
      const auto xs = gather<3>(x, idx.data());
      total += K::energy_gradient(xs, rest_.tri_dm_inv[e], rest_.tri_area[e] * material_.thickness, mu, lambda,
                                  grad ? &g : nullptr);
      if (grad) scatter_add<3>(*grad, idx.data(), g);
    }
    const double kb = material_.hinge_stiffness();
    for (const auto& h : rest_.hinges) {
      const Eigen::Vector3d x0 = x.segment<3>(3 * h.v[0]), x1 = x.segment<3>(3 * h.v[1]);
      const Eigen::Vector3d x2 = x.segment<3>(3 * h.v[2]), x3 = x.segment<3>(3 * h.v[3]);
      const double d = dihedral_angle(x0, x1, x2, x3) - h.rest_angle;
      total += kb * h.weight * d * d;
      if (grad) {
        const Eigen::Matrix<double, 12, 1> dtheta = dihedral_gradient<double>(x0, x1, x2, x3);
        for (int k = 0; k < 4; ++k) grad->segment<3>(3 * h.v[k]) += 2.0 * kb * h.weight * d * dtheta.segment<3>(3 * k);
      }
    }
  }

  for (const auto& a : attachments_) {
    const Eigen::Vector3d r = x.segment<3>(3 * a.vertex) - a.target(t);
    total += 0.5 * a.stiffness * r.squaredNorm();
    if (grad) grad->segment<3>(3 * a.vertex) += a.stiffness * r;
  }
  if (!std::isfinite(total)) throw NumericError("energy: non-finite value");
  return total;
}

double EnergyModel::energy(const Eigen::VectorXd& x, double t) const { return accumulate(x, t, nullptr); }

double EnergyModel::energy_and_gradient(const Eigen::VectorXd& x, double t, Eigen::VectorXd& grad) const {
  return accumulate(x, t, &grad);
}

Eigen::VectorXd EnergyModel::gradient(const Eigen::VectorXd& x, double t) const {
  Eigen::VectorXd g;
  accumulate(x, t, &g);
  return g;
}

Eigen::SparseMatrix<double> EnergyModel::hessian(const Eigen::VectorXd& x, double t) const {
  check_input(x);
  std::vector<Eigen::Triplet<double>> trip;
  const double mu = material_.lame_mu();
  if (mesh_.kind == MeshKind::solid) {
    trip.reserve(static_cast<size_t>(mesh_.num_elements()) * 144);
    const double lambda = material_.lame_lambda();
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto idx = row4(mesh_.elements, e);
      const auto k = StvkElement<3>::hessian(gather<4>(x, idx.data()), rest_.tet_dm_inv[e], rest_.tet_volume[e], mu,
                                             lambda);
      push_block<4>(trip, idx.data(), k);
    }
  } else {
    trip.reserve(static_cast<size_t>(mesh_.num_elements()) * 81 + rest_.hinges.size() * 144);
    const double lambda = material_.membrane_lambda();
    for (int e = 0; e < mesh_.num_elements(); ++e) {
      const auto idx = row3(mesh_.elements, e);
      const auto k = StvkElement<2>::hessian(gather<3>(x, idx.data()), rest_.tri_dm_inv[e],
                                             rest_.tri_area[e] * material_.thickness, mu, lambda);
      push_block<3>(trip, idx.data(), k);
    }
    const double kb = material_.hinge_stiffness();
    for (const auto& h : rest_.hinges) {
      Eigen::Matrix<double, 12, 1> xs;
      for (int k = 0; k < 4; ++k) xs.segment<3>(3 * k) = x.segment<3>(3 * h.v[k]);
      const Eigen::Vector3d x0 = xs.segment<3>(0), x1 = xs.segment<3>(3), x2 = xs.segment<3>(6), x3 = xs.segment<3>(9);
      const double d = dihedral_angle(x0, x1, x2, x3) - h.rest_angle;
      const Eigen::Matrix<double, 12, 1> g = dihedral_gradient<double>(x0, x1, x2, x3);
      Eigen::Matrix<double, 12, 12> k = g * g.transpose();
      if (d != 0.0) k += d * dihedral_hessian(xs);
      k = (2.0 * kb * h.weight) * k;
      const Eigen::Matrix<double, 12, 12> sym = 0.5 * (k + k.transpose());
      push_block<4>(trip, h.v.data(), sym);
    }
  }
  for (const auto& a : attachments_)
    for (int i = 0; i < 3; ++i) trip.emplace_back(3 * a.vertex + i, 3 * a.vertex + i, a.stiffness);

  Eigen::SparseMatrix<double> hess(x.size(), x.size());
  hess.setFromTriplets(trip.begin(), trip.end());
  return hess;
}

ElementStress EnergyModel::element_stress(const Eigen::VectorXd& x) const {
  check_input(x);
  ElementStress out;
  out.frobenius.resize(mesh_.num_elements());
  out.weights.resize(mesh_.num_elements());
  const double mu = material_.lame_mu();
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    if (mesh_.kind == MeshKind::solid) {
      using K = StvkElement<3>;
      const auto idx = row4(mesh_.elements, e);
      const auto f = K::deformation(gather<4>(x, idx.data()), rest_.tet_dm_inv[e]);
      out.frobenius[e] = K::pk2(K::green(f), mu, material_.lame_lambda()).norm();
      out.weights[e] = rest_.tet_volume[e];
    } else {
      using K = StvkElement<2>;
      const auto idx = row3(mesh_.elements, e);
      const auto f = K::deformation(gather<3>(x, idx.data()), rest_.tri_dm_inv[e]);
      out.frobenius[e] = K::pk2(K::green(f), mu, material_.membrane_lambda()).norm();
      out.weights[e] = rest_.tri_area[e];
    }
  }
  return out;
}

int EnergyModel::count_inverted(const Eigen::VectorXd& x) const {
  check_input(x);
  if (mesh_.kind != MeshKind::solid) return 0;
  int count = 0;
  for (int e = 0; e < mesh_.num_elements(); ++e) {
    const auto idx = row4(mesh_.elements, e);
    const auto xs = gather<4>(x, idx.data());
    Eigen::Matrix3d ds;
    for (int k = 0; k < 3; ++k) ds.col(k) = xs.col(k + 1) - xs.col(0);
    if (ds.determinant() <= 0.0) ++count;
  }
  return count;
}

}  // namespace nmodes
