#include "neuralmodes/dynamics.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <Eigen/Geometry>

#include "neuralmodes/errors.hpp"

namespace nmodes {

namespace {

Eigen::Matrix3d cross_matrix(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

using Rigid = Eigen::Matrix<double, 6, 1>;

}  // namespace

void DynamicsOptions::validate() const {
  if (!(h > 0.0)) throw InputError("dynamics: step size must be positive");
  if (max_iterations < 1) throw InputError("dynamics: max_iterations must be >= 1");
  if (!(relative_tolerance >= 0.0)) throw InputError("dynamics: tolerance must be >= 0");
}

Eigen::Matrix3d axis_angle_matrix(const Eigen::Vector3d& w) {
  const double theta = w.norm();
  if (theta == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(theta, w / theta).toRotationMatrix();
}

// dR/dw_k = (w_k [w]_x + [w x (I - R) e_k]_x) R / |w|^2, with dR/dw_k = [e_k]_x at w = 0.
std::array<Eigen::Matrix3d, 3> axis_angle_derivatives(const Eigen::Vector3d& w) {
  std::array<Eigen::Matrix3d, 3> d;
  const double sq = w.squaredNorm();
  if (sq < 1e-24) {
    for (int k = 0; k < 3; ++k) d[k] = cross_matrix(Eigen::Vector3d::Unit(k));
    return d;
  }
  const Eigen::Matrix3d r = axis_angle_matrix(w);
  const Eigen::Matrix3d wx = cross_matrix(w);
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector3d ek = Eigen::Vector3d::Unit(k);
    d[k] = (w[k] * wx + cross_matrix(w.cross((Eigen::Matrix3d::Identity() - r) * ek))) * r / sq;
  }
  return d;
}

SubspaceDynamics::SubspaceDynamics(const SubspaceModel& model, EnergyModelPtr energy, DynamicsOptions options,
                                   Eigen::VectorXd aux)
    : model_(model), energy_(std::move(energy)), options_(options), aux_(std::move(aux)) {
  options_.validate();
  if (!energy_) throw InputError("dynamics: null energy model");
  if (energy_->num_dofs() != model_.num_dofs()) throw InputError("dynamics: model and energy model sizes differ");
  if (aux_.size() != model_.aux_dim()) throw InputError("dynamics: aux has wrong length");
  if (model_.aux_dim() == 0 && energy_->fingerprint() != model_.mesh_fingerprint)
    throw InputError("dynamics: model was built for a different mesh or material");
  if (options_.linear_baseline) model_.mlp.theta.setZero();
  const Eigen::VectorXd& mass = energy_->rest().lumped_mass;
  center_.setZero();
  for (int v = 0; v < energy_->mesh().num_vertices(); ++v) center_ += mass[v] * energy_->mesh().vertex(v);
  center_ /= mass.sum();
  tolerance_ = options_.relative_tolerance * energy_->total_mass() / (options_.h * options_.h);
}

Eigen::VectorXd SubspaceDynamics::displacement(const Eigen::VectorXd& z, const Rigid& rigid) const {
  Eigen::VectorXd d = model_.displacement(z, aux_);
  if (!options_.rigid) return d;
  const Eigen::Matrix3d r = axis_angle_matrix(rigid.head<3>());
  const Eigen::Vector3d t = rigid.tail<3>();
  const Eigen::VectorXd& rest = energy_->rest_positions();
  for (int v = 0; v < energy_->mesh().num_vertices(); ++v) {
    const Eigen::Vector3d p = rest.segment<3>(3 * v) + d.segment<3>(3 * v);
    // x = c + R (p - c) + t, written so R = I, t = 0 reproduces p exactly.
    d.segment<3>(3 * v) += (r - Eigen::Matrix3d::Identity()) * (p - center_) + t;
  }
  return d;
}

DynamicsState SubspaceDynamics::initial_state(const Eigen::VectorXd& z, const Rigid& rigid) const {
  if (z.size() != model_.m()) throw InputError("dynamics: z has wrong length");
  DynamicsState s;
  s.z = z;
  s.rigid = options_.rigid ? rigid : Rigid::Zero();
  s.u = displacement(z, s.rigid);
  s.u_prev = s.u;
  return s;
}

double SubspaceDynamics::step_objective(const DynamicsState& s, const Eigen::VectorXd& q, Eigen::VectorXd* grad) const {
  const int m = model_.m();
  const Eigen::VectorXd z = q.head(m);
  const Rigid rigid = options_.rigid ? Rigid(q.tail<6>()) : Rigid::Zero();
  const Eigen::VectorXd u = displacement(z, rigid);
  const double h2 = options_.h * options_.h;
  const Eigen::VectorXd a = u - 2.0 * s.u + s.u_prev;
  const Eigen::VectorXd& mass = energy_->dof_mass();
  const double inertia = 0.5 * a.dot(mass.cwiseProduct(a)) / h2;
  const Eigen::VectorXd x = energy_->rest_positions() + u;
  Eigen::VectorXd ge;
  const double e = energy_->energy_and_gradient(x, s.t + options_.h, ge);
  if (grad) {
    const Eigen::VectorXd r = mass.cwiseProduct(a) / h2 + ge;  // d/dx of the objective
    grad->resize(num_reduced());
    if (!options_.rigid) {
      grad->head(m) = model_.displacement_vjp(z, aux_, r);
    } else {
      const Eigen::Matrix3d rot = axis_angle_matrix(rigid.head<3>());
      const auto drot = axis_angle_derivatives(rigid.head<3>());
      const Eigen::VectorXd d = model_.displacement(z, aux_);
      Eigen::VectorXd rp(r.size());
      Eigen::Vector3d gw = Eigen::Vector3d::Zero(), gt = Eigen::Vector3d::Zero();
      for (int v = 0; v < energy_->mesh().num_vertices(); ++v) {
        const Eigen::Vector3d rv = r.segment<3>(3 * v);
        const Eigen::Vector3d p = energy_->rest_positions().segment<3>(3 * v) + d.segment<3>(3 * v) - center_;
        rp.segment<3>(3 * v) = rot.transpose() * rv;
        gt += rv;
        for (int k = 0; k < 3; ++k) gw[k] += rv.dot(drot[k] * p);
      }
      grad->head(m) = model_.displacement_vjp(z, aux_, rp);
      grad->segment<3>(m) = gw;
      grad->segment<3>(m + 3) = gt;
    }
  }
  return inertia + e;
}

DynamicsState SubspaceDynamics::step(const DynamicsState& s) const {
  const int m = model_.m();
  Eigen::VectorXd q0(num_reduced());
  q0.head(m) = s.z;
  if (options_.rigid) q0.tail<6>() = s.rigid;
  LbfgsOptions lo;
  lo.gradient_tolerance = tolerance_;
  lo.max_iterations = options_.max_iterations;
  const Objective f = [&](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    try {
      return step_objective(s, q, &g);
    } catch (const NumericError&) {
      g.setZero(q.size());
      return std::numeric_limits<double>::infinity();
    }
  };
  const LbfgsResult r = lbfgs_minimize(f, q0, lo);
  DynamicsState out;
  out.z = r.x.head(m);
  out.rigid = options_.rigid ? Rigid(r.x.tail<6>()) : Rigid::Zero();
  out.u = displacement(out.z, out.rigid);
  out.u_prev = s.u;
  out.t = s.t + options_.h;
  out.iterations = r.iterations;
  out.converged = r.converged;
  out.gradient_norm = r.gradient_norm;
  return out;
}

double SubspaceDynamics::total_energy(const DynamicsState& s) const {
  const Eigen::VectorXd v = (s.u - s.u_prev) / options_.h;
  return 0.5 * v.dot(energy_->dof_mass().cwiseProduct(v)) + energy_->energy(energy_->rest_positions() + s.u, s.t);
}

double Trajectory::mean_step_ms() const {
  if (frames.size() < 2) return 0.0;
  double s = 0.0;
  for (size_t k = 1; k < frames.size(); ++k) s += frames[k].wall_ms;
  return s / (frames.size() - 1);
}

double Trajectory::max_step_ms() const {
  double s = 0.0;
  for (size_t k = 1; k < frames.size(); ++k) s = std::max(s, frames[k].wall_ms);
  return s;
}

std::string Trajectory::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  const int m = frames.empty() ? 0 : static_cast<int>(frames[0].z.size());
  out << "t";
  for (int i = 0; i < m; ++i) out << ",z" << i;
  out << ",rx,ry,rz,tx,ty,tz,wall_ms,iterations,converged,elastic_energy,total_energy,error\n";
  for (const auto& f : frames) {
    out << f.t;
    for (int i = 0; i < m; ++i) out << ',' << f.z[i];
    for (int i = 0; i < 6; ++i) out << ',' << f.rigid[i];
    out << ',' << f.wall_ms << ',' << f.iterations << ',' << (f.converged ? 1 : 0) << ',' << f.elastic_energy << ','
        << f.total_energy << ',' << '"' << f.error << '"' << '\n';
  }
  return out.str();
}

namespace {
constexpr char kFrameMagic[8] = {'N', 'M', 'F', 'R', 'A', 'M', 'E', 'S'};
}

void Trajectory::write_frames(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write frame file " + path);
  const uint32_t version = 1;
  const uint32_t verts = positions.empty() ? 0 : static_cast<uint32_t>(positions[0].size() / 3);
  const uint32_t count = static_cast<uint32_t>(positions.size());
  out.write(kFrameMagic, 8);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&verts), 4);
  out.write(reinterpret_cast<const char*>(&count), 4);
  for (size_t k = 0; k < positions.size(); ++k) {
    const double t = k < frames.size() ? frames[k].t : 0.0;
    out.write(reinterpret_cast<const char*>(&t), 8);
    out.write(reinterpret_cast<const char*>(positions[k].data()), 8 * positions[k].size());
  }
  if (!out) throw InputError("failed writing frame file " + path);
}

Trajectory read_frames(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open frame file " + path);
  char magic[8];
  uint32_t version = 0, verts = 0, count = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&verts), 4);
  in.read(reinterpret_cast<char*>(&count), 4);
  if (!in || std::memcmp(magic, kFrameMagic, 8) != 0 || version != 1) throw InputError(path + " is not a frame file");
  Trajectory tr;
  for (uint32_t k = 0; k < count; ++k) {
    TrajectoryFrame f;
    Eigen::VectorXd x(3 * verts);
    in.read(reinterpret_cast<char*>(&f.t), 8);
    in.read(reinterpret_cast<char*>(x.data()), 8 * x.size());
    if (!in) throw InputError(path + ": truncated frame file");
    tr.frames.push_back(f);
    tr.positions.push_back(std::move(x));
  }
  return tr;
}

Trajectory simulate(const SubspaceDynamics& dyn, const DynamicsState& initial, int steps) {
  if (steps < 0) throw InputError("simulate: steps must be >= 0");
  Trajectory tr;
  const Eigen::VectorXd& rest = dyn.energy().rest_positions();
  auto record = [&](const DynamicsState& s, double ms, const std::string& err) {
    TrajectoryFrame f;
    f.t = s.t;
    f.z = s.z;
    f.rigid = s.rigid;
    f.wall_ms = ms;
    f.iterations = s.iterations;
    f.converged = s.converged;
    f.elastic_energy = dyn.energy().energy(rest + s.u, s.t);
    f.total_energy = dyn.total_energy(s);
    f.error = err;
    tr.frames.push_back(std::move(f));
    tr.positions.push_back(rest + s.u);
  };
  DynamicsState s = initial;
  record(s, 0.0, "");
  for (int k = 0; k < steps; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string err;
    try {
      s = dyn.step(s);
    } catch (const std::exception& e) {
      // Hold the configuration and advance time so the log stays aligned.
      err = e.what();
      s.u_prev = s.u;
      s.t += dyn.options().h;
      s.converged = false;
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    record(s, ms, err);
  }
  return tr;
}

void validate_keyframes(const std::vector<Keyframe>& keys) {
  if (keys.empty()) throw InputError("keyframes: need at least one key");
  for (size_t k = 0; k < keys.size(); ++k) {
    if (!std::isfinite(keys[k].t)) throw InputError("keyframes: non-finite time");
    if (keys[k].z.size() != keys[0].z.size()) throw InputError("keyframes: keys differ in dimension");
    if (k > 0 && !(keys[k].t > keys[k - 1].t))
      throw InputError(keys[k].t == keys[k - 1].t ? "keyframes: duplicate time " + std::to_string(keys[k].t)
                                                  : "keyframes: times are not sorted");
  }
}

Eigen::VectorXd interpolate_keyframes(const std::vector<Keyframe>& keys, double t) {
  validate_keyframes(keys);
  if (t <= keys.front().t) return keys.front().z;
  if (t >= keys.back().t) return keys.back().z;
  size_t k = 1;
  while (keys[k].t < t) ++k;
  if (keys[k].t == t) return keys[k].z;
  const double a = (t - keys[k - 1].t) / (keys[k].t - keys[k - 1].t);
  return (1.0 - a) * keys[k - 1].z + a * keys[k].z;
}

}  // namespace nmodes
