#pragma once

// Finite-difference oracles and small fixtures shared by the tests.

#include <functional>
#include <random>

#include <Eigen/Core>

#include "neuralmodes/energy.hpp"
#include "neuralmodes/mesh.hpp"

namespace nmodes::testing {

inline Eigen::VectorXd central_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                        const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd p = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    p[i] = x[i] + h;
    const double fp = f(p);
    p[i] = x[i] - h;
    const double fm = f(p);
    p[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b|_inf, floor)
inline double max_rel_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-300) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

/// Moderately deformed state: rest shape plus noise and a smooth bend.
inline Eigen::VectorXd random_state(const Mesh& mesh, uint64_t seed, double amplitude = 0.02) {
  std::mt19937_64 rng(seed);
  Eigen::VectorXd x = mesh.rest_positions + random_vector(mesh.num_dofs(), rng, amplitude * mesh.scale());
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    const Eigen::Vector3d p = mesh.vertex(v);
    x[3 * v + 2] += 0.1 * amplitude * 10.0 * p.x() * p.x();
  }
  return x;
}

inline MaterialParams soft_material() {
  MaterialParams m;
  m.young_modulus = 1e4;
  m.poisson_ratio = 0.3;
  m.density = 100.0;
  m.thickness = 0.01;
  return m;
}

}  // namespace nmodes::testing
