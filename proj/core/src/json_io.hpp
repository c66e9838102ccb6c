#pragma once

// JSON conversions shared by the checkpoint and config readers.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "neuralmodes/domain.hpp"
#include "neuralmodes/errors.hpp"
#include "neuralmodes/lbfgs.hpp"
#include "neuralmodes/mesh.hpp"
#include "neuralmodes/training.hpp"

namespace nmodes::jsonio {

using json = nlohmann::json;

inline json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Eigen::VectorXd vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Column-major flat data with explicit shape.
inline json mat(const Eigen::MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXd mat(const json& j) {
  const long rows = j.at("rows"), cols = j.at("cols");
  const auto d = j.at("data").get<std::vector<double>>();
  if (static_cast<long>(d.size()) != rows * cols) throw InputError("matrix data does not match its shape");
  return Eigen::Map<const Eigen::MatrixXd>(d.data(), rows, cols);
}

inline json imat(const Eigen::MatrixXi& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<int>(m.data(), m.data() + m.size())}};
}

inline Eigen::MatrixXi imat(const json& j) {
  const long rows = j.at("rows"), cols = j.at("cols");
  const auto d = j.at("data").get<std::vector<int>>();
  if (static_cast<long>(d.size()) != rows * cols) throw InputError("matrix data does not match its shape");
  return Eigen::Map<const Eigen::MatrixXi>(d.data(), rows, cols);
}

// NaN is not representable in JSON; it travels as null.
inline json real(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
inline double real(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

inline json material(const MaterialParams& m) {
  return {{"young_modulus", m.young_modulus},
          {"poisson_ratio", m.poisson_ratio},
          {"density", m.density},
          {"thickness", m.thickness},
          {"bending_stiffness", m.bending_stiffness}};
}

inline MaterialParams material(const json& j, MaterialParams m = {}) {
  m.young_modulus = j.value("young_modulus", m.young_modulus);
  m.poisson_ratio = j.value("poisson_ratio", m.poisson_ratio);
  m.density = j.value("density", m.density);
  m.thickness = j.value("thickness", m.thickness);
  m.bending_stiffness = j.value("bending_stiffness", m.bending_stiffness);
  return m;
}

inline json box(const DomainBox& b) { return {{"lo", vec(b.lo)}, {"hi", vec(b.hi)}}; }
inline DomainBox box(const json& j) {
  DomainBox b;
  b.lo = vec(j.at("lo"));
  b.hi = vec(j.at("hi"));
  return b;
}

inline json aux(const AuxSpec& a) {
  return {{"name", a.name}, {"lo", a.lo},         {"hi", a.hi},
          {"reference", a.reference}, {"nx", a.nx}, {"ny", a.ny}, {"side_length", a.side_length}};
}

inline AuxSpec aux(const json& j) {
  AuxSpec a;
  a.name = j.value("name", a.name);
  a.lo = j.value("lo", a.lo);
  a.hi = j.value("hi", a.hi);
  a.reference = j.value("reference", a.hi);
  a.nx = j.value("nx", a.nx);
  a.ny = j.value("ny", a.ny);
  a.side_length = j.value("side_length", a.side_length);
  return a;
}

inline json lbfgs(const LbfgsOptions& o) {
  return {{"history", o.history},   {"gradient_tolerance", o.gradient_tolerance},
          {"max_iterations", o.max_iterations}, {"c1", o.c1}, {"c2", o.c2},
          {"max_line_search", o.max_line_search}};
}

inline LbfgsOptions lbfgs(const json& j, LbfgsOptions o) {
  o.history = j.value("history", o.history);
  o.gradient_tolerance = j.value("gradient_tolerance", o.gradient_tolerance);
  o.max_iterations = j.value("max_iterations", o.max_iterations);
  o.c1 = j.value("c1", o.c1);
  o.c2 = j.value("c2", o.c2);
  o.max_line_search = j.value("max_line_search", o.max_line_search);
  return o;
}

inline json train(const TrainConfig& c) {
  return {{"lambda", c.weights.lambda},
          {"eta", c.weights.eta},
          {"sampling", to_string(c.sampling)},
          {"grid_resolution", c.grid_resolution},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"optimizer", lbfgs(c.optimizer)},
          {"seed", c.seed},
          {"early_stop", to_string(c.early_stop)},
          {"patience", c.patience},
          {"eval_every", c.eval_every},
          {"hidden", c.hidden},
          {"init_seed", c.init_seed}};
}

inline TrainConfig train(const json& j, TrainConfig c = {}) {
  c.weights.lambda = j.value("lambda", c.weights.lambda);
  c.weights.eta = j.value("eta", c.weights.eta);
  if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling"));
  c.grid_resolution = j.value("grid_resolution", c.grid_resolution);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  if (j.contains("optimizer")) c.optimizer = lbfgs(j.at("optimizer"), c.optimizer);
  c.seed = j.value("seed", c.seed);
  if (j.contains("early_stop")) c.early_stop = parse_early_stop(j.at("early_stop"));
  c.patience = j.value("patience", c.patience);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<int>>();
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

template <class F>
auto guarded(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw InputError(what + ": " + e.what());
  }
}

}  // namespace nmodes::jsonio
