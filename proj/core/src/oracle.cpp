#include "neuralmodes/oracle.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include <json.hpp>

#include "neuralmodes/errors.hpp"
#include "neuralmodes/hash.hpp"

namespace nmodes {

using json = nlohmann::json;

Eigen::VectorXd project_out(const Eigen::MatrixXd& modes, const Eigen::VectorXd& v) {
  return v - modes * (modes.transpose() * v);
}

namespace {

OracleSample solve_from(const EnergyModel& energy, const Eigen::MatrixXd& modes, const Eigen::VectorXd& l,
                        const Eigen::VectorXd& v0, double tol, const OracleOptions& options) {
  const Eigen::VectorXd& rest = energy.rest_positions();
  Eigen::VectorXd grad(rest.size());
  const Objective f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
    const Eigen::VectorXd x = rest + l + project_out(modes, v);
    const double e = energy.energy_and_gradient(x, 0.0, grad);
    g = project_out(modes, grad);
    return e;
  };
  LbfgsOptions lo;
  lo.history = options.history;
  lo.gradient_tolerance = tol;
  lo.max_iterations = options.max_iterations;
  const LbfgsResult r = lbfgs_minimize(f, v0, lo);

  OracleSample s;
  s.x_star = rest + l + project_out(modes, r.x);
  s.e_star = energy.energy_and_gradient(s.x_star, 0.0, grad);
  s.gradient_norm = project_out(modes, grad).norm();
  s.tolerance = tol;
  s.converged = s.gradient_norm <= tol;
  s.iterations = r.iterations;
  return s;
}

}  // namespace

OracleSample oracle_solve(const EnergyModel& energy, const Eigen::MatrixXd& modes, const Eigen::VectorXd& z,
                          const Eigen::VectorXd& aux, const OracleOptions& options,
                          const Eigen::VectorXd* warm_start) {
  if (modes.rows() != energy.num_dofs()) throw InputError("oracle: basis does not match the energy model");
  if (z.size() != modes.cols())
    throw InputError("oracle: z has length " + std::to_string(z.size()) + ", basis has " +
                     std::to_string(modes.cols()) + " modes");
  if (!z.allFinite()) throw InputError("oracle: non-finite z");

  const Eigen::VectorXd l = modes * z;
  Eigen::VectorXd grad;
  const double e_linear = energy.energy_and_gradient(energy.rest_positions() + l, 0.0, grad);
  const double tol = options.relative_tolerance * std::max(1.0, grad.norm());

  const Eigen::VectorXd cold = Eigen::VectorXd::Zero(energy.num_dofs());
  OracleSample s;
  if (warm_start && warm_start->size() == energy.num_dofs()) {
    s = solve_from(energy, modes, l, project_out(modes, *warm_start), tol, options);
    // A warm start may land in a different basin; the linear start is the
    // reference, so fall back to it when the warm result is worse.
    if (!s.converged || s.e_star > e_linear) {
      const int spent = s.iterations;
      s = solve_from(energy, modes, l, cold, tol, options);
      s.iterations += spent;
    }
  } else {
    s = solve_from(energy, modes, l, cold, tol, options);
  }
  s.z = z;
  s.aux = aux;
  return s;
}

DatasetSpec DatasetSpec::make_grid(int resolution) {
  DatasetSpec s;
  s.kind = Kind::grid;
  s.resolution = resolution;
  return s;
}

DatasetSpec DatasetSpec::make_random(int count, uint64_t seed) {
  DatasetSpec s;
  s.kind = Kind::random;
  s.count = count;
  s.seed = seed;
  return s;
}

std::string DatasetSpec::describe() const {
  return kind == Kind::grid ? "grid(" + std::to_string(resolution) + ")"
                            : "random(" + std::to_string(count) + ", seed=" + std::to_string(seed) + ")";
}

void DatasetSpec::validate() const {
  if (kind == Kind::grid && resolution < 2) throw InputError("dataset spec: grid resolution must be >= 2");
  if (kind == Kind::random && count < 1) throw InputError("dataset spec: random count must be >= 1");
}

int OracleDataset::num_unconverged() const {
  int n = 0;
  for (const auto& s : samples) n += !s.converged;
  return n;
}

OracleDataset OracleDataset::slice(int begin, int end) const {
  if (begin < 0 || end > size() || begin > end) throw InputError("dataset slice out of range");
  OracleDataset out;
  out.manifest = manifest;
  out.samples.assign(samples.begin() + begin, samples.begin() + end);
  out.manifest.num_samples = out.size();
  out.manifest.num_converged = out.size() - out.num_unconverged();
  out.manifest.max_gradient_norm = 0.0;
  out.manifest.total_iterations = 0;
  for (const auto& s : out.samples) {
    out.manifest.max_gradient_norm = std::max(out.manifest.max_gradient_norm, s.gradient_norm);
    out.manifest.total_iterations += s.iterations;
  }
  return out;
}

std::string basis_hash(const Eigen::MatrixXd& modes) { return Fnv1a().array(modes).hex(); }

std::string OracleDataset::hash() const {
  Fnv1a h;
  h.text(manifest.spec.describe()).text(manifest.family_fingerprint).text(manifest.basis_hash);
  h.array(manifest.box.lo).array(manifest.box.hi);
  for (const auto& s : samples) {
    h.array(s.z).array(s.aux).array(s.x_star).real(s.e_star).integer(s.converged);
  }
  return h.hex();
}

OracleDataset generate_oracle_dataset(const EnergyFamily& family, const Eigen::MatrixXd& modes,
                                      const DatasetSpec& spec, const DomainBox& box, const OracleOptions& options) {
  spec.validate();
  box.validate();
  const int m = static_cast<int>(modes.cols());
  if (box.dim() != m + family.aux_dim())
    throw InputError("oracle dataset: box has " + std::to_string(box.dim()) + " axes, expected " +
                     std::to_string(m + family.aux_dim()));
  const auto t0 = std::chrono::steady_clock::now();

  Eigen::MatrixXd points;
  int run = 1;
  if (spec.kind == DatasetSpec::Kind::grid) {
    points = box.grid(spec.resolution);
    run = spec.resolution;
  } else {
    std::mt19937_64 rng(spec.seed);
    points = box.uniform(spec.count, rng);
  }
  const int total = static_cast<int>(points.cols());
  const int runs = total / run;

  OracleDataset data;
  data.samples.resize(total);
#pragma omp parallel for schedule(dynamic)
  for (int r = 0; r < runs; ++r) {
    Eigen::VectorXd warm;
    for (int k = 0; k < run; ++k) {
      const int c = r * run + k;
      const Eigen::VectorXd z = points.col(c).head(m);
      const Eigen::VectorXd aux = points.col(c).tail(family.aux_dim());
      const EnergyModelPtr model = family.at(aux);
      OracleSample s = oracle_solve(*model, modes, z, aux, options, warm.size() ? &warm : nullptr);
      warm = s.x_star - model->rest_positions();
      data.samples[c] = std::move(s);
    }
  }

  auto& mf = data.manifest;
  mf.spec = spec;
  mf.options = options;
  mf.box = box;
  mf.family_fingerprint = family.fingerprint();
  mf.basis_hash = basis_hash(modes);
  mf.num_samples = total;
  mf.num_converged = total - data.num_unconverged();
  for (const auto& s : data.samples) {
    mf.max_gradient_norm = std::max(mf.max_gradient_norm, s.gradient_norm);
    mf.total_iterations += s.iterations;
  }
  mf.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (data.num_unconverged() * 100 > total)
    throw NumericError("oracle dataset: " + std::to_string(data.num_unconverged()) + " of " + std::to_string(total) +
                       " samples did not converge");
  return data;
}

std::vector<OracleDataset> split_dataset(const OracleDataset& data, const std::vector<int>& sizes) {
  long sum = 0;
  for (int s : sizes) {
    if (s < 0) throw InputError("split sizes must be non-negative");
    sum += s;
  }
  if (sum != data.size())
    throw InputError("split sizes sum to " + std::to_string(sum) + " but the dataset has " +
                     std::to_string(data.size()) + " samples");
  std::vector<OracleDataset> out;
  int begin = 0;
  for (int s : sizes) {
    out.push_back(data.slice(begin, begin + s));
    begin += s;
  }
  return out;
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

void save_dataset(const OracleDataset& data, const std::string& path) {
  const auto& mf = data.manifest;
  json j;
  j["format"] = "neuralmodes.dataset";
  j["version"] = mf.version;
  json spec;
  spec["kind"] = mf.spec.kind == DatasetSpec::Kind::grid ? "grid" : "random";
  spec["resolution"] = mf.spec.resolution;
  spec["count"] = mf.spec.count;
  spec["seed"] = mf.spec.seed;
  json manifest;
  manifest["spec"] = spec;
  manifest["relative_tolerance"] = mf.options.relative_tolerance;
  manifest["max_iterations"] = mf.options.max_iterations;
  manifest["history"] = mf.options.history;
  manifest["box_lo"] = vec_json(mf.box.lo);
  manifest["box_hi"] = vec_json(mf.box.hi);
  manifest["family_fingerprint"] = mf.family_fingerprint;
  manifest["basis_hash"] = mf.basis_hash;
  manifest["num_samples"] = mf.num_samples;
  manifest["num_converged"] = mf.num_converged;
  manifest["max_gradient_norm"] = mf.max_gradient_norm;
  manifest["total_iterations"] = mf.total_iterations;
  manifest["wall_seconds"] = mf.wall_seconds;
  j["manifest"] = manifest;
  json samples = json::array();
  for (const auto& s : data.samples) {
    samples.push_back({{"z", vec_json(s.z)},
                       {"aux", vec_json(s.aux)},
                       {"x_star", vec_json(s.x_star)},
                       {"e_star", s.e_star},
                       {"converged", s.converged},
                       {"gradient_norm", s.gradient_norm},
                       {"tolerance", s.tolerance},
                       {"iterations", s.iterations}});
  }
  j["samples"] = std::move(samples);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset file " + path);
  out << j.dump();
  if (!out) throw InputError("failed writing dataset file " + path);
}

OracleDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("dataset file " + path + ": " + e.what());
  }
  if (j.value("format", "") != "neuralmodes.dataset") throw InputError(path + " is not a dataset file");
  if (j.value("version", 0) != 1) throw InputError(path + ": unsupported dataset version");
  try {
    OracleDataset data;
    auto& mf = data.manifest;
    const json& m = j.at("manifest");
    const json& spec = m.at("spec");
    mf.spec.kind = spec.at("kind") == "grid" ? DatasetSpec::Kind::grid : DatasetSpec::Kind::random;
    mf.spec.resolution = spec.at("resolution");
    mf.spec.count = spec.at("count");
    mf.spec.seed = spec.at("seed");
    mf.options.relative_tolerance = m.at("relative_tolerance");
    mf.options.max_iterations = m.at("max_iterations");
    mf.options.history = m.at("history");
    mf.box.lo = json_vec(m.at("box_lo"));
    mf.box.hi = json_vec(m.at("box_hi"));
    mf.family_fingerprint = m.at("family_fingerprint");
    mf.basis_hash = m.at("basis_hash");
    mf.num_samples = m.at("num_samples");
    mf.num_converged = m.at("num_converged");
    mf.max_gradient_norm = m.at("max_gradient_norm");
    mf.total_iterations = m.at("total_iterations");
    mf.wall_seconds = m.at("wall_seconds");
    for (const auto& s : j.at("samples")) {
      OracleSample o;
      o.z = json_vec(s.at("z"));
      o.aux = json_vec(s.at("aux"));
      o.x_star = json_vec(s.at("x_star"));
      o.e_star = s.at("e_star");
      o.converged = s.at("converged");
      o.gradient_norm = s.at("gradient_norm");
      o.tolerance = s.at("tolerance");
      o.iterations = s.at("iterations");
      data.samples.push_back(std::move(o));
    }
    if (data.size() != mf.num_samples) throw InputError(path + ": sample count disagrees with manifest");
    return data;
  } catch (const json::exception& e) {
    throw InputError("dataset file " + path + ": " + e.what());
  }
}

void export_dataset_csv(const OracleDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  const int m = data.samples.empty() ? 0 : static_cast<int>(data.samples[0].z.size());
  const int a = data.samples.empty() ? 0 : static_cast<int>(data.samples[0].aux.size());
  out << "index";
  for (int i = 0; i < m; ++i) out << ",z" << i;
  for (int i = 0; i < a; ++i) out << ",aux" << i;
  out << ",e_star,converged,gradient_norm\n";
  out << std::setprecision(17);
  for (int k = 0; k < data.size(); ++k) {
    const auto& s = data.samples[k];
    out << k;
    for (int i = 0; i < m; ++i) out << ',' << s.z[i];
    for (int i = 0; i < a; ++i) out << ',' << s.aux[i];
    out << ',' << s.e_star << ',' << (s.converged ? 1 : 0) << ',' << s.gradient_norm << '\n';
  }
}

}  // namespace nmodes
