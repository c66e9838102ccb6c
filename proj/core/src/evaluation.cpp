#include "neuralmodes/evaluation.hpp"

#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

#include "neuralmodes/errors.hpp"

namespace nmodes {

using json = nlohmann::json;

Predictor model_predictor(const SubspaceModel& model, const EnergyFamily& family) {
  return [&model, &family](const OracleSample& s) { return model.decode(*family.at(s.aux), s.z, s.aux); };
}

Predictor oracle_predictor() {
  return [](const OracleSample& s) { return s.x_star; };
}

namespace {

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / v.size();
}

double max_of(const std::vector<double>& v) {
  double m = v.empty() ? 0.0 : v[0];
  for (double x : v) m = std::max(m, x);
  return m;
}

void check_sizes(const std::vector<const OracleSample*>& samples, const std::vector<Eigen::VectorXd>& pred) {
  if (samples.size() != pred.size()) throw InputError("metrics: prediction count differs from sample count");
}

}  // namespace

EnergyBlock energy_metrics(const EnergyFamily& family, const std::vector<const OracleSample*>& samples,
                           const std::vector<Eigen::VectorXd>& pred) {
  check_sizes(samples, pred);
  const int n = static_cast<int>(samples.size());
  std::vector<double> de(n), e(n), es(n);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    e[k] = family.at(samples[k]->aux)->energy(pred[k]);
    es[k] = samples[k]->e_star;
    de[k] = e[k] - es[k];
  }
  EnergyBlock b;
  if (n == 0) return b;
  b.delta_avg = mean(de);
  b.delta_max = max_of(de);
  b.delta_min = de[0];
  double var = 0.0;
  for (int k = 0; k < n; ++k) {
    var += (de[k] - b.delta_avg) * (de[k] - b.delta_avg);
    b.delta_min = std::min(b.delta_min, de[k]);
    if (de[k] < -10.0 * samples[k]->tolerance) ++b.below_tolerance;
  }
  b.delta_std = std::sqrt(var / n);
  b.energy_avg = mean(e);
  b.oracle_energy_avg = mean(es);
  return b;
}

StressBlock stress_metrics(const EnergyFamily& family, const std::vector<const OracleSample*>& samples,
                           const std::vector<Eigen::VectorXd>& pred) {
  check_sizes(samples, pred);
  const int n = static_cast<int>(samples.size());
  std::vector<double> wd(n), w(n), wo(n), md(n), mx(n), mo(n);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    const EnergyModelPtr em = family.at(samples[k]->aux);
    const ElementStress p = em->element_stress(pred[k]);
    const ElementStress o = em->element_stress(samples[k]->x_star);
    ElementStress d;
    d.frobenius = (p.frobenius - o.frobenius).cwiseAbs();
    d.weights = p.weights;
    wd[k] = d.weighted_mean();
    md[k] = d.max();
    w[k] = p.weighted_mean();
    wo[k] = o.weighted_mean();
    mx[k] = p.max();
    mo[k] = o.max();
  }
  StressBlock b;
  b.weighted_delta_avg = mean(wd);
  b.weighted_delta_max = max_of(wd);
  b.weighted_avg = mean(w);
  b.weighted_oracle_avg = mean(wo);
  b.max_delta_avg = mean(md);
  b.max_delta_max = max_of(md);
  b.max_avg = mean(mx);
  b.max_oracle_avg = mean(mo);
  return b;
}

ForceBlock force_metrics(const EnergyFamily& family, const Eigen::MatrixXd& modes,
                         const std::vector<const OracleSample*>& samples, const std::vector<Eigen::VectorXd>& pred) {
  check_sizes(samples, pred);
  const int n = static_cast<int>(samples.size());
  std::vector<double> d1(n), d2(n), f1(n), f2(n), o2(n), proj(n);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    const EnergyModelPtr em = family.at(samples[k]->aux);
    const Eigen::VectorXd fp = em->gradient(pred[k]);
    const Eigen::VectorXd fo = em->gradient(samples[k]->x_star);
    d1[k] = (fp - fo).lpNorm<1>();
    d2[k] = (fp - fo).norm();
    f1[k] = fp.lpNorm<1>();
    f2[k] = fp.norm();
    o2[k] = fo.norm();
    proj[k] = project_out(modes, fo).norm();
  }
  ForceBlock b;
  b.delta_l1 = mean(d1);
  b.delta_l2 = mean(d2);
  b.force_l1 = mean(f1);
  b.force_l2 = mean(f2);
  b.oracle_force_l2 = mean(o2);
  b.oracle_projected_max = max_of(proj);
  return b;
}

SplitMetrics evaluate_split(const Predictor& predict, const EnergyFamily& family, const Eigen::MatrixXd& modes,
                            const OracleDataset& data, const std::string& name) {
  if (data.manifest.family_fingerprint != family.fingerprint())
    throw InputError("evaluation: dataset fingerprint " + data.manifest.family_fingerprint +
                     " does not match energy model " + family.fingerprint());
  SplitMetrics out;
  out.name = name;
  std::vector<const OracleSample*> used;
  for (const auto& s : data.samples) {
    if (s.converged)
      used.push_back(&s);
    else
      ++out.discarded;
  }
  out.count = static_cast<int>(used.size());
  out.valid = out.discarded * 100 <= data.size();
  std::vector<Eigen::VectorXd> pred(used.size());
  std::vector<double> l2(used.size());
  for (size_t k = 0; k < used.size(); ++k) {
    pred[k] = predict(*used[k]);
    l2[k] = (pred[k] - used[k]->x_star).squaredNorm();
  }
  out.l2 = mean(l2);
  out.energy = energy_metrics(family, used, pred);
  out.stress = stress_metrics(family, used, pred);
  out.force = force_metrics(family, modes, used, pred);
  return out;
}

SplitSummary summarize_split(const SubspaceModel& model, const EnergyFamily& family, const OracleDataset& data) {
  std::vector<const OracleSample*> used;
  for (const auto& s : data.samples)
    if (s.converged) used.push_back(&s);
  const int n = static_cast<int>(used.size());
  SplitSummary out;
  if (n == 0) return out;
  Eigen::MatrixXd zs(model.m(), n), aux(model.aux_dim(), n);
  for (int k = 0; k < n; ++k) {
    zs.col(k) = used[k]->z;
    if (model.aux_dim()) aux.col(k) = used[k]->aux;
  }
  const Eigen::MatrixXd y = mlp_forward_batch(model.mlp, model.network_inputs(zs, aux));
  const Eigen::MatrixXd l = model.basis.modes * zs;
  std::vector<double> d(n), e(n), de(n);
#pragma omp parallel for schedule(static)
  for (int k = 0; k < n; ++k) {
    const EnergyModelPtr em = family.at(used[k]->aux);
    const Eigen::VectorXd x = em->rest_positions() + l.col(k) + y.col(k);
    d[k] = (x - used[k]->x_star).squaredNorm();
    e[k] = x.allFinite() ? em->energy(x) : std::numeric_limits<double>::infinity();
    de[k] = e[k] - used[k]->e_star;
  }
  out.l2 = mean(d);
  out.energy = mean(e);
  out.delta_energy = mean(de);
  return out;
}

CorrelationResult correlation_from_eigenvalues(const Eigen::VectorXd& eigenvalues) {
  CorrelationResult r;
  r.eigenvalues = eigenvalues;
  std::sort(r.eigenvalues.data(), r.eigenvalues.data() + r.eigenvalues.size());
  for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i) r.collapsed += r.eigenvalues[i] < 0.1;
  const int dims = static_cast<int>(r.eigenvalues.size()) - r.collapsed;
  r.verdict = r.collapsed == 0 ? "no collapse" : "effectively " + std::to_string(dims) + "-dimensional";
  return r;
}

CorrelationResult correlation_from_directions(const Eigen::MatrixXd& directions) {
  const Eigen::MatrixXd c = directions.transpose() * directions;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c, Eigen::EigenvaluesOnly);
  CorrelationResult r = correlation_from_eigenvalues(es.eigenvalues());
  r.matrix = c;
  return r;
}

CorrelationResult correlation_diagnostic(const SubspaceModel& model, const Eigen::VectorXd& aux) {
  return correlation_from_directions(jacobian_at_origin(model, aux));
}

StructureReport structure_checks(const SubspaceModel& model, const EnergyFamily& family, uint64_t seed, int samples) {
  StructureReport r;
  const Eigen::VectorXd aux = model.aux_dim() ? Eigen::VectorXd::Constant(1, model.aux.reference) : Eigen::VectorXd();
  const EnergyModel& em = *family.at(aux);
  const double scale = em.mesh().scale();
  const int m = model.m();
  r.origin_residual = model.correction(Eigen::VectorXd::Zero(m), aux).norm() / scale;

  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd zs = model.box.uniform(samples, rng);

  // Try the two in-plane mirror axes; use the first one the mesh admits.
  for (int axis = 0; axis < 3 && !r.symmetry_checked; ++axis) {
    const auto perm = reflection_map(em.mesh(), axis);
    if (!perm) continue;
    const Eigen::VectorXd& rest = em.rest_positions();
    double lo = rest[axis], hi = rest[axis];
    for (int v = 0; v < em.mesh().num_vertices(); ++v) {
      lo = std::min(lo, rest[3 * v + axis]);
      hi = std::max(hi, rest[3 * v + axis]);
    }
    const double center = 0.5 * (lo + hi);
    // Action of the reflection on modal coordinates: S = E^T sigma(E).
    Eigen::MatrixXd reflected(model.num_dofs(), m);
    for (int i = 0; i < m; ++i)
      reflected.col(i) = reflect_positions(rest + model.basis.modes.col(i), *perm, axis, center) - rest;
    const Eigen::MatrixXd s = model.basis.modes.transpose() * reflected;
    double total = 0.0;
    for (int k = 0; k < samples; ++k) {
      const Eigen::VectorXd z = zs.col(k);
      const Eigen::VectorXd lhs = reflect_positions(model.decode(em, z, aux), *perm, axis, center);
      const Eigen::VectorXd rhs = model.decode(em, s * z, aux);
      total += (lhs - rhs).norm();
    }
    r.symmetry_checked = true;
    r.symmetry_axis = axis;
    r.symmetry_residual = total / samples / scale;
  }
  if (!r.symmetry_checked) r.notice = "mesh has no mirror symmetry about a coordinate plane; symmetry check skipped";

  // Second differences along random latent segments through the box.
  const int steps = 32;
  for (int k = 0; k + 1 < samples; k += 2) {
    const Eigen::VectorXd a = zs.col(k), b = zs.col(k + 1);
    const double len = (b - a).norm();
    if (len == 0.0) continue;
    const double ds = len / steps;
    Eigen::VectorXd prev = model.displacement(a, aux);
    Eigen::VectorXd cur = model.displacement(a + (b - a) / steps, aux);
    for (int j = 2; j <= steps; ++j) {
      const Eigen::VectorXd next = model.displacement(a + (b - a) * (double(j) / steps), aux);
      r.smoothness = std::max(r.smoothness, (next - 2.0 * cur + prev).norm() / (ds * ds));
      prev = std::move(cur);
      cur = next;
    }
  }
  return r;
}

double constraint_ratio(const SubspaceModel& model, const Eigen::MatrixXd& zs, const Eigen::MatrixXd& aux) {
  const Eigen::MatrixXd a = aux.rows() == model.aux_dim() && aux.cols() == zs.cols()
                                ? aux
                                : Eigen::MatrixXd::Constant(model.aux_dim(), zs.cols(), model.aux.reference);
  const Eigen::MatrixXd y = mlp_forward_batch(model.mlp, model.network_inputs(zs, a));
  const Eigen::MatrixXd l = model.basis.modes * zs;
  double total = 0.0;
  int used = 0;
  for (Eigen::Index k = 0; k < zs.cols(); ++k) {
    const double ll = l.col(k).squaredNorm(), yy = y.col(k).squaredNorm();
    if (ll == 0.0 || yy == 0.0) continue;
    const double c = l.col(k).dot(y.col(k));
    total += c * c / (ll * yy);
    ++used;
  }
  return used ? total / used : 0.0;
}

std::vector<SplitMetrics> evaluate_subintervals(const Predictor& predict, const EnergyFamily& family,
                                                const Eigen::MatrixXd& modes, const OracleDataset& data, int parts) {
  if (parts < 1) throw InputError("subintervals: need at least one part");
  std::vector<SplitMetrics> out;
  const int n = data.size();
  for (int p = 0; p < parts; ++p) {
    const int begin = static_cast<int>(long(n) * p / parts);
    const int end = static_cast<int>(long(n) * (p + 1) / parts);
    const int lo_pct = 100 * p / parts, hi_pct = 100 * (p + 1) / parts;
    out.push_back(evaluate_split(predict, family, modes, data.slice(begin, end),
                                 std::to_string(lo_pct) + "-" + std::to_string(hi_pct) + "%"));
  }
  return out;
}

namespace {

json split_json(const SplitMetrics& s) {
  return {{"name", s.name},
          {"count", s.count},
          {"discarded", s.discarded},
          {"valid", s.valid},
          {"l2", s.l2},
          {"energy",
           {{"delta_avg", s.energy.delta_avg},
            {"delta_max", s.energy.delta_max},
            {"delta_min", s.energy.delta_min},
            {"delta_std", s.energy.delta_std},
            {"energy_avg", s.energy.energy_avg},
            {"oracle_energy_avg", s.energy.oracle_energy_avg},
            {"below_tolerance", s.energy.below_tolerance}}},
          {"stress",
           {{"weighted_delta_avg", s.stress.weighted_delta_avg},
            {"weighted_delta_max", s.stress.weighted_delta_max},
            {"weighted_avg", s.stress.weighted_avg},
            {"weighted_oracle_avg", s.stress.weighted_oracle_avg},
            {"max_delta_avg", s.stress.max_delta_avg},
            {"max_delta_max", s.stress.max_delta_max},
            {"max_avg", s.stress.max_avg},
            {"max_oracle_avg", s.stress.max_oracle_avg}}},
          {"force",
           {{"delta_l1", s.force.delta_l1},
            {"delta_l2", s.force.delta_l2},
            {"force_l1", s.force.force_l1},
            {"force_l2", s.force.force_l2},
            {"oracle_force_l2", s.force.oracle_force_l2},
            {"oracle_projected_max", s.force.oracle_projected_max}}}};
}

void csv_row(std::ostringstream& out, const std::string& group, const SplitMetrics& s) {
  out << group << ',' << s.name << ',' << s.count << ',' << s.discarded << ',' << s.l2 << ',' << s.energy.delta_avg
      << ',' << s.energy.delta_max << ',' << s.energy.delta_std << ',' << s.energy.energy_avg << ','
      << s.stress.weighted_delta_avg << ',' << s.stress.weighted_avg << ',' << s.stress.max_delta_avg << ','
      << s.stress.max_avg << ',' << s.force.delta_l1 << ',' << s.force.delta_l2 << ',' << s.force.force_l1 << ','
      << s.force.force_l2 << '\n';
}

}  // namespace

std::string MetricsReport::to_json() const {
  json j;
  j["checkpoint_hash"] = checkpoint_hash;
  j["dataset_hashes"] = dataset_hashes;
  j["stress_measure"] = stress_measure;
  j["splits"] = json::array();
  for (const auto& s : splits) j["splits"].push_back(split_json(s));
  j["subintervals"] = json::array();
  for (const auto& s : subintervals) j["subintervals"].push_back(split_json(s));
  if (correlation) {
    const auto& c = *correlation;
    std::vector<std::vector<double>> rows(c.matrix.rows());
    for (Eigen::Index i = 0; i < c.matrix.rows(); ++i)
      for (Eigen::Index k = 0; k < c.matrix.cols(); ++k) rows[i].push_back(c.matrix(i, k));
    j["correlation"] = {{"matrix", rows},
                        {"eigenvalues", std::vector<double>(c.eigenvalues.data(),
                                                            c.eigenvalues.data() + c.eigenvalues.size())},
                        {"collapsed", c.collapsed},
                        {"verdict", c.verdict}};
  }
  if (structure) {
    const auto& s = *structure;
    j["structure"] = {{"origin_residual", s.origin_residual},
                      {"symmetry_checked", s.symmetry_checked},
                      {"symmetry_axis", s.symmetry_axis},
                      {"symmetry_residual", s.symmetry_residual},
                      {"smoothness", s.smoothness},
                      {"notice", s.notice}};
  }
  return j.dump(2);
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out.precision(10);
  out << "group,split,count,discarded,l2,dE_avg,dE_max,dE_std,E_avg,dS_weighted_avg,S_weighted_avg,dS_max_avg,"
         "S_max_avg,dF_l1,dF_l2,F_l1,F_l2\n";
  for (const auto& s : splits) csv_row(out, "split", s);
  for (const auto& s : subintervals) csv_row(out, "subinterval", s);
  return out.str();
}

std::string MetricsReport::summary() const {
  std::ostringstream out;
  out << std::setprecision(4);
  out << std::left << std::setw(12) << "split" << std::right << std::setw(8) << "n" << std::setw(12) << "dE_avg"
      << std::setw(12) << "dE_max" << std::setw(12) << "dE_std" << std::setw(12) << "E_avg" << std::setw(12)
      << "dS_avg" << std::setw(12) << "S_avg" << std::setw(12) << "dF_L2" << std::setw(12) << "F_L2" << '\n';
  auto row = [&](const SplitMetrics& s) {
    out << std::left << std::setw(12) << s.name << std::right << std::setw(8) << s.count << std::setw(12)
        << s.energy.delta_avg << std::setw(12) << s.energy.delta_max << std::setw(12) << s.energy.delta_std
        << std::setw(12) << s.energy.energy_avg << std::setw(12) << s.stress.weighted_delta_avg << std::setw(12)
        << s.stress.weighted_avg << std::setw(12) << s.force.delta_l2 << std::setw(12) << s.force.force_l2;
    if (!s.valid) out << "  INVALID (" << s.discarded << " unconverged)";
    out << '\n';
  };
  for (const auto& s : splits) row(s);
  for (const auto& s : subintervals) row(s);
  if (correlation) {
    out << "correlation eigenvalues:";
    for (Eigen::Index i = 0; i < correlation->eigenvalues.size(); ++i) out << ' ' << correlation->eigenvalues[i];
    out << " (" << correlation->verdict << ")\n";
  }
  if (structure) {
    out << "origin residual " << structure->origin_residual << " of mesh scale";
    if (structure->symmetry_checked)
      out << ", symmetry residual " << structure->symmetry_residual << " (axis " << structure->symmetry_axis << ")";
    else
      out << ", " << structure->notice;
    out << ", smoothness " << structure->smoothness << '\n';
  }
  return out.str();
}

}  // namespace nmodes
