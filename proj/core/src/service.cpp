#include "neuralmodes/service.hpp"

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "neuralmodes/dynamics.hpp"
#include "neuralmodes/errors.hpp"

namespace nmodes {

using json = nlohmann::json;

namespace {

ServiceResponse bad_request(const std::string& message) { return {400, json{{"error", message}}.dump()}; }

std::vector<double> flat(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd read_vector(const json& j, const char* key) {
  if (!j.contains(key)) return {};
  const auto& a = j.at(key);
  if (!a.is_array()) throw InputError(std::string("'") + key + "' must be an array");
  Eigen::VectorXd v(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw InputError(std::string("'") + key + "' must contain numbers");
    v[i] = a[i].get<double>();
    if (!std::isfinite(v[i])) throw InputError(std::string("'") + key + "' must be finite");
  }
  return v;
}

json object_body(const std::string& body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw InputError("body is not valid JSON");
  if (!j.is_object()) throw InputError("body must be a JSON object");
  return j;
}

}  // namespace

EvalService::EvalService(Checkpoint checkpoint) : ckpt_(std::move(checkpoint)) {
  ckpt_.model.validate();
  family_ = ckpt_.family();
}

ServiceResponse EvalService::model_info() const {
  const auto& mdl = ckpt_.model;
  const auto& mesh = family_->reference()->mesh();
  json aux = nullptr;
  if (mdl.aux_dim() > 0)
    aux = {{"name", mdl.aux.name}, {"lo", mdl.aux.lo}, {"hi", mdl.aux.hi}, {"reference", mdl.aux.reference}};
  const Eigen::MatrixXi el = mesh.elements;
  std::vector<int> conn;
  conn.reserve(el.size());
  for (int r = 0; r < el.rows(); ++r)
    for (int c = 0; c < el.cols(); ++c) conn.push_back(el(r, c));
  json j = {{"m", mdl.m()},
            {"kind", ckpt_.kind},
            {"aux", aux},
            {"domain", {{"lo", flat(mdl.box.lo)}, {"hi", flat(mdl.box.hi)}}},
            {"vertex_count", mesh.num_vertices()},
            {"element_size", el.cols()},
            {"element_count", el.rows()},
            {"elements", conn},
            {"rest_positions", flat(mesh.rest_positions)},
            {"fingerprint", mdl.fingerprint}};
  return {200, j.dump()};
}

ServiceResponse EvalService::eval(const std::string& body) const {
  try {
    const json j = object_body(body);
    if (!j.contains("z")) throw InputError("missing 'z'");
    const Eigen::VectorXd z = read_vector(j, "z");
    Eigen::VectorXd aux = read_vector(j, "aux");
    const auto& mdl = ckpt_.model;
    if (z.size() != mdl.m()) throw InputError("'z' must have " + std::to_string(mdl.m()) + " entries");
    if (aux.size() != mdl.aux_dim()) throw InputError("'aux' must have " + std::to_string(mdl.aux_dim()) + " entries");
    bool extrapolated = !mdl.box.contains(z);
    if (mdl.aux_dim() > 0 && !mdl.aux.box().contains(aux)) extrapolated = true;

    const EnergyModelPtr em = family_->at(aux);
    const Eigen::VectorXd l = mdl.basis.modes * z;
    const Eigen::VectorXd y = mdl.correction(z, aux);
    const Eigen::VectorXd x = em->rest_positions() + l + y;
    const double c = l.dot(y);
    json out = {{"positions", flat(x)},
                {"length", x.size()},
                {"energy", json(em->energy(x))},
                {"constraint_residual", c * c},
                {"extrapolated", extrapolated}};
    if (!std::isfinite(out["energy"].get<double>())) out["energy"] = nullptr;
    return {200, out.dump()};
  } catch (const InputError& e) {
    return bad_request(e.what());
  } catch (const std::exception& e) {
    return {500, json{{"error", e.what()}}.dump()};
  }
}

ServiceResponse EvalService::keyframes(const std::string& body) const {
  try {
    const json j = object_body(body);
    if (!j.contains("keys") || !j.at("keys").is_array()) throw InputError("missing 'keys' array");
    std::vector<Keyframe> keys;
    for (const auto& k : j.at("keys")) {
      if (!k.is_object() || !k.contains("t") || !k.at("t").is_number()) throw InputError("each key needs a numeric 't'");
      Keyframe key{k.at("t").get<double>(), read_vector(k, "z")};
      if (key.z.size() != ckpt_.model.m())
        throw InputError("key z must have " + std::to_string(ckpt_.model.m()) + " entries");
      keys.push_back(std::move(key));
    }
    validate_keyframes(keys);

    std::vector<double> times;
    if (j.contains("times")) {
      const Eigen::VectorXd t = read_vector(j, "times");
      times.assign(t.data(), t.data() + t.size());
    } else {
      const double fps = j.value("fps", 30.0);
      if (!(fps > 0.0) || !std::isfinite(fps)) throw InputError("'fps' must be positive");
      const double t0 = keys.front().t, t1 = keys.back().t;
      const long n = static_cast<long>(std::floor((t1 - t0) * fps + 1e-9)) + 1;
      if (n > 100000) throw InputError("too many frames requested");
      for (long i = 0; i < n; ++i) times.push_back(t0 + i / fps);
      if (times.back() < t1) times.push_back(t1);
    }
    const bool decode = j.value("decode", false);
    const Eigen::VectorXd aux = read_vector(j, "aux");
    if (decode && aux.size() != ckpt_.model.aux_dim()) throw InputError("'aux' has the wrong length");

    json frames = json::array();
    for (double t : times) {
      const Eigen::VectorXd z = interpolate_keyframes(keys, t);
      json f = {{"t", t}, {"z", flat(z)}};
      if (decode) f["positions"] = flat(ckpt_.model.decode(*family_->at(aux), z, aux));
      frames.push_back(std::move(f));
    }
    return {200, json{{"frames", frames}}.dump()};
  } catch (const InputError& e) {
    return bad_request(e.what());
  } catch (const std::exception& e) {
    return {500, json{{"error", e.what()}}.dump()};
  }
}

void EvalService::bind_routes(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  server.Get("/model/info", [this, send](const httplib::Request&, httplib::Response& res) { send(res, model_info()); });
  server.Post("/eval", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, eval(req.body)); });
  server.Post("/keyframes",
              [this, send](const httplib::Request& req, httplib::Response& res) { send(res, keyframes(req.body)); });
  server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
}

void EvalService::listen(const std::string& host, int port) const {
  httplib::Server server;
  bind_routes(server);
  if (!server.listen(host, port)) throw InputError("cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace nmodes
