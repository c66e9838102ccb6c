#pragma once

#include <string>

#include "neuralmodes/checkpoint.hpp"

namespace httplib {
class Server;
}

namespace nmodes {

struct ServiceResponse {
  int status = 200;
  std::string body;  // JSON
};

/// Local evaluation service over one loaded checkpoint. Handlers only read
/// the model, so concurrent requests need no locking.
class EvalService {
 public:
  explicit EvalService(Checkpoint checkpoint);

  ServiceResponse model_info() const;
  /// Body {"z": [...], "aux": [...]}; aux may be omitted for models without one.
  ServiceResponse eval(const std::string& body) const;
  /// Body {"keys": [{"t": .., "z": [..]}, ...], "times": [...]} or
  /// {"keys": [...], "fps": f}; returns interpolated z per time, plus decoded
  /// positions when "decode" is true.
  ServiceResponse keyframes(const std::string& body) const;

  /// Registers GET /model/info, POST /eval and POST /keyframes on `server`,
  /// which must not outlive this service.
  void bind_routes(httplib::Server& server) const;
  /// Blocks serving HTTP on host:port until the process is stopped.
  void listen(const std::string& host, int port) const;

  const Checkpoint& checkpoint() const { return ckpt_; }

 private:
  Checkpoint ckpt_;
  EnergyFamilyPtr family_;
};

}  // namespace nmodes
