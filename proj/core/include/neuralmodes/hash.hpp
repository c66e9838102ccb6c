#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace nmodes {

/// Incremental 64-bit FNV-1a; used for input fingerprints, not for security.
class Fnv1a {
 public:
  Fnv1a& bytes(const void* data, size_t size);
  Fnv1a& text(std::string_view s) { return bytes(s.data(), s.size()); }
  Fnv1a& real(double v) { return bytes(&v, sizeof v); }
  Fnv1a& integer(int64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& array(const Eigen::VectorXd& v);
  Fnv1a& array(const Eigen::MatrixXi& m);
  Fnv1a& array(const Eigen::MatrixXd& m);

  uint64_t value() const { return state_; }
  std::string hex() const;

 private:
  uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string hash_file(const std::string& path);

}  // namespace nmodes
