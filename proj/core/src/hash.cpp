#include "neuralmodes/hash.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include "neuralmodes/errors.hpp"

namespace nmodes {

Fnv1a& Fnv1a::bytes(const void* data, size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    state_ ^= p[i];
    state_ *= 0x100000001b3ULL;
  }
  return *this;
}

Fnv1a& Fnv1a::array(const Eigen::VectorXd& v) {
  integer(v.size());
  return bytes(v.data(), sizeof(double) * static_cast<size_t>(v.size()));
}

Fnv1a& Fnv1a::array(const Eigen::MatrixXi& m) {
  integer(m.rows()).integer(m.cols());
  return bytes(m.data(), sizeof(int) * static_cast<size_t>(m.size()));
}

Fnv1a& Fnv1a::array(const Eigen::MatrixXd& m) {
  integer(m.rows()).integer(m.cols());
  return bytes(m.data(), sizeof(double) * static_cast<size_t>(m.size()));
}

std::string Fnv1a::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(state_));
  return buf;
}

std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  Fnv1a h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.bytes(buf.data(), static_cast<size_t>(in.gcount()));
  }
  return h.hex();
}

}  // namespace nmodes
