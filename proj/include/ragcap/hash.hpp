#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace ragcap {

// Incremental SHA-256 (OpenSSL-backed). hex_digest() finalizes the state.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update_double(double v) { update(&v, sizeof(v)); }
  void update_doubles(const double* v, std::size_t n) {
    update(v, n * sizeof(double));
  }

  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_file_hex(const std::string& path);

}  // namespace ragcap
