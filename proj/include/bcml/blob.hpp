#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

// Binary matrix container used for every persisted numeric artifact:
//   magic "BCML" | u16 version | u32 rows | u32 cols |
//   row-major float64 little-endian payload | u32 CRC32 of the payload.
namespace bcml::io {

enum class BlobFault {
  bad_magic,
  bad_version,
  truncated,
  checksum_mismatch,
  io,
};

class BlobError : public std::runtime_error {
 public:
  BlobError(BlobFault fault, const std::string& what)
      : std::runtime_error(what), fault_(fault) {}
  BlobFault fault() const { return fault_; }

 private:
  BlobFault fault_;
};

inline constexpr std::uint16_t kBlobVersion = 1;

void save_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd load_matrix(const std::string& path);

}  // namespace bcml::io
