#include "bcml/blob.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "blob payload is little-endian; big-endian hosts need byte swaps");

namespace bcml::io {
namespace {

constexpr char kMagic[4] = {'B', 'C', 'M', 'L'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
}

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void save_matrix(const std::string& path, const Eigen::MatrixXd& m) {
  const std::uint32_t rows = static_cast<std::uint32_t>(m.rows());
  const std::uint32_t cols = static_cast<std::uint32_t>(m.cols());

  std::vector<unsigned char> header;
  header.insert(header.end(), kMagic, kMagic + 4);
  put_u16(header, kBlobVersion);
  put_u32(header, rows);
  put_u32(header, cols);

  // Row-major payload regardless of Eigen's internal layout.
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMajor rm = m;
  const auto* payload = reinterpret_cast<const unsigned char*>(rm.data());
  const std::size_t payload_bytes = sizeof(double) * rows * cols;

  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), payload, static_cast<uInt>(payload_bytes)));
  std::vector<unsigned char> trailer;
  put_u32(trailer, crc);

  File f(std::fopen(path.c_str(), "wb"));
  if (!f) throw BlobError(BlobFault::io, "blob: cannot open for writing: " + path);
  if (std::fwrite(header.data(), 1, header.size(), f.get()) != header.size() ||
      (payload_bytes && std::fwrite(payload, 1, payload_bytes, f.get()) != payload_bytes) ||
      std::fwrite(trailer.data(), 1, trailer.size(), f.get()) != trailer.size()) {
    throw BlobError(BlobFault::io, "blob: short write: " + path);
  }
}

Eigen::MatrixXd load_matrix(const std::string& path) {
  File f(std::fopen(path.c_str(), "rb"));
  if (!f) throw BlobError(BlobFault::io, "blob: cannot open: " + path);

  unsigned char head[14];
  if (std::fread(head, 1, sizeof head, f.get()) != sizeof head)
    throw BlobError(BlobFault::truncated, "blob: truncated header: " + path);
  if (std::memcmp(head, kMagic, 4) != 0)
    throw BlobError(BlobFault::bad_magic, "blob: bad magic: " + path);
  std::uint16_t version = get_u16(head + 4);
  if (version != kBlobVersion)
    throw BlobError(BlobFault::bad_version,
                    "blob: unsupported version " + std::to_string(version) + ": " + path);
  const std::uint32_t rows = get_u32(head + 6);
  const std::uint32_t cols = get_u32(head + 10);
  const std::size_t payload_bytes = sizeof(double) * static_cast<std::size_t>(rows) * cols;

  std::vector<unsigned char> payload(payload_bytes);
  if (payload_bytes && std::fread(payload.data(), 1, payload_bytes, f.get()) != payload_bytes)
    throw BlobError(BlobFault::truncated, "blob: truncated payload: " + path);

  unsigned char tail[4];
  if (std::fread(tail, 1, sizeof tail, f.get()) != sizeof tail)
    throw BlobError(BlobFault::truncated, "blob: truncated checksum: " + path);
  std::uint32_t stored_crc = get_u32(tail);
  std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), payload.data(), static_cast<uInt>(payload_bytes)));
  if (crc != stored_crc)
    throw BlobError(BlobFault::checksum_mismatch, "blob: checksum mismatch: " + path);

  Eigen::MatrixXd m(rows, cols);
  const double* src = reinterpret_cast<const double*>(payload.data());
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = src[static_cast<std::size_t>(i) * cols + j];
  return m;
}

}  // namespace bcml::io
