#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace admplan::io {

// Little-endian binary writers/readers used by every file format in the
// project. Writers append to an in-memory buffer; the finished buffer is
// flushed atomically (temp file + rename) so readers never observe a
// half-written artifact.

class Writer {
 public:
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void vec(const Eigen::VectorXd& v);
  /// Row-major element stream, shape written by the caller.
  void mat(const Eigen::MatrixXd& m);

  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Eigen::VectorXd vec(Eigen::Index n);
  Eigen::MatrixXd mat(Eigen::Index rows, Eigen::Index cols);
  bool exhausted() const { return pos_ == data_.size(); }

 private:
  void take(void* out, std::size_t n);

  std::string data_;
  std::size_t pos_ = 0;
};

/// Writes `data` to `path` via a temporary file in the same directory followed
/// by an atomic rename. Parent directories are created if missing.
void atomic_write(const std::string& path, const std::string& data);

std::string read_file(const std::string& path);

}  // namespace admplan::io
