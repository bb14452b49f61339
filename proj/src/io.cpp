#include "admplan/io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace admplan::io {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts need byte swaps");

void Writer::u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

void Writer::u32(std::uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), 4); }

void Writer::u64(std::uint64_t v) { buf_.append(reinterpret_cast<const char*>(&v), 8); }

void Writer::f64(double v) { buf_.append(reinterpret_cast<const char*>(&v), 8); }

void Writer::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void Writer::vec(const Eigen::VectorXd& v) {
  buf_.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * v.size());
}

void Writer::mat(const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void Reader::take(void* out, std::size_t n) {
  if (pos_ + n > data_.size()) throw std::runtime_error("truncated file");
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint8_t Reader::u8() {
  std::uint8_t v;
  take(&v, 1);
  return v;
}

std::uint32_t Reader::u32() {
  std::uint32_t v;
  take(&v, 4);
  return v;
}

std::uint64_t Reader::u64() {
  std::uint64_t v;
  take(&v, 8);
  return v;
}

double Reader::f64() {
  double v;
  take(&v, 8);
  return v;
}

std::string Reader::str() {
  const std::uint32_t n = u32();
  if (pos_ + n > data_.size()) throw std::runtime_error("truncated string");
  std::string s = data_.substr(pos_, n);
  pos_ += n;
  return s;
}

Eigen::VectorXd Reader::vec(Eigen::Index n) {
  Eigen::VectorXd v(n);
  take(v.data(), sizeof(double) * static_cast<std::size_t>(n));
  return v;
}

Eigen::MatrixXd Reader::mat(Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = f64();
  return m;
}

void atomic_write(const std::string& path, const std::string& data) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return data;
}

}  // namespace admplan::io
