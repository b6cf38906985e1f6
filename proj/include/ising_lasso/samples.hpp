#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace ising_lasso {

/// n × p matrix of spins in {-1, +1}, row-major (one sample per row).
class SampleMatrix {
 public:
  using Storage = Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  SampleMatrix() = default;
  SampleMatrix(Storage data, std::string provenance = {}) : data_(std::move(data)), provenance_(std::move(provenance)) {
    if (data_.rows() < 1) throw InvalidArgument("sample matrix needs n >= 1");
    for (Eigen::Index i = 0; i < data_.size(); ++i) {
      auto v = data_.data()[i];
      if (v != 1 && v != -1) throw InvalidArgument("spin values must be -1 or +1");
    }
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(data_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(data_.cols()); }
  int operator()(std::size_t i, std::size_t j) const { return data_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
  const Storage& data() const noexcept { return data_; }
  const std::string& provenance() const noexcept { return provenance_; }

  Eigen::MatrixXd to_double() const { return data_.cast<double>(); }

  /// (1/n) XᵀX; the diagonal is exactly 1.
  Eigen::MatrixXd second_moments() const {
    Eigen::MatrixXd x = to_double();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    m.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(x.rows()));
    m = m.selfadjointView<Eigen::Lower>();
    m.diagonal().setOnes();
    return m;
  }

  friend bool operator==(const SampleMatrix& a, const SampleMatrix& b) {
    return a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() && a.data_ == b.data_;
  }

 private:
  Storage data_;
  std::string provenance_;
};

/// Column means (per-spin empirical magnetization).
inline Eigen::VectorXd estimate_magnetization(const SampleMatrix& samples) {
  return samples.data().cast<double>().colwise().mean().transpose();
}

// ---------------------------------------------------------------------------
// Text format: "p=<p> n=<n>" header, then n rows of space-separated ±1.

inline void write_samples_text(std::ostream& out, const SampleMatrix& s) {
  out << "p=" << s.p() << " n=" << s.n() << '\n';
  std::string line;
  for (std::size_t i = 0; i < s.n(); ++i) {
    line.clear();
    for (std::size_t j = 0; j < s.p(); ++j) {
      if (j) line += ' ';
      line += s(i, j) > 0 ? "1" : "-1";
    }
    line += '\n';
    out << line;
  }
}

inline SampleMatrix read_samples_text(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw InvalidArgument("sample file is empty");
  std::size_t p = 0, n = 0;
  {
    std::istringstream hs(header);
    std::string a, b;
    hs >> a >> b;
    if (a.rfind("p=", 0) != 0 || b.rfind("n=", 0) != 0) throw InvalidArgument("sample header must read 'p=<p> n=<n>'");
    try {
      p = std::stoul(a.substr(2));
      n = std::stoul(b.substr(2));
    } catch (const std::exception&) {
      throw InvalidArgument("sample header must read 'p=<p> n=<n>'");
    }
  }
  SampleMatrix::Storage data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      int v;
      if (!(in >> v)) throw InvalidArgument("sample file truncated at row " + std::to_string(i));
      if (v != 1 && v != -1) throw InvalidArgument("spin values must be -1 or +1");
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<std::int8_t>(v);
    }
  }
  return SampleMatrix(std::move(data), "text");
}

// ---------------------------------------------------------------------------
// Binary format: magic "ISNG", u32 n, u32 p (little-endian), then the n·p
// spins as one row-major bit stream, LSB first within each byte, bit 1 = +1.
// The final byte is zero-padded.

namespace detail {
inline void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw InvalidArgument("binary sample file truncated in header");
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}
}  // namespace detail

inline void write_samples_binary(std::ostream& out, const SampleMatrix& s) {
  out.write("ISNG", 4);
  detail::put_u32(out, static_cast<std::uint32_t>(s.n()));
  detail::put_u32(out, static_cast<std::uint32_t>(s.p()));
  std::vector<unsigned char> bytes((s.n() * s.p() + 7) / 8, 0);
  const std::int8_t* raw = s.data().data();
  for (std::size_t k = 0; k < s.n() * s.p(); ++k)
    if (raw[k] > 0) bytes[k / 8] |= static_cast<unsigned char>(1u << (k % 8));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

inline SampleMatrix read_samples_binary(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ISNG", 4) != 0) throw InvalidArgument("binary sample file lacks ISNG magic");
  std::uint32_t n = detail::get_u32(in), p = detail::get_u32(in);
  std::vector<unsigned char> bytes((std::size_t(n) * p + 7) / 8);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw InvalidArgument("binary sample file truncated in payload");
  SampleMatrix::Storage data(n, p);
  std::int8_t* raw = data.data();
  for (std::size_t k = 0; k < std::size_t(n) * p; ++k) raw[k] = (bytes[k / 8] >> (k % 8)) & 1u ? 1 : -1;
  return SampleMatrix(std::move(data), "binary");
}

/// Dispatches on the first four bytes.
inline SampleMatrix read_samples(std::istream& in) {
  char head[4] = {};
  in.read(head, 4);
  std::streamsize got = in.gcount();
  in.clear();
  in.seekg(0);
  if (got == 4 && std::memcmp(head, "ISNG", 4) == 0) return read_samples_binary(in);
  return read_samples_text(in);
}

}  // namespace ising_lasso
