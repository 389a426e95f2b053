#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "dmamp/model.hpp"

// Binary instance container (little-endian):
//   bytes 0..7   magic "DMAMPv1\0"
//   u64 M, u64 N, u64 P (number of partition blocks)
//   f64 sigma2, f64 kappa, u64 seed
//   u64 partition[P]
//   A row-major, M*N entries, each (f64 re, f64 im)
//   x_true, N entries, each (f64 re, f64 im)
//   y, M entries, each (f64 re, f64 im)

namespace dmamp::io {

inline constexpr char kMagic[8] = {'D', 'M', 'A', 'M', 'P', 'v', '1', '\0'};

namespace detail {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("instance file truncated");
  return v;
}

inline void put_complex(std::ostream& os, const Complex& z) {
  put(os, z.real());
  put(os, z.imag());
}

inline Complex get_complex(std::istream& is) {
  const double re = get<double>(is);
  const double im = get<double>(is);
  return {re, im};
}

}  // namespace detail

inline void dump_instance(const model::LinearSystem& sys, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, sizeof(kMagic));
  detail::put<std::uint64_t>(os, sys.A.rows());
  detail::put<std::uint64_t>(os, sys.A.cols());
  detail::put<std::uint64_t>(os, sys.partition.size());
  detail::put<double>(os, sys.sigma2);
  detail::put<double>(os, sys.kappa);
  detail::put<std::uint64_t>(os, sys.seed);
  for (int mk : sys.partition) detail::put<std::uint64_t>(os, mk);
  for (Eigen::Index i = 0; i < sys.A.rows(); ++i)
    for (Eigen::Index j = 0; j < sys.A.cols(); ++j) detail::put_complex(os, sys.A(i, j));
  for (Eigen::Index i = 0; i < sys.x_true.size(); ++i) detail::put_complex(os, sys.x_true(i));
  for (Eigen::Index i = 0; i < sys.y.size(); ++i) detail::put_complex(os, sys.y(i));
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline model::LinearSystem load_instance(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a DMAMPv1 instance file: " + path);
  const auto m = detail::get<std::uint64_t>(is);
  const auto n = detail::get<std::uint64_t>(is);
  const auto p = detail::get<std::uint64_t>(is);
  model::LinearSystem sys;
  sys.sigma2 = detail::get<double>(is);
  sys.kappa = detail::get<double>(is);
  sys.seed = detail::get<std::uint64_t>(is);
  sys.partition.resize(p);
  std::uint64_t total = 0;
  for (auto& mk : sys.partition) {
    mk = static_cast<int>(detail::get<std::uint64_t>(is));
    total += mk;
  }
  if (total != m) throw std::runtime_error("instance partition does not sum to M");
  sys.A.resize(m, n);
  for (std::uint64_t i = 0; i < m; ++i)
    for (std::uint64_t j = 0; j < n; ++j) sys.A(i, j) = detail::get_complex(is);
  sys.x_true.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) sys.x_true(i) = detail::get_complex(is);
  sys.y.resize(m);
  for (std::uint64_t i = 0; i < m; ++i) sys.y(i) = detail::get_complex(is);
  return sys;
}

}  // namespace dmamp::io
