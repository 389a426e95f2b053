#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dmamp {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;

// Default numerical guards used across the solver.
inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kCondLimit = 1e12;

// splitmix64; used to derive independent sub-streams from one experiment seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double normal() { return normal_(eng_); }
  double uniform() { return uniform_(eng_); }

  // CN(0, var): real and imaginary parts are N(0, var/2).
  Complex cnormal(double var = 1.0) {
    const double s = std::sqrt(var / 2.0);
    const double re = normal_(eng_);
    const double im = normal_(eng_);
    return {s * re, s * im};
  }

  CVec cnormal_vec(Eigen::Index n, double var = 1.0) {
    CVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = cnormal(var);
    return v;
  }

  CMat cnormal_mat(Eigen::Index rows, Eigen::Index cols, double var = 1.0) {
    CMat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = cnormal(var);
    return m;
  }

 private:
  std::mt19937_64 eng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline double db10(double x) { return 10.0 * std::log10(x); }

}  // namespace dmamp
