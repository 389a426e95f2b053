#pragma once

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dmamp/common.hpp"

namespace dmamp::model {

// Bernoulli-Gaussian prior: an entry is nonzero with probability mu and then
// CN(0, power/mu), so the mean-square amplitude of the whole signal is `power`.
struct SignalPrior {
  double mu = 0.1;
  double power = 1.0;

  void validate() const {
    require(mu >= 0.0 && mu <= 1.0, "SignalPrior: mu must lie in [0,1]");
    require(power > 0.0, "SignalPrior: power must be positive");
  }
};

struct LinearSystem {
  CMat A;                      // M x N transform
  CVec x_true;                 // N
  CVec y;                      // M
  double sigma2 = 0.0;         // noise variance per entry
  std::vector<int> partition;  // row counts per node, sums to M
  double kappa = 1.0;
  std::uint64_t seed = 0;      // seed the instance was generated from

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }
  double delta() const { return static_cast<double>(A.rows()) / static_cast<double>(A.cols()); }
};

// One node's view of the system: a contiguous block of rows of (A, y).
struct NodeShard {
  int node_id = 1;  // 1-based
  CMat A_k;
  CVec y_k;
};

inline CVec gen_signal(int n, const SignalPrior& prior, std::uint64_t seed) {
  require(n >= 1, "gen_signal: N must be >= 1");
  prior.validate();
  Rng rng(seed);
  CVec x = CVec::Zero(n);
  if (prior.mu == 0.0) return x;
  const double active_var = prior.power / prior.mu;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    if (u < prior.mu) x(i) = rng.cnormal(active_var);
  }
  return x;
}

// A = U diag(s) V^H with U, V Haar frames (QR of IID complex Gaussians with
// phase-fixed diagonal) and geometrically spaced singular values such that
// s_max/s_min = kappa and tr{A^H A} = N.
inline CMat gen_matrix(int m, int n, double kappa, std::uint64_t seed) {
  require(m >= 1 && n >= 1, "gen_matrix: M,N must be >= 1");
  require(kappa >= 1.0, "gen_matrix: condition number must be >= 1");
  const int j = std::min(m, n);

  RVec s(j);
  if (j == 1) {
    s(0) = 1.0;
  } else {
    for (int i = 0; i < j; ++i) s(i) = std::pow(kappa, -static_cast<double>(i) / (j - 1));
  }
  s *= std::sqrt(static_cast<double>(n) / s.squaredNorm());

  auto haar_frame = [](int rows, int cols, std::uint64_t sd) {
    Rng rng(sd);
    CMat g = rng.cnormal_mat(rows, cols);
    Eigen::HouseholderQR<CMat> qr(g);
    CMat q = qr.householderQ() * CMat::Identity(rows, cols);
    // Fixing phases of R's diagonal makes the law exactly Haar.
    for (int c = 0; c < cols; ++c) {
      const Complex r = qr.matrixQR()(c, c);
      const double a = std::abs(r);
      if (a > 0.0) q.col(c) *= r / a;
    }
    return q;
  };

  CMat u = haar_frame(m, j, mix_seed(seed, 0x11));
  CMat v = haar_frame(n, j, mix_seed(seed, 0x22));
  return (u * s.asDiagonal()) * v.adjoint();
}

// sigma2 = (||Ax||^2/M) * 10^(-snr/10); snr_db = +inf means noiseless.
inline std::pair<CVec, double> add_noise(const CVec& ax, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return {ax, 0.0};
  require(!std::isnan(snr_db), "add_noise: snr_db must be finite or +inf");
  const double m = static_cast<double>(ax.size());
  const double sigma2 = ax.squaredNorm() / m * std::pow(10.0, -snr_db / 10.0);
  Rng rng(seed);
  CVec y = ax + rng.cnormal_vec(ax.size(), sigma2);
  return {y, sigma2};
}

inline std::vector<NodeShard> partition(const LinearSystem& sys, const std::vector<int>& sizes) {
  const int m = sys.rows();
  const int total = std::accumulate(sizes.begin(), sizes.end(), 0);
  require(total == m, "partition: row counts must sum to M");
  for (int mk : sizes) require(mk >= 1, "partition: every shard needs at least one row");
  std::vector<NodeShard> shards;
  shards.reserve(sizes.size());
  int row = 0;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    NodeShard sh;
    sh.node_id = static_cast<int>(k) + 1;
    sh.A_k = sys.A.middleRows(row, sizes[k]);
    sh.y_k = sys.y.segment(row, sizes[k]);
    shards.push_back(std::move(sh));
    row += sizes[k];
  }
  return shards;
}

inline std::vector<NodeShard> partition(const LinearSystem& sys, int k) {
  require(k >= 1, "partition: K must be >= 1");
  require(sys.rows() % k == 0, "partition: M must be divisible by K for an equal split");
  return partition(sys, std::vector<int>(k, sys.rows() / k));
}

inline std::vector<int> equal_partition(int m, int k) {
  require(k >= 1 && m % k == 0, "equal_partition: M must be divisible by K");
  return std::vector<int>(k, m / k);
}

// Full instance synthesis with per-purpose sub-streams derived from one seed.
inline LinearSystem make_system(int m, int n, int k, double kappa, double snr_db,
                                const SignalPrior& prior, std::uint64_t seed) {
  LinearSystem sys;
  sys.A = gen_matrix(m, n, kappa, mix_seed(seed, 0x01));
  sys.x_true = gen_signal(n, prior, mix_seed(seed, 0x02));
  CVec ax = sys.A * sys.x_true;
  auto [y, sigma2] = add_noise(ax, snr_db, mix_seed(seed, 0x03));
  sys.y = std::move(y);
  sys.sigma2 = sigma2;
  sys.partition = equal_partition(m, k);
  sys.kappa = kappa;
  sys.seed = seed;
  return sys;
}

}  // namespace dmamp::model
