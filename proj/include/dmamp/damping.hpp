#pragma once

#include <deque>
#include <vector>

#include "dmamp/common.hpp"

namespace dmamp::solver {

// theta_t = (dagger + sigma2 / v_bar)^(-1); non-positive v_bar is clamped.
inline double relaxation_theta(double lambda_dagger, double sigma2, double v_bar_tt,
                               double v_floor = kVarianceFloor, int* warnings = nullptr) {
  if (v_bar_tt <= 0.0) {
    v_bar_tt = v_floor;
    if (warnings) ++*warnings;
  }
  return 1.0 / (lambda_dagger + sigma2 / v_bar_tt);
}

struct DampingResult {
  CVec zeta;      // weights over the newest `zeta.size()` window entries, sums to 1
  double v_bar;   // 1 / (1^T V^-1 1)
  int dropped;    // oldest entries removed by back-off
};

// zeta = V^-1 1 / (1^T V^-1 1). Singular or badly conditioned V triggers
// back-off: drop the oldest window entry and retry; a 1x1 window always
// succeeds.
inline DampingResult damping_vector(const CMat& v_phi, double v_floor = kVarianceFloor,
                                    double cond_limit = kCondLimit, int* warnings = nullptr) {
  require(v_phi.rows() == v_phi.cols() && v_phi.rows() >= 1, "damping_vector: square V required");
  const int s0 = static_cast<int>(v_phi.rows());
  for (int drop = 0; drop < s0 - 1; ++drop) {
    const int s = s0 - drop;
    CMat v = v_phi.bottomRightCorner(s, s);
    Eigen::SelfAdjointEigenSolver<CMat> es(v);
    if (es.info() != Eigen::Success) continue;
    const double dmin = es.eigenvalues().minCoeff();
    const double dmax = es.eigenvalues().maxCoeff();
    if (!(dmin > 0.0) || dmax > cond_limit * dmin) continue;  // back off
    const CVec ones = CVec::Ones(s);
    CVec vinv1 = es.eigenvectors() *
                 (es.eigenvalues().cwiseInverse().asDiagonal() *
                  (es.eigenvectors().adjoint() * ones).eval());
    const double denom = (ones.adjoint() * vinv1).real()(0);
    if (!(denom > 0.0) || !std::isfinite(denom)) continue;
    DampingResult out;
    out.zeta = vinv1 / denom;
    out.v_bar = 1.0 / denom;
    out.dropped = drop;
    return out;
  }
  // window of one: keep the newest candidate
  DampingResult out;
  out.zeta = CVec::Ones(1);
  double v = v_phi(s0 - 1, s0 - 1).real();
  if (!std::isfinite(v) || v < v_floor) {
    v = v_floor;
    if (warnings) ++*warnings;
  }
  out.v_bar = v;
  out.dropped = s0 - 1;
  return out;
}

// x_{t+1} = sum_j zeta_j * window_j (window and zeta lengths must match).
inline CVec nle_step(const std::vector<const CVec*>& window, const CVec& zeta) {
  require(static_cast<int>(window.size()) == zeta.size(),
          "nle_step: window and zeta lengths differ");
  CVec x = CVec::Zero(window.front()->size());
  for (std::size_t j = 0; j < window.size(); ++j) x += zeta(j) * (*window[j]);
  return x;
}

// Error-covariance window. The candidate row/column is measured from residual
// inner products; entries between already-damped estimates are the damped
// covariances carried from the iterations that produced them, which collapse
// to cov(x_a, x_b) = v_bar_{max(a,b)}. Only the candidate products ever cross
// the network in distributed mode.
class CovarianceWindow {
 public:
  explicit CovarianceWindow(int window_len) : max_past_(window_len - 1) {
    require(window_len >= 1, "CovarianceWindow: L must be >= 1");
  }

  // v_bar of the freshly damped estimate enters the carried diagonal.
  void push_damped(double v_bar) {
    vbars_.push_back(v_bar);
    if (static_cast<int>(vbars_.size()) > max_past_ && max_past_ >= 0) vbars_.pop_front();
  }

  int past_size() const { return static_cast<int>(vbars_.size()); }

  // cross_raw[j] = hhat^H h_j and diag_raw = ||hhat||^2 (global sums);
  // entries become [(1/N)(.) - delta sigma2]/w0, diagonal floored.
  CMat assemble(const std::vector<Complex>& cross_raw, double diag_raw, double n, double dsig,
                double w0, double v_floor = kVarianceFloor) const {
    const int sp = past_size();
    require(static_cast<int>(cross_raw.size()) == sp, "CovarianceWindow: cross size mismatch");
    CMat v(sp + 1, sp + 1);
    for (int a = 0; a < sp; ++a)
      for (int b = 0; b < sp; ++b) v(a, b) = vbars_[std::max(a, b)];
    const double scale = w0 > 0.0 ? 1.0 / w0 : 0.0;  // zero-operator guard
    for (int j = 0; j < sp; ++j) {
      const Complex entry = (cross_raw[j] / n - dsig) * scale;
      v(sp, j) = entry;             // candidate vs past estimate
      v(j, sp) = std::conj(entry);  // Hermitian completion
    }
    double d = (diag_raw / n - dsig) * scale;
    if (!std::isfinite(d) || d < v_floor) d = v_floor;
    v(sp, sp) = d;
    return v;
  }

 private:
  int max_past_;
  std::deque<double> vbars_;
};

}  // namespace dmamp::solver
