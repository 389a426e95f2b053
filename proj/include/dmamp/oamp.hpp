#pragma once

#include <vector>

#include "dmamp/common.hpp"
#include "dmamp/denoiser.hpp"
#include "dmamp/model.hpp"
#include "dmamp/spectral.hpp"

namespace dmamp::harness {

struct OampResult {
  std::vector<double> mse;  // per-iteration MSE of the posterior-mean estimate
  double mse_fp = 0.0;      // MSE at the stopping point
  int iterations = 0;
  bool converged = false;
};

// Desk-scale OAMP/VAMP oracle: exact LMMSE linear stage (through one dense
// eigendecomposition of A A^H) alternating with the same Bernoulli-Gaussian
// denoiser the solver uses, extrinsic messages on both sides. Stops when the
// MSE is stationary to rel_tol or after max_iter sweeps.
inline OampResult oamp_fixed_point_oracle(const model::LinearSystem& sys,
                                          const model::SignalPrior& prior, int max_iter,
                                          double rel_tol = 1e-6) {
  const int n = sys.cols();
  Eigen::SelfAdjointEigenSolver<CMat> es(sys.A * sys.A.adjoint());
  if (es.info() != Eigen::Success) throw std::runtime_error("oamp oracle: eig failed");
  const RVec d = es.eigenvalues();
  const CMat& q = es.eigenvectors();

  CVec r2 = CVec::Zero(n);       // mean into the LMMSE stage
  double v2 = prior.power;       // its variance
  OampResult out;
  double prev_mse = -1.0;

  for (int t = 1; t <= max_iter; ++t) {
    // LMMSE posterior: x2 = r2 + v2 A^H (v2 A A^H + sigma2 I)^(-1) (y - A r2)
    CVec resid = sys.y - sys.A * r2;
    RVec inv = (v2 * d.array() + sys.sigma2)
                   .cwiseMax(1e-300)
                   .cwiseInverse();
    CVec solved = q * (inv.asDiagonal() * (q.adjoint() * resid).eval());
    CVec x2 = r2 + v2 * (sys.A.adjoint() * solved);
    double trace_term = (d.array() / (v2 * d.array() + sys.sigma2).cwiseMax(1e-300)).sum();
    double v2_post = v2 - v2 * v2 * trace_term / n;
    if (v2_post < kVarianceFloor) v2_post = kVarianceFloor;

    // extrinsic toward the denoiser
    double alpha2 = v2_post / v2;
    double one_minus = std::max(1.0 - alpha2, kVarianceFloor);
    CVec r1 = (x2 - alpha2 * r2) / one_minus;
    double v1 = v2_post / one_minus;

    solver::DenoiserOutput den = solver::denoiser_bg(r1, v1, prior);
    const double mse = (den.x_post - sys.x_true).squaredNorm() / n;
    out.mse.push_back(mse);
    out.iterations = t;
    if (prev_mse >= 0.0 && std::abs(mse - prev_mse) < rel_tol * std::max(mse, 1e-300)) {
      out.converged = true;
      out.mse_fp = mse;
      return out;
    }
    prev_mse = mse;

    // extrinsic back toward the LMMSE stage
    r2 = den.x_orth;
    v2 = std::max(den.v_orth, kVarianceFloor);
  }
  out.mse_fp = out.mse.empty() ? 0.0 : out.mse.back();
  return out;
}

}  // namespace dmamp::harness
