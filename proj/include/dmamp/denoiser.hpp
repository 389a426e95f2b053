#pragma once

#include <cmath>

#include "dmamp/common.hpp"
#include "dmamp/model.hpp"

namespace dmamp::solver {

struct DenoiserOutput {
  CVec x_post;    // posterior mean under the Bernoulli-Gaussian prior
  double v_post;  // average posterior variance
  CVec x_orth;    // orthogonalized (divergence-free) estimate
  double v_orth;
  double alpha;   // v_post / v_in
};

// Exact posterior mean/variance for r = x + CN(0, v_in) with
// x ~ mu CN(0, power/mu) + (1-mu) delta_0, followed by the standard
// OAMP/VAMP orthogonalization x_orth = (x_post - alpha r)/(1 - alpha).
inline DenoiserOutput denoiser_bg(const CVec& r, double v_in, const model::SignalPrior& prior,
                                  double v_floor = kVarianceFloor) {
  require(v_in > 0.0, "denoiser_bg: input variance must be positive");
  prior.validate();
  const Eigen::Index n = r.size();
  DenoiserOutput out;
  out.x_post = CVec::Zero(n);

  if (prior.mu == 0.0) {  // degenerate all-zero prior
    out.v_post = 0.0;
    out.alpha = 0.0;
    out.x_orth = CVec::Zero(n);
    out.v_orth = 0.0;
    return out;
  }

  const double vx = prior.power / prior.mu;
  const double g = vx / (vx + v_in);
  const double log_prior_odds =
      (prior.mu < 1.0) ? std::log(prior.mu) - std::log1p(-prior.mu) : 0.0;
  const double log_density_ratio0 = std::log(v_in / (vx + v_in));

  double var_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double r2 = std::norm(r(i));
    double pi;  // posterior activity probability
    if (prior.mu >= 1.0) {
      pi = 1.0;
    } else {
      const double l = log_prior_odds + log_density_ratio0 + r2 * vx / (v_in * (vx + v_in));
      pi = 1.0 / (1.0 + std::exp(-l));
    }
    out.x_post(i) = pi * g * r(i);
    const double e2 = pi * (g * g * r2 + g * v_in);  // E[|x|^2 | r]
    var_sum += e2 - std::norm(out.x_post(i));
  }
  out.v_post = var_sum / static_cast<double>(n);

  out.alpha = out.v_post / v_in;
  double one_minus = 1.0 - out.alpha;
  if (one_minus < v_floor) one_minus = v_floor;  // alpha -> 1 guard
  out.x_orth = (out.x_post - out.alpha * r) / one_minus;
  out.v_orth = out.v_post / one_minus;
  return out;
}

}  // namespace dmamp::solver
