#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "dmamp/common.hpp"
#include "dmamp/damping.hpp"
#include "dmamp/denoiser.hpp"
#include "dmamp/model.hpp"
#include "dmamp/spectral.hpp"

namespace dmamp::solver {

// Relaxation coefficient xi_t. The optimizing choice lives in a companion
// work, so the default policy is xi_t = 1; anything else is injected here and
// shared by every solver variant.
struct XiPolicy {
  std::function<double(int)> fn;

  double operator()(int t) const { return fn ? fn(t) : 1.0; }

  static XiPolicy ones() { return {}; }
  static XiPolicy constant(double c) {
    XiPolicy p;
    p.fn = [c](int) { return c; };
    return p;
  }
};

inline double relaxation_xi(int t, const XiPolicy& policy) { return policy(t); }

struct MampOptions {
  int iterations = 30;      // T
  int window_len = 3;       // L: L-1 past estimates plus the current candidate
  double v_floor = kVarianceFloor;
  double cond_limit = kCondLimit;
  XiPolicy xi;
};

struct IterationRecord {
  int iter = 0;
  double mse_linear = 0.0;
  double mse_db = 0.0;
  double v_hat = 0.0;   // denoiser posterior variance
  double v_bar = 0.0;   // damped variance (Eq.-(7) value)
  double theta = 0.0;
  double epsilon = 0.0;
  int window = 0;       // window size actually used by the damping step
  long long comm_exact = 0;  // scalars sent this iteration (distributed runs)
  long long comm_table = 0;
};

struct Trajectory {
  std::vector<IterationRecord> records;
  CVec x_post_final;
  int warnings = 0;       // variance floors / back-offs taken
  long long mv_mle = 0;   // matrix-by-vector applications inside the MLE
  long long mv_resid = 0; // applications spent on residual updates

  double final_mse() const { return records.empty() ? 0.0 : records.back().mse_linear; }
};

// State that is identical at every node of a distributed run (and simply
// owned once by the centralized runners): estimate history, the memory
// combination, the denoiser call and the damping bookkeeping.
class ReplicaCore {
 public:
  ReplicaCore(const spectral::SpectralStats& stats, const model::SignalPrior& prior,
              double sigma2, int n, double y_norm2, const MampOptions& opts)
      : stats_(stats),
        prior_(prior),
        opts_(opts),
        sigma2_(sigma2),
        n_(n),
        dsig_(stats.delta * sigma2),
        cov_(opts.window_len) {
    prior_.validate();
    require(opts.iterations >= 1, "MampOptions: need at least one iteration");
    x_hist_.push_back(CVec::Zero(n));  // x_1 = 0
    const double w0 = stats_.w_tilde.at(0);
    double v1 = w0 > 0.0 ? (y_norm2 / n - dsig_) / w0 : opts_.v_floor;
    if (v1 < opts_.v_floor) {
      v1 = opts_.v_floor;
      ++warnings_;
    }
    cov_.push_damped(v1);
    vbar_hist_.push_back(v1);
    v_bar_prev_ = v1;
  }

  struct Params {
    double theta = 0.0;
    double xi = 0.0;
    double epsilon = 0.0;
    double v_in = 0.0;      // deterministic variance of the MLE output error
    std::vector<double> p;  // p[i] multiplies x_{i+1}
  };

  // Relaxation and orthogonalization coefficients for iteration t (1-based),
  // plus the tracked variance of r_t. Unrolling the memory recursion gives
  //   r_t - x = (1/eps)[sum_i vt_i A^H B^{t-i} n
  //                     + sum_i vt_i (w_{t-i} I - A^H B^{t-i} A) f_i],
  // so with f-covariances from the damping bookkeeping,
  //   v_in = (1/eps^2)[sigma2 sum_ij vt_i vt_j w_{2t-i-j}
  //                    + sum_ij vt_i vt_j vbar_max(i,j) (w2_{2t-i-j} - w_{t-i} w_{t-j})].
  Params begin_iter(int t) {
    Params par;
    par.theta = relaxation_theta(stats_.lambda_dagger, sigma2_, v_bar_prev_, opts_.v_floor,
                                 &warnings_);
    par.xi = opts_.xi(t);
    // The products theta_tau * dagger lie in (0,1], so running the
    // orthogonalization on (theta dagger, w_tilde) keeps every intermediate
    // bounded; the resulting p and epsilon are algebraically unchanged.
    theta_scaled_hist_.push_back(par.theta * stats_.lambda_dagger);
    xi_hist_.push_back(par.xi);
    auto oc = spectral::ortho_coeffs(theta_scaled_hist_, xi_hist_, stats_.w_tilde);
    par.epsilon = oc.epsilon;

    double noise_term = 0.0, error_term = 0.0;
    for (int i = 1; i <= t; ++i) {
      for (int j = 1; j <= t; ++j) {
        const double vv = oc.vartheta[i - 1] * oc.vartheta[j - 1];
        noise_term += vv * stats_.w_tilde.at(2 * t - i - j);
        error_term += vv * vbar_hist_[std::max(i, j) - 1] *
                      (stats_.w2_tilde.at(2 * t - i - j) -
                       stats_.w_tilde[t - i] * stats_.w_tilde[t - j]);
      }
    }
    double vg = (par.epsilon == 0.0)
                    ? opts_.v_floor
                    : (sigma2_ * noise_term + error_term) / (par.epsilon * par.epsilon);
    // Approximate moments can push the tracked variance non-positive; the
    // damped variance is the sane-scale stand-in.
    if (!std::isfinite(vg) || vg <= 0.0) {
      vg = (std::isfinite(v_bar_prev_) && v_bar_prev_ > 0.0) ? v_bar_prev_ : opts_.v_floor;
      ++warnings_;
    }
    if (!(vg >= opts_.v_floor)) vg = opts_.v_floor;
    par.v_in = vg;
    par.p = std::move(oc.p);
    return par;
  }

  const CVec& x_current(int t) const { return x_hist_.at(t - 1); }

  // r_t = (rhat_sum + sum_i p_{t,i} x_i) / epsilon_t. A zero epsilon aborts
  // unless the numerator is identically zero (the all-zero operator case).
  CVec combine_memory(const CVec& rhat_sum, const Params& par) const {
    CVec num = rhat_sum;
    for (std::size_t i = 0; i < par.p.size(); ++i) num += par.p[i] * x_hist_[i];
    if (par.epsilon == 0.0) {
      if (num.isZero(0.0)) return num;
      throw std::runtime_error("MAMP: epsilon_t = 0 with a nonzero memory combination");
    }
    return num / par.epsilon;
  }

  DenoiserOutput denoise(const CVec& r_t, const Params& par) const {
    return denoiser_bg(r_t, par.v_in, prior_, opts_.v_floor);
  }

  int window_past_size() const { return cov_.past_size(); }

  struct DampOut {
    double v_bar = 0.0;
    int window_used = 0;
  };

  // Assembles V over [window estimates..., candidate], solves for zeta with
  // back-off, forms x_{t+1} and advances the carried state.
  DampOut damp_and_update(const std::vector<Complex>& cross_raw, double diag_raw,
                          const CVec& candidate) {
    CMat v = cov_.assemble(cross_raw, diag_raw, n_, dsig_, stats_.w_tilde.at(0), opts_.v_floor);
    DampingResult dr = damping_vector(v, opts_.v_floor, opts_.cond_limit, &warnings_);
    if (dr.dropped > 0) ++warnings_;
    const int used = static_cast<int>(dr.zeta.size());
    std::vector<const CVec*> window;
    // window entries, oldest first: the newest (used-1) past estimates, then the candidate
    for (int j = used - 1; j >= 1; --j) window.push_back(&x_hist_[x_hist_.size() - j]);
    window.push_back(&candidate);
    CVec x_next = nle_step(window, dr.zeta);
    x_hist_.push_back(std::move(x_next));
    cov_.push_damped(dr.v_bar);
    vbar_hist_.push_back(dr.v_bar);
    v_bar_prev_ = dr.v_bar;
    return {dr.v_bar, used};
  }

  const std::vector<CVec>& history() const { return x_hist_; }
  int warnings() const { return warnings_; }
  double v_bar_prev() const { return v_bar_prev_; }

 private:
  spectral::SpectralStats stats_;
  model::SignalPrior prior_;
  MampOptions opts_;
  double sigma2_;
  int n_;
  double dsig_;
  CovarianceWindow cov_;
  std::vector<CVec> x_hist_;
  std::vector<double> vbar_hist_;  // damped variance of every past estimate
  std::vector<double> theta_scaled_hist_, xi_hist_;
  double v_bar_prev_ = 0.0;
  int warnings_ = 0;
};

namespace detail {

// Residual window over full vectors, shared by both centralized runners.
struct FullResiduals {
  const CMat& a;
  const CVec& y;
  int maxlen;
  std::deque<CVec> h_window;
  long long mv = 0;

  FullResiduals(const CMat& a_, const CVec& y_, int window_len)
      : a(a_), y(y_), maxlen(window_len - 1) {}

  // h_t = y - A x_t enters the window; returns hhat^H h_j (oldest first) and
  // ||hhat||^2 for hhat = y - A cand.
  std::pair<std::vector<Complex>, double> cov_scalars(const CVec& x_t, const CVec& cand) {
    CVec h = y - a * x_t;
    ++mv;
    h_window.push_back(std::move(h));
    if (static_cast<int>(h_window.size()) > maxlen && maxlen >= 0) h_window.pop_front();
    CVec hhat = y - a * cand;
    ++mv;
    std::vector<Complex> cross;
    cross.reserve(h_window.size());
    for (const auto& hw : h_window) cross.push_back(hhat.dot(hw));
    return {std::move(cross), hhat.squaredNorm()};
  }
};

enum class MleForm { MaterializedB, Variational };

inline Trajectory run_centralized_impl(const model::LinearSystem& sys,
                                       const model::SignalPrior& prior,
                                       const spectral::SpectralStats& stats,
                                       const MampOptions& opts, MleForm form) {
  const int n = sys.cols();
  const int m = sys.rows();
  ReplicaCore core(stats, prior, sys.sigma2, n, sys.y.squaredNorm(), opts);
  FullResiduals resid(sys.A, sys.y, opts.window_len);
  Trajectory traj;

  // MLE state for either form
  CMat b_mat;
  CVec z = CVec::Zero(m);        // materialized-B form
  CVec z_hat = CVec::Zero(m);    // variational form
  CVec r_hat_prev = CVec::Zero(n);
  if (form == MleForm::MaterializedB) {
    b_mat = -(sys.A * sys.A.adjoint());
    b_mat.diagonal().array() += stats.lambda_dagger;
  }

  for (int t = 1; t <= opts.iterations; ++t) {
    auto par = core.begin_iter(t);
    const CVec& x_t = core.x_current(t);
    CVec rhat_sum;
    if (form == MleForm::MaterializedB) {
      z = par.theta * (b_mat * z) + par.xi * (sys.y - sys.A * x_t);
      rhat_sum = sys.A.adjoint() * z;
      traj.mv_mle += 3;
    } else {
      z_hat = par.theta * stats.lambda_dagger * z_hat + par.xi * sys.y -
              sys.A * (par.theta * r_hat_prev + par.xi * x_t);
      rhat_sum = sys.A.adjoint() * z_hat;
      r_hat_prev = rhat_sum;
      traj.mv_mle += 2;
    }
    CVec r_t = core.combine_memory(rhat_sum, par);
    DenoiserOutput den = core.denoise(r_t, par);

    IterationRecord rec;
    rec.iter = t;
    rec.mse_linear = (den.x_post - sys.x_true).squaredNorm() / n;
    rec.mse_db = db10(rec.mse_linear);
    rec.v_hat = den.v_post;
    rec.theta = par.theta;
    rec.epsilon = par.epsilon;

    auto [cross, diag] = resid.cov_scalars(x_t, den.x_orth);
    auto damp = core.damp_and_update(cross, diag, den.x_orth);
    rec.v_bar = damp.v_bar;
    rec.window = damp.window_used;
    traj.records.push_back(rec);
    if (t == opts.iterations) traj.x_post_final = den.x_post;
  }
  traj.mv_resid = resid.mv;
  traj.warnings = core.warnings();
  return traj;
}

}  // namespace detail

// Original-form MAMP: z_t = theta_t B z_{t-1} + xi_t (y - A x_t) with B
// materialized. Serves as the algebraic oracle for the variational form.
inline Trajectory run_centralized(const model::LinearSystem& sys, const model::SignalPrior& prior,
                                  const spectral::SpectralStats& stats, const MampOptions& opts) {
  return detail::run_centralized_impl(sys, prior, stats, opts, detail::MleForm::MaterializedB);
}

// Variational MAMP: two single-step matrix-by-vector products per iteration.
inline Trajectory run_variational(const model::LinearSystem& sys, const model::SignalPrior& prior,
                                  const spectral::SpectralStats& stats, const MampOptions& opts) {
  return detail::run_centralized_impl(sys, prior, stats, opts, detail::MleForm::Variational);
}

}  // namespace dmamp::solver
