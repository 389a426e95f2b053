#pragma once

#include <cmath>
#include <vector>

#include "dmamp/common.hpp"
#include "dmamp/consensus.hpp"
#include "dmamp/model.hpp"

namespace dmamp::spectral {

// Eigenvalues of A A^H (ascending, length M), computed through the smaller
// Gram matrix. For M > N the spectrum is padded with the structural zeros.
inline RVec dense_gram_eigs(const CMat& a) {
  const Eigen::Index m = a.rows(), n = a.cols();
  CMat gram = (m <= n) ? CMat(a * a.adjoint()) : CMat(a.adjoint() * a);
  Eigen::SelfAdjointEigenSolver<CMat> es(gram);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense_gram_eigs: eig failed");
  RVec d = es.eigenvalues();
  if (m <= n) return d;
  RVec full = RVec::Zero(m);
  full.tail(n) = d;
  return full;
}

// lambda_t = (1/N) tr{(A A^H)^t} from a given spectrum of A A^H.
inline std::vector<double> moments_from_eigs(const RVec& eigs, int n, int tau_max) {
  require(tau_max >= 1, "moments: tau_max must be >= 1");
  std::vector<double> lam(tau_max + 1, 0.0);
  lam[0] = static_cast<double>(eigs.size()) / n;  // delta
  RVec p = RVec::Ones(eigs.size());
  for (int t = 1; t <= tau_max; ++t) {
    p = p.cwiseProduct(eigs);
    lam[t] = p.sum() / n;
  }
  return lam;
}

// Desk-scale oracle: lambda_1..lambda_tau via a dense eigendecomposition.
inline std::vector<double> exact_moments(const CMat& a, int tau_max) {
  auto lam = moments_from_eigs(dense_gram_eigs(a), static_cast<int>(a.cols()), tau_max);
  return {lam.begin() + 1, lam.end()};
}

// Stochastic recursion s_t = A s_{t-1} (t odd) / A^H s_{t-1} (t even) with
// s_0 ~ CN(0, I/N); lambda_t ~= ||s_t||^2. `realizations` columns are run in
// one block and averaged to cut the estimator's variance at finite N.
inline std::vector<double> recursion_moments(const CMat& a, int tau_max, std::uint64_t seed,
                                             int realizations = 1) {
  require(tau_max >= 1, "recursion_moments: tau_max must be >= 1");
  require(realizations >= 1, "recursion_moments: realizations must be >= 1");
  const Eigen::Index n = a.cols();
  Rng rng(seed);
  CMat s = rng.cnormal_mat(n, realizations, 1.0 / static_cast<double>(n));
  std::vector<double> lam(tau_max);
  for (int t = 1; t <= tau_max; ++t) {
    s = (t % 2 == 1) ? CMat(a * s) : CMat(a.adjoint() * s);
    lam[t - 1] = s.squaredNorm() / realizations;
  }
  return lam;
}

// Row-block form of the same recursion: odd steps concatenate the per-node
// products A_k s (ascending node id), even steps sum A_k^H applied to each
// node's own block. Matches recursion_moments on the same seed.
inline std::vector<double> approx_moments_distributed(const std::vector<model::NodeShard>& shards,
                                                      const consensus::NetworkGraph& graph,
                                                      int tau_max, std::uint64_t seed,
                                                      int realizations = 1) {
  require(!shards.empty(), "approx_moments_distributed: need at least one shard");
  require(graph.node_count() == static_cast<int>(shards.size()),
          "approx_moments_distributed: graph size does not match shard count");
  require(tau_max >= 1 && realizations >= 1, "approx_moments_distributed: bad arguments");
  const Eigen::Index n = shards.front().A_k.cols();
  Eigen::Index m = 0;
  for (const auto& sh : shards) m += sh.A_k.rows();

  Rng rng(seed);
  CMat s_even = rng.cnormal_mat(n, realizations, 1.0 / static_cast<double>(n));  // s_0
  CMat s_odd(m, realizations);
  std::vector<double> lam(tau_max);
  for (int t = 1; t <= tau_max; ++t) {
    if (t % 2 == 1) {
      Eigen::Index row = 0;
      for (const auto& sh : shards) {
        s_odd.middleRows(row, sh.A_k.rows()) = sh.A_k * s_even;
        row += sh.A_k.rows();
      }
      lam[t - 1] = s_odd.squaredNorm() / realizations;
    } else {
      CMat acc = CMat::Zero(n, realizations);
      Eigen::Index row = 0;
      for (const auto& sh : shards) {
        acc += sh.A_k.adjoint() * s_odd.middleRows(row, sh.A_k.rows());
        row += sh.A_k.rows();
      }
      s_even = std::move(acc);
      lam[t - 1] = s_even.squaredNorm() / realizations;
    }
  }
  return lam;
}

// Matrix-free estimates of w_j = (1/N) tr{A^H B^j A} and
// w2_j = (1/N) tr{(A A^H)^2 B^j} driven by the same s_0 as the moment
// recursion: with s1 = A s0, s2 = A^H s1 and u_j = B^j s1,
//   w_j = s1^H u_j,  w2_j = s2^H (A^H u_j).
// Sharing s_0 makes lambda-hat, w-hat and w2-hat exact moments of one
// empirical spectral measure (in particular w_0 = lambda_1 holds exactly),
// which keeps every derived variance nonnegative; expanding noisy moments
// binomially does not.
struct RecursionTables {
  std::vector<double> w_tilde;   // w_c / dagger^c, 0..c_max
  std::vector<double> w2_tilde;  // w2_c / dagger^c, 0..c_max
};

inline RecursionTables approx_w_tables_distributed(const std::vector<model::NodeShard>& shards,
                                                   double lambda_dagger, int c_max,
                                                   std::uint64_t seed, int realizations = 1) {
  require(!shards.empty(), "approx_w_tables: need at least one shard");
  require(c_max >= 0 && realizations >= 1, "approx_w_tables: bad arguments");
  const Eigen::Index n = shards.front().A_k.cols();
  Eigen::Index m = 0;
  for (const auto& sh : shards) m += sh.A_k.rows();
  std::vector<Eigen::Index> row0;
  {
    Eigen::Index r = 0;
    for (const auto& sh : shards) {
      row0.push_back(r);
      r += sh.A_k.rows();
    }
  }
  auto apply_a = [&](const CMat& x) {  // rows concatenated ascending node id
    CMat out(m, x.cols());
    for (std::size_t i = 0; i < shards.size(); ++i)
      out.middleRows(row0[i], shards[i].A_k.rows()) = shards[i].A_k * x;
    return out;
  };
  auto apply_adj = [&](const CMat& x) {  // sum of per-node adjoint products
    CMat out = CMat::Zero(n, x.cols());
    for (std::size_t i = 0; i < shards.size(); ++i)
      out += shards[i].A_k.adjoint() * x.middleRows(row0[i], shards[i].A_k.rows());
    return out;
  };

  Rng rng(seed);
  CMat s0 = rng.cnormal_mat(n, realizations, 1.0 / static_cast<double>(n));
  CMat s1 = apply_a(s0);
  CMat s2 = apply_adj(s1);
  RecursionTables out;
  out.w_tilde.resize(c_max + 1);
  out.w2_tilde.resize(c_max + 1);
  CMat u = s1;  // u_c = (B/dagger)^c s1, bounded since ||B|| <~ dagger
  for (int c = 0; c <= c_max; ++c) {
    out.w_tilde[c] = s1.cwiseProduct(u.conjugate()).sum().real() / realizations;
    CMat q = apply_adj(u);
    out.w2_tilde[c] = s2.cwiseProduct(q.conjugate()).sum().real() / realizations;
    if (c < c_max) u -= apply_a(q) / lambda_dagger;
  }
  return out;
}

// (lambda_min_low, lambda_max_up) = (0, (N lambda_tau)^(1/tau)).
inline std::pair<double, double> lambda_bounds(double lambda_tau, int tau, int n) {
  require(lambda_tau > 0.0 && tau >= 1, "lambda_bounds: need lambda_tau > 0 and tau >= 1");
  const double up = std::exp((std::log(static_cast<double>(n)) + std::log(lambda_tau)) / tau);
  return {0.0, up};
}

// b_t = sum_{i=0}^{t} C(t,i) (-1)^i dagger^(t-i) lambda_i, with lambda_0 = delta
// already in lambda[0]. Equals (1/N) tr{(dagger I - A A^H)^t}.
inline std::vector<double> b_coeffs(const std::vector<double>& lambda, double lambda_dagger,
                                    int t_max) {
  require(static_cast<int>(lambda.size()) >= t_max + 1,
          "b_coeffs: need lambda_0..lambda_t_max");
  std::vector<double> binom(t_max + 1, 0.0);
  std::vector<double> b(t_max + 1, 0.0);
  for (int t = 0; t <= t_max; ++t) {
    // Pascal row update in place (right to left).
    binom[t] = 1.0;
    for (int i = t - 1; i >= 1; --i) binom[i] += binom[i - 1];
    double acc = 0.0;
    double sign = 1.0;
    for (int i = 0; i <= t; ++i) {
      acc += binom[i] * sign * std::pow(lambda_dagger, t - i) * lambda[i];
      sign = -sign;
    }
    b[t] = acc;
  }
  return b;
}

// w_i = dagger * b_i - b_{i+1} = (1/N) tr{A^H (dagger I - A A^H)^i A}.
inline std::vector<double> w_coeffs(const std::vector<double>& b, double lambda_dagger) {
  require(b.size() >= 2, "w_coeffs: need at least b_0 and b_1");
  std::vector<double> w(b.size() - 1);
  for (std::size_t i = 0; i + 1 < b.size(); ++i) w[i] = lambda_dagger * b[i] - b[i + 1];
  return w;
}

struct OrthoCoeffs {
  std::vector<double> p;         // p[i] multiplies x_{i+1}
  std::vector<double> vartheta;  // vartheta_{t,i}, same indexing
  double epsilon = 0.0;
};

// p_{t,i} = vartheta_{t,i} w_{t-i} with vartheta_{t,i} = xi_i prod_{tau=i+1}^t theta_tau,
// epsilon_t = sum_i p_{t,i}. theta/xi carry entries 1..t.
inline OrthoCoeffs ortho_coeffs(const std::vector<double>& theta, const std::vector<double>& xi,
                                const std::vector<double>& w) {
  const int t = static_cast<int>(theta.size());
  require(static_cast<int>(xi.size()) == t, "ortho_coeffs: theta/xi length mismatch");
  require(static_cast<int>(w.size()) >= t, "ortho_coeffs: need w_0..w_{t-1}");
  OrthoCoeffs out;
  out.p.resize(t);
  out.vartheta.resize(t);
  double prod = 1.0;  // prod_{tau=i+1}^{t} theta_tau, built from i=t downward
  for (int i = t; i >= 1; --i) {
    out.vartheta[i - 1] = xi[i - 1] * prod;
    out.p[i - 1] = out.vartheta[i - 1] * w[t - i];
    prod *= theta[i - 1];
  }
  for (double v : out.p) out.epsilon += v;
  return out;
}

// Everything the solver needs about the spectrum of A A^H. Besides the
// published b/w coefficients this carries w2[c] = (1/N) tr{(A A^H)^2 B^c},
// which the deterministic tracking of the memory-LE output variance needs.
struct SpectralStats {
  double delta = 0.0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double lambda_dagger = 0.0;
  std::vector<double> lambda;      // lambda_0 = delta, then lambda_1..
  std::vector<double> log_lambda;  // log(lambda_t); stays finite when lambda_t overflows
  std::vector<double> b;           // (1/N) tr{B^t}, 0..2T-1
  // Large powers of B overflow doubles long before the solver stops caring,
  // so the tables the iteration consumes are stored in dagger-normalized
  // form: w_tilde[c] = w_c / dagger^c, w2_tilde[c] = w2_c / dagger^c.
  std::vector<double> w;         // raw w_c where representable (w[0] always)
  std::vector<double> w_tilde;   // 0..2T-2
  std::vector<double> w2_tilde;  // 0..2T-2
  int tau = 0;  // exponent used for the upper bound (recursion mode)
  bool exact_mode = true;
  int realizations = 1;
};

// Exact mode: the dense spectrum supplies lambda_min/lambda_max, the moments
// and cancellation-free traces for b and the normalized w tables.
inline SpectralStats make_stats_exact(const RVec& gram_eigs, int n, int t_need, int tau) {
  SpectralStats st;
  st.exact_mode = true;
  st.tau = tau;
  st.delta = static_cast<double>(gram_eigs.size()) / n;
  const int b_max = std::max(t_need + 1, 2 * t_need - 1);
  const int depth = std::max(tau, b_max + 1);
  st.lambda_min = gram_eigs.minCoeff();
  st.lambda_max = gram_eigs.maxCoeff();
  st.lambda_dagger = 0.5 * (st.lambda_max + st.lambda_min);

  // moments, with a log-domain copy that survives lambda_max^t overflow
  st.lambda.assign(depth + 1, 0.0);
  st.log_lambda.assign(depth + 1, 0.0);
  st.lambda[0] = st.delta;
  st.log_lambda[0] = std::log(st.delta);
  {
    const double dmax = std::max(st.lambda_max, 1e-300);
    RVec ratio = gram_eigs / dmax;
    RVec pw = RVec::Ones(gram_eigs.size());
    for (int t = 1; t <= depth; ++t) {
      pw = pw.cwiseProduct(ratio);
      st.log_lambda[t] = t * std::log(dmax) + std::log(pw.sum() / n);
      st.lambda[t] = std::exp(st.log_lambda[t]);
    }
  }

  st.b.assign(b_max + 1, 0.0);
  st.w.assign(b_max, 0.0);
  st.w_tilde.assign(b_max, 0.0);
  st.w2_tilde.assign(b_max, 0.0);
  if (st.lambda_dagger <= 0.0) {  // zero operator
    st.b[0] = st.delta;
    return st;
  }
  RVec shifted_norm =
      ((st.lambda_dagger - gram_eigs.array()) / st.lambda_dagger).matrix();
  RVec pw = RVec::Ones(gram_eigs.size());
  double dag_pow = 1.0;  // dagger^t, saturates to inf harmlessly
  for (int t = 0; t <= b_max; ++t) {
    st.b[t] = pw.sum() / n * dag_pow;
    if (t < b_max) {
      st.w_tilde[t] = pw.dot(gram_eigs) / n;
      st.w2_tilde[t] = pw.dot(gram_eigs.cwiseProduct(gram_eigs)) / n;
      st.w[t] = st.w_tilde[t] * dag_pow;
      pw = pw.cwiseProduct(shifted_norm);
    }
    dag_pow *= st.lambda_dagger;
  }
  return st;
}

inline SpectralStats make_stats_exact(const CMat& a, int t_need, int tau) {
  return make_stats_exact(dense_gram_eigs(a), static_cast<int>(a.cols()), t_need, tau);
}

// Recursion mode: approximate moments, the (0, (N lambda_tau)^(1/tau)) bounds,
// and b/w/w2 through the moment expansions.
inline SpectralStats make_stats_recursion(const std::vector<model::NodeShard>& shards,
                                          const consensus::NetworkGraph& graph, int n, int m,
                                          int t_need, int tau, std::uint64_t seed,
                                          int realizations = 1) {
  SpectralStats st;
  st.exact_mode = false;
  st.tau = tau;
  st.realizations = realizations;
  st.delta = static_cast<double>(m) / n;
  const int b_max = std::max(t_need + 1, 2 * t_need - 1);
  const int depth = std::max(tau, b_max + 1);

  // Proposition-2 recursion in log scale: rescale the block to unit average
  // column energy each step so arbitrarily deep moments stay representable.
  st.lambda.assign(depth + 1, 0.0);
  st.log_lambda.assign(depth + 1, 0.0);
  st.lambda[0] = st.delta;
  st.log_lambda[0] = std::log(st.delta);
  {
    Eigen::Index mm = 0;
    std::vector<Eigen::Index> row0;
    for (const auto& sh : shards) {
      row0.push_back(mm);
      mm += sh.A_k.rows();
    }
    Rng rng(seed);
    CMat s_even = rng.cnormal_mat(n, realizations, 1.0 / static_cast<double>(n));
    CMat s_odd(mm, realizations);
    double log_scale = 0.0;
    for (int t = 1; t <= depth; ++t) {
      if (t % 2 == 1) {
        for (std::size_t i = 0; i < shards.size(); ++i)
          s_odd.middleRows(row0[i], shards[i].A_k.rows()) = shards[i].A_k * s_even;
      } else {
        CMat acc = CMat::Zero(n, realizations);
        for (std::size_t i = 0; i < shards.size(); ++i)
          acc += shards[i].A_k.adjoint() * s_odd.middleRows(row0[i], shards[i].A_k.rows());
        s_even = std::move(acc);
      }
      CMat& cur = (t % 2 == 1) ? s_odd : s_even;
      const double e = cur.squaredNorm() / realizations;
      st.log_lambda[t] = std::log(e) + log_scale;
      st.lambda[t] = std::exp(st.log_lambda[t]);
      const double f = std::sqrt(e);
      if (f > 0.0) {
        cur /= f;
        log_scale += std::log(e);
      }
    }
  }
  require(std::isfinite(st.log_lambda[tau]), "make_stats_recursion: degenerate moments");
  st.lambda_min = 0.0;
  st.lambda_max = std::exp((std::log(static_cast<double>(n)) + st.log_lambda[tau]) / tau);
  st.lambda_dagger = 0.5 * (st.lambda_max + st.lambda_min);
  st.b = b_coeffs(st.lambda, st.lambda_dagger, std::min(b_max, 40));
  auto tables = approx_w_tables_distributed(shards, st.lambda_dagger, b_max - 1, seed,
                                            realizations);
  st.w_tilde = std::move(tables.w_tilde);
  st.w2_tilde = std::move(tables.w2_tilde);
  st.w.resize(st.w_tilde.size());
  double dag_pow = 1.0;
  for (std::size_t c = 0; c < st.w_tilde.size(); ++c) {
    st.w[c] = st.w_tilde[c] * dag_pow;
    dag_pow *= st.lambda_dagger;
  }
  return st;
}

}  // namespace dmamp::spectral
