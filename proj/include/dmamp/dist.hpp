#pragma once

#include <deque>
#include <utility>
#include <vector>

#include "dmamp/common.hpp"
#include "dmamp/consensus.hpp"
#include "dmamp/mamp.hpp"
#include "dmamp/model.hpp"
#include "dmamp/spectral.hpp"

namespace dmamp::dist {

// Exact accounting of scalars crossing links. A complex number counts as one
// scalar, matching the per-iteration payload units of the published cost
// table. `exact` counts every scalar actually sent (the covariance exchange
// carries min(t+1, L) scalars per direction at iteration t); `table` counts
// one covariance scalar per direction per iteration, reproducing the
// closed-form totals. Consensus message counts (upsilon) are bookkeeping
// integers and are not billed in either mode.
struct CommsLedger {
  struct Entry {
    int iter = 0;
    long long rhat_exact = 0, cov_exact = 0, lambda_exact = 0;
    long long rhat_table = 0, cov_table = 0, lambda_table = 0;

    long long exact() const { return rhat_exact + cov_exact + lambda_exact; }
    long long table() const { return rhat_table + cov_table + lambda_table; }
  };
  std::vector<Entry> iters;

  long long exact_total() const {
    long long s = 0;
    for (const auto& e : iters) s += e.exact();
    return s;
  }
  long long table_total() const {
    long long s = 0;
    for (const auto& e : iters) s += e.table();
    return s;
  }
};

// Per-node solver state. A node only ever holds its own shard; everything
// else it sees arrives through a global-summation step.
struct NodeState {
  model::NodeShard shard;
  CVec z_hat_k;               // M_k
  std::deque<CVec> h_window;  // residual blocks h_{t',k}, newest last
  int h_window_cap = 2;
  long long mv = 0;

  explicit NodeState(model::NodeShard sh, int window_len)
      : shard(std::move(sh)),
        z_hat_k(CVec::Zero(shard.A_k.rows())),
        h_window_cap(window_len - 1) {}

  // zhat_{t,k} = theta lambda^dagger zhat_{t-1,k} + xi y_k - A_k (theta rhat_{t-1} + xi x_t);
  // rhat_{t,k} = A_k^H zhat_{t,k}. Uses only (A_k, y_k).
  CVec local_mle(double theta, double xi, double lambda_dagger, const CVec& r_hat_prev,
                 const CVec& x_t) {
    z_hat_k = theta * lambda_dagger * z_hat_k + xi * shard.y_k -
              shard.A_k * (theta * r_hat_prev + xi * x_t);
    mv += 2;
    return shard.A_k.adjoint() * z_hat_k;
  }

  // hhat_{t+1,k} = y_k - A_k xhat_{t+1}; h_{t,k} = y_k - A_k x_t (pushed into
  // the window). Returns the local covariance scalars, cross terms oldest
  // first and ||hhat_k||^2 last.
  CVec local_cov_scalars(const CVec& x_t, const CVec& candidate) {
    CVec h = shard.y_k - shard.A_k * x_t;
    ++mv;
    h_window.push_back(std::move(h));
    if (static_cast<int>(h_window.size()) > h_window_cap && h_window_cap >= 0)
      h_window.pop_front();
    CVec hhat = shard.y_k - shard.A_k * candidate;
    ++mv;
    CVec scalars(static_cast<Eigen::Index>(h_window.size()) + 1);
    Eigen::Index j = 0;
    for (const auto& hw : h_window) scalars(j++) = hhat.dot(hw);
    scalars(j) = Complex(hhat.squaredNorm(), 0.0);
    return scalars;
  }
};

struct DistResult {
  solver::Trajectory trajectory;  // node 1's view
  CommsLedger ledger;
  double max_replica_dev = 0.0;   // largest cross-node deviation seen (FD only)
};

namespace detail {

inline void require_star(const consensus::NetworkGraph& g) {
  const int k = g.node_count();
  require(static_cast<int>(g.neighbors(0).size()) == k - 1,
          "run_dmamp: graph must be a star centered on node 1");
}

inline std::pair<std::vector<Complex>, double> split_scalars(const CVec& summed) {
  std::vector<Complex> cross(summed.size() - 1);
  for (Eigen::Index i = 0; i + 1 < summed.size(); ++i) cross[i] = summed(i);
  return {std::move(cross), summed(summed.size() - 1).real()};
}

}  // namespace detail

// Algorithm-1 runtime: local MLE at every node, gather/sum at the central
// node (ascending node id), broadcast of the summed results, local NLE.
// Broadcast replicas are byte-identical, so the replicated computation is
// carried once. x_true is simulator-side instrumentation for the MSE record;
// nodes never read it.
inline DistResult run_dmamp(const std::vector<model::NodeShard>& shards,
                            const consensus::NetworkGraph& star,
                            const model::SignalPrior& prior,
                            const spectral::SpectralStats& stats, double sigma2,
                            const solver::MampOptions& opts, const CVec& x_true) {
  const int k = static_cast<int>(shards.size());
  require(star.node_count() == k, "run_dmamp: graph/shard size mismatch");
  if (k > 1) detail::require_star(star);
  const int n = static_cast<int>(shards.front().A_k.cols());
  const long long links = k - 1;

  std::vector<NodeState> nodes;
  nodes.reserve(k);
  double y_norm2 = 0.0;
  for (const auto& sh : shards) {
    y_norm2 += sh.y_k.squaredNorm();
    nodes.emplace_back(sh, opts.window_len);
  }

  solver::ReplicaCore core(stats, prior, sigma2, n, y_norm2, opts);
  DistResult out;
  CVec r_hat_prev = CVec::Zero(n);

  for (int t = 1; t <= opts.iterations; ++t) {
    CommsLedger::Entry led;
    led.iter = t;
    auto par = core.begin_iter(t);
    const CVec& x_t = core.x_current(t);

    CVec rhat_sum = CVec::Zero(n);
    for (auto& node : nodes) rhat_sum += node.local_mle(par.theta, par.xi, stats.lambda_dagger,
                                                        r_hat_prev, x_t);
    r_hat_prev = rhat_sum;
    led.rhat_exact = led.rhat_table = 2 * links * n;  // parts up, sum down

    CVec r_t = core.combine_memory(rhat_sum, par);
    solver::DenoiserOutput den = core.denoise(r_t, par);

    solver::IterationRecord rec;
    rec.iter = t;
    rec.mse_linear = (den.x_post - x_true).squaredNorm() / n;
    rec.mse_db = db10(std::max(rec.mse_linear, 1e-300));
    rec.v_hat = den.v_post;
    rec.theta = par.theta;
    rec.epsilon = par.epsilon;

    CVec scalars = CVec::Zero(core.window_past_size() + 1);
    for (auto& node : nodes) scalars += node.local_cov_scalars(x_t, den.x_orth);
    led.cov_exact = 2 * links * scalars.size();
    led.cov_table = 2 * links;

    auto [cross, diag] = detail::split_scalars(scalars);
    auto damp = core.damp_and_update(cross, diag, den.x_orth);
    rec.v_bar = damp.v_bar;
    rec.window = damp.window_used;
    rec.comm_exact = led.exact();
    rec.comm_table = led.table();
    out.trajectory.records.push_back(rec);
    out.ledger.iters.push_back(led);
    if (t == opts.iterations) out.trajectory.x_post_final = den.x_post;
  }
  for (auto& node : nodes) out.trajectory.mv_resid += node.mv;
  out.trajectory.warnings = core.warnings();
  return out;
}

// Algorithm-2 runtime: every global summation goes through Dprime rounds of
// consensus propagation on the (acyclic) graph, and every node advances on
// the estimate its own consensus produced. Node replicas agree only up to
// floating-point reduction order, so each node carries a full ReplicaCore.
// The reported trajectory is node 1's.
inline DistResult run_fdmamp(const std::vector<model::NodeShard>& shards,
                             const consensus::NetworkGraph& graph,
                             const model::SignalPrior& prior,
                             const spectral::SpectralStats& stats, double sigma2,
                             const solver::MampOptions& opts, int dprime, const CVec& x_true) {
  const int k = static_cast<int>(shards.size());
  require(graph.node_count() == k, "run_fdmamp: graph/shard size mismatch");
  require(dprime >= 1, "run_fdmamp: Dprime must be >= 1");
  const int n = static_cast<int>(shards.front().A_k.cols());
  const long long links = k - 1;
  const bool consensus_exact = dprime >= graph.diameter();

  std::vector<NodeState> nodes;
  nodes.reserve(k);
  double y_norm2 = 0.0;
  for (const auto& sh : shards) {
    y_norm2 += sh.y_k.squaredNorm();
    nodes.emplace_back(sh, opts.window_len);
  }
  std::vector<solver::ReplicaCore> cores(
      k, solver::ReplicaCore(stats, prior, sigma2, n, y_norm2, opts));
  std::vector<CVec> r_hat_prev(k, CVec::Zero(n));

  DistResult out;
  auto track_dev = [&](const std::vector<CVec>& per_node) {
    if (!consensus_exact) return;
    const double ref = std::max(per_node[0].norm(), 1e-300);
    for (int i = 1; i < k; ++i)
      out.max_replica_dev =
          std::max(out.max_replica_dev, (per_node[i] - per_node[0]).norm() / ref);
  };

  for (int t = 1; t <= opts.iterations; ++t) {
    CommsLedger::Entry led;
    led.iter = t;

    std::vector<solver::ReplicaCore::Params> par(k);
    std::vector<CVec> rhat_parts(k);
    for (int i = 0; i < k; ++i) {
      par[i] = cores[i].begin_iter(t);
      rhat_parts[i] = nodes[i].local_mle(par[i].theta, par[i].xi, stats.lambda_dagger,
                                         r_hat_prev[i], cores[i].x_current(t));
    }
    std::vector<CVec> rhat_sums =
        k > 1 ? consensus::global_sum(graph, rhat_parts, dprime) : rhat_parts;
    r_hat_prev = rhat_sums;
    led.rhat_exact = led.rhat_table = 2LL * dprime * links * n;
    track_dev(rhat_sums);

    std::vector<CVec> r(k);
    std::vector<solver::DenoiserOutput> den(k);
    for (int i = 0; i < k; ++i) {
      r[i] = cores[i].combine_memory(rhat_sums[i], par[i]);
      den[i] = cores[i].denoise(r[i], par[i]);
    }

    solver::IterationRecord rec;
    rec.iter = t;
    rec.mse_linear = (den[0].x_post - x_true).squaredNorm() / n;
    rec.mse_db = db10(std::max(rec.mse_linear, 1e-300));
    rec.v_hat = den[0].v_post;
    rec.theta = par[0].theta;
    rec.epsilon = par[0].epsilon;

    std::vector<CVec> scalar_parts(k);
    for (int i = 0; i < k; ++i)
      scalar_parts[i] = nodes[i].local_cov_scalars(cores[i].x_current(t), den[i].x_orth);
    std::vector<CVec> scalar_sums =
        k > 1 ? consensus::global_sum(graph, scalar_parts, dprime) : scalar_parts;
    led.cov_exact = 2LL * dprime * links * scalar_sums[0].size();
    led.cov_table = 2LL * dprime * links;
    track_dev(scalar_sums);

    for (int i = 0; i < k; ++i) {
      auto [cross, diag] = detail::split_scalars(scalar_sums[i]);
      auto damp = cores[i].damp_and_update(cross, diag, den[i].x_orth);
      if (i == 0) {
        rec.v_bar = damp.v_bar;
        rec.window = damp.window_used;
      }
    }
    rec.comm_exact = led.exact();
    rec.comm_table = led.table();
    out.trajectory.records.push_back(rec);
    out.ledger.iters.push_back(led);
    if (t == opts.iterations) out.trajectory.x_post_final = den[0].x_post;
  }
  for (auto& node : nodes) out.trajectory.mv_resid += node.mv;
  out.trajectory.warnings = cores[0].warnings();
  if (consensus_exact && out.max_replica_dev > 1e-6)
    throw std::runtime_error("run_fdmamp: node replicas diverged beyond tolerance");
  return out;
}

enum class LambdaMode { Central, Decentralized };

struct LambdaResult {
  std::vector<double> lambda;  // lambda_hat_1..lambda_hat_tau
  CommsLedger ledger;
};

// Distributed spectral-moment recursion across the runtime. Odd steps apply
// the local rows and concatenate (ascending node id); even steps apply the
// local adjoints to each node's own block and sum. Central mode gathers at
// node 1 and broadcasts; decentralized mode realizes both globals with
// Dprime consensus rounds (concatenation = sum of zero-padded vectors).
inline LambdaResult distributed_lambda(const std::vector<model::NodeShard>& shards,
                                       const consensus::NetworkGraph& graph, int tau_max,
                                       std::uint64_t seed, LambdaMode mode, int dprime = 1) {
  const int k = static_cast<int>(shards.size());
  require(graph.node_count() == k, "distributed_lambda: graph/shard size mismatch");
  require(tau_max >= 1, "distributed_lambda: tau_max must be >= 1");
  require(dprime >= 1, "distributed_lambda: Dprime must be >= 1");
  const int n = static_cast<int>(shards.front().A_k.cols());
  long long m = 0;
  std::vector<int> row0(k);
  for (int i = 0; i < k; ++i) {
    row0[i] = static_cast<int>(m);
    m += shards[i].A_k.rows();
  }
  const long long links = k - 1;

  Rng rng(seed);
  CVec s_even = rng.cnormal_vec(n, 1.0 / static_cast<double>(n));  // s_0 replica
  CVec s_odd(m);
  LambdaResult out;
  out.lambda.resize(tau_max);

  for (int t = 1; t <= tau_max; ++t) {
    CommsLedger::Entry led;
    led.iter = t;
    if (t % 2 == 1) {
      if (mode == LambdaMode::Central || k == 1) {
        for (int i = 0; i < k; ++i)
          s_odd.segment(row0[i], shards[i].A_k.rows()) = shards[i].A_k * s_even;
        led.lambda_exact = (m - shards[0].A_k.rows()) + links * m;  // blocks up, s_t down
      } else {
        std::vector<CVec> padded(k, CVec::Zero(m));
        for (int i = 0; i < k; ++i)
          padded[i].segment(row0[i], shards[i].A_k.rows()) = shards[i].A_k * s_even;
        s_odd = consensus::global_sum(graph, padded, dprime)[0];
        led.lambda_exact = 2LL * dprime * links * m;
      }
      out.lambda[t - 1] = s_odd.squaredNorm();
    } else {
      std::vector<CVec> parts(k);
      for (int i = 0; i < k; ++i)
        parts[i] = shards[i].A_k.adjoint() * s_odd.segment(row0[i], shards[i].A_k.rows());
      if (mode == LambdaMode::Central || k == 1) {
        CVec acc = CVec::Zero(n);
        for (const auto& p : parts) acc += p;
        s_even = std::move(acc);
        led.lambda_exact = 2 * links * n;  // parts up, sum down
      } else {
        s_even = consensus::global_sum(graph, parts, dprime)[0];
        led.lambda_exact = 2LL * dprime * links * n;
      }
      out.lambda[t - 1] = s_even.squaredNorm();
    }
    led.lambda_table = led.lambda_exact;
    out.ledger.iters.push_back(led);
  }
  return out;
}

}  // namespace dmamp::dist
