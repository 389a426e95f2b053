#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <utility>
#include <vector>

#include "dmamp/common.hpp"

namespace dmamp::consensus {

// Loopless bidirectional graph. Node ids are 1..K externally, 0-based inside.
// Construction rejects anything that is not a connected tree and records the
// diameter computed from the adjacency.
class NetworkGraph {
 public:
  NetworkGraph(int node_count, std::vector<std::pair<int, int>> edges_1based)
      : k_(node_count), adj_(node_count) {
    require(node_count >= 1, "NetworkGraph: need at least one node");
    for (auto [a, b] : edges_1based) {
      require(a >= 1 && a <= k_ && b >= 1 && b <= k_ && a != b, "NetworkGraph: bad edge");
      adj_[a - 1].push_back(b - 1);
      adj_[b - 1].push_back(a - 1);
      edges_.emplace_back(a - 1, b - 1);
    }
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      require(std::adjacent_find(nb.begin(), nb.end()) == nb.end(),
              "NetworkGraph: duplicate edge");
    }
    require(static_cast<int>(edges_.size()) == k_ - 1,
            "NetworkGraph: a loopless connected graph on K nodes has exactly K-1 edges");
    computeDistances();  // also verifies connectivity
  }

  int node_count() const { return k_; }
  int diameter() const { return diameter_; }
  const std::vector<int>& neighbors(int node) const { return adj_[node]; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  int eccentricity(int node) const { return ecc_[node]; }
  int distance(int a, int b) const { return dist_[a][b]; }

 private:
  void computeDistances() {
    dist_.assign(k_, std::vector<int>(k_, -1));
    ecc_.assign(k_, 0);
    for (int s = 0; s < k_; ++s) {
      std::deque<int> q{s};
      dist_[s][s] = 0;
      while (!q.empty()) {
        int u = q.front();
        q.pop_front();
        for (int v : adj_[u])
          if (dist_[s][v] < 0) {
            dist_[s][v] = dist_[s][u] + 1;
            q.push_back(v);
          }
      }
      for (int v = 0; v < k_; ++v) {
        require(dist_[s][v] >= 0, "NetworkGraph: graph is disconnected");
        ecc_[s] = std::max(ecc_[s], dist_[s][v]);
      }
    }
    diameter_ = *std::max_element(ecc_.begin(), ecc_.end());
  }

  int k_;
  std::vector<std::vector<int>> adj_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> dist_;
  std::vector<int> ecc_;
  int diameter_ = 0;
};

inline NetworkGraph star_graph(int k) {
  std::vector<std::pair<int, int>> e;
  for (int i = 2; i <= k; ++i) e.emplace_back(1, i);
  return NetworkGraph(k, e);
}

inline NetworkGraph path_graph(int k) {
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < k; ++i) e.emplace_back(i, i + 1);
  return NetworkGraph(k, e);
}

// parent(i) = (i-2)/branching + 1 for i >= 2. branching=4 with K=8 gives the
// diameter-3 topology used in the experiments.
inline NetworkGraph balanced_tree(int k, int branching) {
  require(branching >= 1, "balanced_tree: branching must be >= 1");
  std::vector<std::pair<int, int>> e;
  for (int i = 2; i <= k; ++i) e.emplace_back((i - 2) / branching + 1, i);
  return NetworkGraph(k, e);
}

// Random attachment tree: node i links to a uniformly chosen earlier node.
inline NetworkGraph random_tree(int k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::pair<int, int>> e;
  for (int i = 2; i <= k; ++i) {
    int parent = 1 + static_cast<int>(rng.uniform() * (i - 1));
    parent = std::min(parent, i - 1);
    e.emplace_back(parent, i);
  }
  return NetworkGraph(k, e);
}

// Message state for one payload type. Payload must support zero-like
// construction from a sample, +=, and scalar * (double); double and Eigen
// vectors both qualify via the traits below.
namespace detail {

inline double zero_like(double) { return 0.0; }
inline Complex zero_like(const Complex&) { return {0.0, 0.0}; }
template <typename Scalar, int R, int C>
Eigen::Matrix<Scalar, R, C> zero_like(const Eigen::Matrix<Scalar, R, C>& v) {
  return Eigen::Matrix<Scalar, R, C>::Zero(v.rows(), v.cols());
}

}  // namespace detail

template <typename Payload>
struct ConsensusState {
  // Directed edge messages, indexed by [node][neighbor-slot].
  std::vector<std::vector<Payload>> omega;
  std::vector<std::vector<long long>> upsilon;
  std::vector<Payload> omega_hat;  // per-node estimates
  int rounds_run = 0;

  static ConsensusState init(const NetworkGraph& g, const Payload& sample) {
    ConsensusState st;
    const int k = g.node_count();
    st.omega.resize(k);
    st.upsilon.resize(k);
    st.omega_hat.assign(k, detail::zero_like(sample));
    for (int u = 0; u < k; ++u) {
      st.omega[u].assign(g.neighbors(u).size(), detail::zero_like(sample));
      st.upsilon[u].assign(g.neighbors(u).size(), 0);
    }
    return st;
  }
};

// One synchronous round: every directed edge message is recomputed from the
// previous round's messages, then node estimates are refreshed from all
// neighbors. Round 1 starting from an all-zero state sends omega = x_k,
// upsilon = 1 on every edge.
template <typename Payload>
void cp_round(const NetworkGraph& g, ConsensusState<Payload>& st,
              const std::vector<Payload>& values) {
  const int k = g.node_count();
  require(static_cast<int>(values.size()) == k, "cp_round: one value per node required");
  auto next_omega = st.omega;
  auto next_upsilon = st.upsilon;
  // slot of node u in v's neighbor list
  auto slot_of = [&](int v, int u) {
    const auto& nb = g.neighbors(v);
    return static_cast<int>(std::lower_bound(nb.begin(), nb.end(), u) - nb.begin());
  };
  for (int u = 0; u < k; ++u) {
    const auto& nb = g.neighbors(u);
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const int j = nb[s];
      Payload acc = values[u];
      long long cnt = 1;
      for (std::size_t s2 = 0; s2 < nb.size(); ++s2) {
        const int i = nb[s2];
        if (i == j) continue;
        const int back = slot_of(i, u);
        if (st.upsilon[i][back] > 0) {
          acc += static_cast<double>(st.upsilon[i][back]) * st.omega[i][back];
          cnt += st.upsilon[i][back];
        }
      }
      next_omega[u][s] = (1.0 / static_cast<double>(cnt)) * acc;
      next_upsilon[u][s] = cnt;
    }
  }
  st.omega.swap(next_omega);
  st.upsilon.swap(next_upsilon);
  for (int u = 0; u < k; ++u) {
    const auto& nb = g.neighbors(u);
    Payload acc = values[u];
    long long cnt = 1;
    for (std::size_t s = 0; s < nb.size(); ++s) {
      const int i = nb[s];
      const int back = slot_of(i, u);
      if (st.upsilon[i][back] > 0) {
        acc += static_cast<double>(st.upsilon[i][back]) * st.omega[i][back];
        cnt += st.upsilon[i][back];
      }
    }
    st.omega_hat[u] = (1.0 / static_cast<double>(cnt)) * acc;
  }
  ++st.rounds_run;
}

// Runs `rounds` consensus rounds; with rounds >= diameter the estimates equal
// the exact global average at every node. Fewer rounds are allowed on purpose.
template <typename Payload>
std::vector<Payload> global_average(const NetworkGraph& g, const std::vector<Payload>& values,
                                    int rounds) {
  require(rounds >= 1, "global_average: need at least one round");
  auto st = ConsensusState<Payload>::init(g, values.at(0));
  for (int r = 0; r < rounds; ++r) cp_round(g, st, values);
  return st.omega_hat;
}

template <typename Payload>
std::vector<Payload> global_sum(const NetworkGraph& g, const std::vector<Payload>& values,
                                int rounds) {
  auto avg = global_average(g, values, rounds);
  const double k = static_cast<double>(g.node_count());
  for (auto& v : avg) v = k * v;
  return avg;
}

}  // namespace dmamp::consensus
