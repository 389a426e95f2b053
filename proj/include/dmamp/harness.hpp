#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dmamp/common.hpp"
#include "dmamp/consensus.hpp"
#include "dmamp/dist.hpp"
#include "dmamp/mamp.hpp"
#include "dmamp/model.hpp"
#include "dmamp/oamp.hpp"
#include "dmamp/spectral.hpp"

namespace dmamp::harness {

enum class Variant { Centralized, Variational, Dmamp, Fdmamp };
enum class MomentMode { Exact, Recursion };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Centralized: return "centralized";
    case Variant::Variational: return "variational";
    case Variant::Dmamp: return "dmamp";
    case Variant::Fdmamp: return "fdmamp";
  }
  return "?";
}

struct ExperimentConfig {
  int M = 1000;
  int N = 2000;
  int K = 8;
  double kappa = 10.0;
  double snr_db = 30.0;
  double mu = 0.1;
  double power = 1.0;
  int T = 30;
  int L = 3;
  int dprime = 3;
  int tau = 0;  // 0 means the 2T default
  std::string topology = "path";
  int branching = 4;
  std::uint64_t topology_seed = 1;
  std::vector<std::uint64_t> seeds = {1, 2,  3,  4,  5,  6,  7,  8,  9,  10,
                                      11, 12, 13, 14, 15, 16, 17, 18, 19, 20};
  std::vector<Variant> variants = {Variant::Centralized, Variant::Variational, Variant::Dmamp,
                                   Variant::Fdmamp};
  MomentMode moment_mode = MomentMode::Exact;
  int lambda_realizations = 1;
  std::string xi = "one";  // "one" or "constant:<c>"
  std::string out;         // output prefix; empty = no files

  int effective_tau() const { return tau > 0 ? tau : 2 * T; }

  void validate() const {
    require(M >= 1 && N >= 1, "config: M,N must be >= 1");
    require(K >= 1 && M % K == 0, "config: M must be divisible by K");
    require(kappa >= 1.0, "config: kappa must be >= 1");
    require(mu >= 0.0 && mu <= 1.0, "config: mu must lie in [0,1]");
    require(power > 0.0, "config: power must be positive");
    require(T >= 1 && L >= 1 && dprime >= 1, "config: T, L, Dprime must be >= 1");
    require(lambda_realizations >= 1, "config: lambda_realizations must be >= 1");
    require(topology == "star" || topology == "path" || topology == "balanced" ||
                topology == "random",
            "config: topology must be star|path|balanced|random");
    require(!seeds.empty(), "config: need at least one seed");
    require(!variants.empty(), "config: need at least one variant");
    require(xi == "one" || xi.rfind("constant:", 0) == 0, "config: xi must be one|constant:<c>");
  }

  solver::XiPolicy xi_policy() const {
    if (xi.rfind("constant:", 0) == 0)
      return solver::XiPolicy::constant(std::stod(xi.substr(9)));
    return solver::XiPolicy::ones();
  }

  consensus::NetworkGraph graph() const {
    if (topology == "star") return consensus::star_graph(K);
    if (topology == "balanced") return consensus::balanced_tree(K, branching);
    if (topology == "random") return consensus::random_tree(K, topology_seed);
    return consensus::path_graph(K);
  }

  solver::MampOptions solver_options() const {
    solver::MampOptions o;
    o.iterations = T;
    o.window_len = L;
    o.xi = xi_policy();
    return o;
  }

  model::SignalPrior prior() const { return {mu, power}; }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

// Seed lists accept "1,2,5" and ranges "1:20".
inline std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : detail::split(s, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string::npos) {
      seeds.push_back(std::stoull(part));
    } else {
      const auto lo = std::stoull(part.substr(0, colon));
      const auto hi = std::stoull(part.substr(colon + 1));
      require(hi >= lo, "seed range must be increasing");
      for (auto v = lo; v <= hi; ++v) seeds.push_back(v);
    }
  }
  return seeds;
}

inline void apply_config_entry(ExperimentConfig& cfg, const std::string& key,
                               const std::string& value) {
  if (key == "M") cfg.M = std::stoi(value);
  else if (key == "N") cfg.N = std::stoi(value);
  else if (key == "K") cfg.K = std::stoi(value);
  else if (key == "kappa") cfg.kappa = std::stod(value);
  else if (key == "snr_db") cfg.snr_db = value == "inf" ? std::numeric_limits<double>::infinity()
                                                        : std::stod(value);
  else if (key == "mu") cfg.mu = std::stod(value);
  else if (key == "power") cfg.power = std::stod(value);
  else if (key == "T") cfg.T = std::stoi(value);
  else if (key == "L") cfg.L = std::stoi(value);
  else if (key == "dprime") cfg.dprime = std::stoi(value);
  else if (key == "tau") cfg.tau = std::stoi(value);
  else if (key == "topology") cfg.topology = value;
  else if (key == "branching") cfg.branching = std::stoi(value);
  else if (key == "topology_seed") cfg.topology_seed = std::stoull(value);
  else if (key == "seeds") cfg.seeds = parse_seed_list(value);
  else if (key == "variants") {
    cfg.variants.clear();
    for (const auto& v : detail::split(value, ',')) {
      if (v == "centralized") cfg.variants.push_back(Variant::Centralized);
      else if (v == "variational") cfg.variants.push_back(Variant::Variational);
      else if (v == "dmamp") cfg.variants.push_back(Variant::Dmamp);
      else if (v == "fdmamp") cfg.variants.push_back(Variant::Fdmamp);
      else throw std::invalid_argument("config: unknown variant " + v);
    }
  } else if (key == "moment_mode") {
    if (value == "exact") cfg.moment_mode = MomentMode::Exact;
    else if (value == "recursion") cfg.moment_mode = MomentMode::Recursion;
    else throw std::invalid_argument("config: moment_mode must be exact|recursion");
  } else if (key == "lambda_realizations") cfg.lambda_realizations = std::stoi(value);
  else if (key == "xi") cfg.xi = value;
  else if (key == "out") cfg.out = value;
  else throw std::invalid_argument("config: unknown key " + key);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  ExperimentConfig cfg;
  std::string line;
  while (std::getline(is, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, "config line is not key=value: " + line);
    apply_config_entry(cfg, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "M=" << cfg.M << "\nN=" << cfg.N << "\nK=" << cfg.K
     << "\nkappa=" << detail::fmt_double(cfg.kappa)
     << "\nsnr_db=" << (std::isinf(cfg.snr_db) ? "inf" : detail::fmt_double(cfg.snr_db))
     << "\nmu=" << detail::fmt_double(cfg.mu) << "\npower=" << detail::fmt_double(cfg.power)
     << "\nT=" << cfg.T << "\nL=" << cfg.L << "\ndprime=" << cfg.dprime
     << "\ntau=" << cfg.effective_tau() << "\ntopology=" << cfg.topology
     << "\nbranching=" << cfg.branching << "\ntopology_seed=" << cfg.topology_seed << "\nseeds=";
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
    os << (i ? "," : "") << cfg.seeds[i];
  os << "\nvariants=";
  for (std::size_t i = 0; i < cfg.variants.size(); ++i)
    os << (i ? "," : "") << variant_name(cfg.variants[i]);
  os << "\nmoment_mode=" << (cfg.moment_mode == MomentMode::Exact ? "exact" : "recursion")
     << "\nlambda_realizations=" << cfg.lambda_realizations << "\nxi=" << cfg.xi << "\n";
  return os.str();
}

struct TrialResult {
  Variant variant;
  std::uint64_t seed = 0;
  solver::Trajectory trajectory;

  double final_mse() const { return trajectory.final_mse(); }
  // first iteration whose MSE is at or below -30 dB, if any
  std::optional<int> iters_to_minus30db() const {
    for (const auto& r : trajectory.records)
      if (r.mse_db <= -30.0) return r.iter;
    return std::nullopt;
  }
  // harness convergence rule: |mse_t - mse_{t-1}| / mse_t < 1e-6, else T
  int converged_iteration() const {
    for (std::size_t i = 1; i < trajectory.records.size(); ++i) {
      const double cur = trajectory.records[i].mse_linear;
      const double prev = trajectory.records[i - 1].mse_linear;
      if (std::abs(cur - prev) < 1e-6 * std::max(cur, 1e-300))
        return trajectory.records[i].iter;
    }
    return trajectory.records.empty() ? 0 : trajectory.records.back().iter;
  }
};

struct SeedArtifacts {
  model::LinearSystem system;
  std::vector<model::NodeShard> shards;
  spectral::SpectralStats stats;
};

inline SeedArtifacts prepare_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  SeedArtifacts art;
  art.system = model::make_system(cfg.M, cfg.N, cfg.K, cfg.kappa, cfg.snr_db, cfg.prior(), seed);
  art.shards = model::partition(art.system, cfg.K);
  if (cfg.moment_mode == MomentMode::Exact) {
    art.stats = spectral::make_stats_exact(art.system.A, cfg.T, cfg.effective_tau());
  } else {
    art.stats = spectral::make_stats_recursion(art.shards, cfg.graph(), cfg.N, cfg.M, cfg.T,
                                               cfg.effective_tau(), mix_seed(seed, 0x05),
                                               cfg.lambda_realizations);
  }
  return art;
}

inline TrialResult run_variant(const ExperimentConfig& cfg, const SeedArtifacts& art,
                               Variant variant, std::uint64_t seed) {
  const auto opts = cfg.solver_options();
  TrialResult tr;
  tr.variant = variant;
  tr.seed = seed;
  switch (variant) {
    case Variant::Centralized:
      tr.trajectory = solver::run_centralized(art.system, cfg.prior(), art.stats, opts);
      break;
    case Variant::Variational:
      tr.trajectory = solver::run_variational(art.system, cfg.prior(), art.stats, opts);
      break;
    case Variant::Dmamp: {
      auto res = dist::run_dmamp(art.shards, consensus::star_graph(cfg.K), cfg.prior(), art.stats,
                                 art.system.sigma2, opts, art.system.x_true);
      tr.trajectory = std::move(res.trajectory);
      break;
    }
    case Variant::Fdmamp: {
      auto res = dist::run_fdmamp(art.shards, cfg.graph(), cfg.prior(), art.stats,
                                  art.system.sigma2, opts, cfg.dprime, art.system.x_true);
      tr.trajectory = std::move(res.trajectory);
      break;
    }
  }
  return tr;
}

inline std::vector<TrialResult> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::vector<TrialResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    SeedArtifacts art = prepare_seed(cfg, seed);
    for (Variant v : cfg.variants) results.push_back(run_variant(cfg, art, v, seed));
  }
  return results;
}

// Long-format CSV; the resolved config and per-seed spectral provenance ride
// along as '#' comment lines ahead of the fixed column header.
inline std::string results_csv(const ExperimentConfig& cfg, const std::vector<TrialResult>& results,
                               const std::vector<SeedArtifacts>* artifacts = nullptr) {
  std::ostringstream os;
  os << "# dmamp run\n";
  std::istringstream cfgs(serialize_config(cfg));
  std::string line;
  while (std::getline(cfgs, line)) os << "# " << line << "\n";
  if (artifacts) {
    for (std::size_t i = 0; i < artifacts->size(); ++i) {
      const auto& st = (*artifacts)[i].stats;
      os << "# seed=" << cfg.seeds[i] << " spectral mode="
         << (st.exact_mode ? "exact" : "recursion")
         << " lambda_min=" << detail::fmt_double(st.lambda_min)
         << " lambda_max=" << detail::fmt_double(st.lambda_max)
         << " lambda_dagger=" << detail::fmt_double(st.lambda_dagger)
         << " w0=" << detail::fmt_double(st.w.at(0)) << " tau=" << st.tau
         << " realizations=" << st.realizations << "\n";
    }
  }
  os << "variant,seed,iter,mse_linear,mse_db,comm_exact,comm_table\n";
  for (const auto& tr : results)
    for (const auto& r : tr.trajectory.records)
      os << variant_name(tr.variant) << ',' << tr.seed << ',' << r.iter << ','
         << detail::fmt_double(r.mse_linear) << ',' << detail::fmt_double(r.mse_db) << ','
         << r.comm_exact << ',' << r.comm_table << "\n";
  return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << content;
}

// Largest per-iteration relative MSE deviation of every variant against the
// first one, per seed. This is the cross-variant agreement surface.
struct AgreementReport {
  double max_rel_dev = 0.0;
  std::string worst_pair;
};

inline AgreementReport agreement_report(const std::vector<TrialResult>& results) {
  AgreementReport rep;
  std::map<std::uint64_t, std::vector<const TrialResult*>> by_seed;
  for (const auto& tr : results) by_seed[tr.seed].push_back(&tr);
  for (auto& [seed, list] : by_seed) {
    for (std::size_t i = 1; i < list.size(); ++i) {
      const auto& a = list[0]->trajectory.records;
      const auto& b = list[i]->trajectory.records;
      const std::size_t nrec = std::min(a.size(), b.size());
      for (std::size_t r = 0; r < nrec; ++r) {
        const double dev = std::abs(a[r].mse_linear - b[r].mse_linear) /
                           std::max({a[r].mse_linear, b[r].mse_linear, 1e-300});
        if (dev > rep.max_rel_dev) {
          rep.max_rel_dev = dev;
          rep.worst_pair = std::string(variant_name(list[0]->variant)) + "/" +
                           variant_name(list[i]->variant) + " seed " + std::to_string(seed) +
                           " iter " + std::to_string(a[r].iter);
        }
      }
    }
  }
  return rep;
}

struct LambdaCheckRow {
  std::uint64_t seed = 0;
  double final_gap_db = 0.0;            // |exact-mode - recursion-mode| final MSE gap
  double max_moment_rel_err = 0.0;      // over t = 1..tau
  bool bound_valid = false;             // lambda_max_up >= dense lambda_max
};

struct LambdaCheckReport {
  std::vector<LambdaCheckRow> rows;
  std::vector<double> gap_db_per_iter;  // averaged over seeds
};

// Runs D-MAMP under exact dense spectral data and under the recursion
// approximation with the (0, (N lambda_tau)^(1/tau)) bounds, and reports the
// per-iteration MSE gap plus moment accuracy.
inline LambdaCheckReport approx_vs_exact_lambda_report(const ExperimentConfig& cfg) {
  cfg.validate();
  LambdaCheckReport rep;
  const auto opts = cfg.solver_options();
  for (std::uint64_t seed : cfg.seeds) {
    auto sys = model::make_system(cfg.M, cfg.N, cfg.K, cfg.kappa, cfg.snr_db, cfg.prior(), seed);
    auto shards = model::partition(sys, cfg.K);
    RVec eigs = spectral::dense_gram_eigs(sys.A);
    auto stats_exact = spectral::make_stats_exact(eigs, cfg.N, cfg.T, cfg.effective_tau());
    auto stats_rec = spectral::make_stats_recursion(shards, cfg.graph(), cfg.N, cfg.M, cfg.T,
                                                    cfg.effective_tau(), mix_seed(seed, 0x05),
                                                    cfg.lambda_realizations);
    auto star = consensus::star_graph(cfg.K);
    auto run_e = dist::run_dmamp(shards, star, cfg.prior(), stats_exact, sys.sigma2, opts,
                                 sys.x_true);
    auto run_r = dist::run_dmamp(shards, star, cfg.prior(), stats_rec, sys.sigma2, opts,
                                 sys.x_true);

    LambdaCheckRow row;
    row.seed = seed;
    row.final_gap_db = std::abs(run_e.trajectory.records.back().mse_db -
                                run_r.trajectory.records.back().mse_db);
    for (int t = 1; t <= cfg.effective_tau(); ++t) {
      const double rel =
          std::abs(stats_rec.lambda.at(t) / stats_exact.lambda.at(t) - 1.0);
      row.max_moment_rel_err = std::max(row.max_moment_rel_err, rel);
    }
    row.bound_valid = stats_rec.lambda_max >= eigs.maxCoeff();
    rep.rows.push_back(row);

    if (rep.gap_db_per_iter.empty()) rep.gap_db_per_iter.assign(cfg.T, 0.0);
    for (int t = 0; t < cfg.T; ++t)
      rep.gap_db_per_iter[t] += std::abs(run_e.trajectory.records[t].mse_db -
                                         run_r.trajectory.records[t].mse_db) /
                                cfg.seeds.size();
  }
  return rep;
}

}  // namespace dmamp::harness
