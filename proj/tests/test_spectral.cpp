#include <catch2/catch_amalgamated.hpp>

#include "dmamp/consensus.hpp"
#include "dmamp/model.hpp"
#include "dmamp/spectral.hpp"

using namespace dmamp;
using Catch::Approx;

namespace {

// Independent trace oracle: materialize (A A^H)^t and take the trace.
std::vector<double> moments_by_matrix_power(const CMat& a, int tau_max) {
  CMat g = a * a.adjoint();
  CMat p = CMat::Identity(g.rows(), g.cols());
  std::vector<double> lam;
  for (int t = 1; t <= tau_max; ++t) {
    p = p * g;
    lam.push_back(p.trace().real() / a.cols());
  }
  return lam;
}

std::vector<model::NodeShard> shard_matrix(const CMat& a, const std::vector<int>& sizes) {
  model::LinearSystem sys;
  sys.A = a;
  sys.y = CVec::Zero(a.rows());
  sys.x_true = CVec::Zero(a.cols());
  sys.partition = sizes;
  return model::partition(sys, sizes);
}

}  // namespace

TEST_CASE("exact_moments: identity and scalar cases") {
  CMat eye = CMat::Identity(16, 16);
  auto lam = spectral::exact_moments(eye, 5);
  for (double v : lam) REQUIRE(v == Approx(1.0).epsilon(1e-12));

  CMat one(1, 1);
  one(0, 0) = Complex(2.0, 0.0);
  auto lam1 = spectral::exact_moments(one, 4);
  for (int t = 1; t <= 4; ++t) REQUIRE(lam1[t - 1] == Approx(std::pow(4.0, t)).epsilon(1e-12));
}

TEST_CASE("exact_moments: matches the dense matrix-power oracle") {
  CMat a = model::gen_matrix(8, 16, 3.0, 21);
  auto lam = spectral::exact_moments(a, 4);
  auto oracle = moments_by_matrix_power(a, 4);
  for (int t = 0; t < 4; ++t) REQUIRE(lam[t] == Approx(oracle[t]).margin(1e-10).epsilon(1e-10));
}

TEST_CASE("recursion moments: single shard equals the centralized recursion") {
  CMat a = model::gen_matrix(12, 20, 5.0, 4);
  auto central = spectral::recursion_moments(a, 9, 77, 2);
  auto dist = spectral::approx_moments_distributed(shard_matrix(a, {12}),
                                                   consensus::path_graph(1), 9, 77, 2);
  for (int t = 0; t < 9; ++t) REQUIRE(dist[t] == Approx(central[t]).epsilon(1e-14));
}

TEST_CASE("recursion moments: identity operator freezes the norm") {
  CMat eye = CMat::Identity(32, 32);
  auto lam = spectral::approx_moments_distributed(shard_matrix(eye, {8, 8, 8, 8}),
                                                  consensus::path_graph(4), 7, 5);
  for (int t = 1; t < 7; ++t) REQUIRE(lam[t] == Approx(lam[0]).epsilon(1e-13));
}

TEST_CASE("recursion moments: block form equals the centralized recursion") {
  CMat a = model::gen_matrix(24, 40, 8.0, 19);
  auto central = spectral::recursion_moments(a, 12, 5, 3);
  for (const auto& sizes :
       {std::vector<int>{12, 12}, std::vector<int>{6, 6, 6, 6}, std::vector<int>{2, 10, 12}}) {
    auto dist = spectral::approx_moments_distributed(
        shard_matrix(a, sizes), consensus::path_graph(static_cast<int>(sizes.size())), 12, 5, 3);
    for (int t = 0; t < 12; ++t) REQUIRE(dist[t] == Approx(central[t]).epsilon(1e-12));
  }
}

TEST_CASE("recursion moments: unbiasedness sanity at moderate averaging") {
  CMat a = model::gen_matrix(64, 128, 10.0, 3);
  auto exact = spectral::exact_moments(a, 6);
  auto approx = spectral::approx_moments_distributed(shard_matrix(a, {32, 32}),
                                                     consensus::path_graph(2), 6, 11, 4000);
  for (int t = 0; t < 6; ++t) REQUIRE(approx[t] == Approx(exact[t]).epsilon(0.1));
}

TEST_CASE("lambda_bounds: identity-spectrum value and argument checks") {
  auto [lo, up] = spectral::lambda_bounds(1.0, 10, 1024);
  REQUIRE(lo == 0.0);
  REQUIRE(up == Approx(2.0).epsilon(1e-12));
  REQUIRE_THROWS_AS(spectral::lambda_bounds(0.0, 3, 10), std::invalid_argument);
  REQUIRE_THROWS_AS(spectral::lambda_bounds(1.0, 0, 10), std::invalid_argument);
}

TEST_CASE("lambda_bounds: tighter with larger tau and valid versus dense max") {
  CMat a = model::gen_matrix(64, 128, 7.0, 15);
  RVec d = spectral::dense_gram_eigs(a);
  const double lam_max = d.maxCoeff();
  auto lam = spectral::exact_moments(a, 60);
  double prev = std::numeric_limits<double>::infinity();
  for (int tau : {2, 10, 20, 60}) {
    auto [lo, up] = spectral::lambda_bounds(lam[tau - 1], tau, 128);
    REQUIRE(up >= lam_max);
    if (tau >= 20) REQUIRE(up <= prev);
    prev = up;
  }
}

TEST_CASE("b_coeffs: low-order identities") {
  std::vector<double> lambda = {0.5, 1.0, 4.7};  // delta, lambda_1, lambda_2
  const double dag = 2.25;
  auto b = spectral::b_coeffs(lambda, dag, 2);
  REQUIRE(b[0] == Approx(0.5).epsilon(1e-15));
  REQUIRE(b[1] == Approx(dag * 0.5 - 1.0).epsilon(1e-14));
  REQUIRE(b[2] == Approx(dag * dag * 0.5 - 2 * dag * 1.0 + 4.7).epsilon(1e-14));
}

TEST_CASE("b_coeffs: b_2 equals the dense trace of B^2") {
  CMat a = model::gen_matrix(8, 16, 4.0, 33);
  RVec d = spectral::dense_gram_eigs(a);
  const double dag = 0.5 * (d.maxCoeff() + d.minCoeff());
  auto lam = spectral::moments_from_eigs(d, 16, 4);
  auto b = spectral::b_coeffs(lam, dag, 4);
  CMat bmat = dag * CMat::Identity(8, 8) - a * a.adjoint();
  const double oracle = (bmat * bmat).trace().real() / 16;
  REQUIRE(b[2] == Approx(oracle).margin(1e-10).epsilon(1e-10));
}

TEST_CASE("b/w coefficients match dense traces at small sizes") {
  for (auto [m, n] : {std::pair{8, 16}, {24, 16}, {32, 64}}) {
    CMat a = model::gen_matrix(m, n, 6.0, m + 100 * n);
    RVec d = spectral::dense_gram_eigs(a);
    const double dag = 0.5 * (d.maxCoeff() + d.minCoeff());
    auto lam = spectral::moments_from_eigs(d, n, 9);
    auto b = spectral::b_coeffs(lam, dag, 9);
    auto w = spectral::w_coeffs(b, dag);
    CMat gram = a * a.adjoint();
    CMat bmat = dag * CMat::Identity(m, m) - gram;
    CMat bp = CMat::Identity(m, m);
    for (int t = 0; t <= 8; ++t) {
      const double b_oracle = bp.trace().real() / n;
      const double w_oracle = (bp * gram).trace().real() / n;
      REQUIRE(b[t] == Approx(b_oracle).margin(1e-10).epsilon(1e-10));
      REQUIRE(w[t] == Approx(w_oracle).margin(1e-10).epsilon(1e-10));
      bp = bp * bmat;
    }
  }
}

TEST_CASE("w_coeffs: w_0 recovers lambda_1; zero operator gives zero w") {
  std::vector<double> lambda = {0.5, 1.37, 3.1, 9.9};
  const double dag = 1.8;
  auto b = spectral::b_coeffs(lambda, dag, 3);
  auto w = spectral::w_coeffs(b, dag);
  REQUIRE(w[0] == Approx(lambda[1]).epsilon(1e-9));

  std::vector<double> lam0 = {0.5, 0.0, 0.0, 0.0};
  auto b0 = spectral::b_coeffs(lam0, 0.0, 3);
  auto w0 = spectral::w_coeffs(b0, 0.0);
  for (double v : w0) REQUIRE(v == 0.0);
}

TEST_CASE("ortho_coeffs: empty product and unit-parameter cases") {
  auto oc1 = spectral::ortho_coeffs({0.7}, {1.3}, {2.0});
  REQUIRE(oc1.p.size() == 1);
  REQUIRE(oc1.p[0] == Approx(1.3 * 2.0));
  REQUIRE(oc1.epsilon == Approx(2.6));

  std::vector<double> w = {1.5, 0.25, -0.5, 0.125};
  auto oc = spectral::ortho_coeffs({1, 1, 1, 1}, {1, 1, 1, 1}, w);
  for (int i = 1; i <= 4; ++i) REQUIRE(oc.p[i - 1] == Approx(w[4 - i]));
  REQUIRE(oc.epsilon == Approx(w[0] + w[1] + w[2] + w[3]));
}

TEST_CASE("ortho_coeffs: hand-evaluated two-step case") {
  auto oc = spectral::ortho_coeffs({0.5, 0.25}, {1.0, 2.0}, {3.0, 1.0});
  REQUIRE(oc.vartheta[0] == Approx(0.25));  // xi_1 * theta_2
  REQUIRE(oc.vartheta[1] == Approx(2.0));   // xi_2, empty product
  REQUIRE(oc.p[0] == Approx(0.25));
  REQUIRE(oc.p[1] == Approx(6.0));
  REQUIRE(oc.epsilon == Approx(6.25));
}

TEST_CASE("w tables: consistent with the moment recursion and with dense traces") {
  CMat a = model::gen_matrix(16, 32, 5.0, 8);
  auto shards = shard_matrix(a, {8, 8});
  RVec d = spectral::dense_gram_eigs(a);
  const double dag = 0.5 * (d.maxCoeff() + d.minCoeff());

  auto tab = spectral::approx_w_tables_distributed(shards, dag, 6, 123, 1);
  auto lam = spectral::approx_moments_distributed(shards, consensus::path_graph(2), 1, 123, 1);
  REQUIRE(tab.w_tilde[0] == Approx(lam[0]).epsilon(1e-13));  // w_0 = lambda_1 exactly

  // with heavy averaging the estimates approach the dense traces
  auto tab_avg = spectral::approx_w_tables_distributed(shards, dag, 6, 5, 4000);
  CMat gram = a * a.adjoint();
  CMat bn = (dag * CMat::Identity(16, 16) - gram) / dag;
  CMat bp = CMat::Identity(16, 16);
  for (int c = 0; c <= 6; ++c) {
    const double w_or = (bp * gram).trace().real() / 32;
    const double w2_or = (bp * gram * gram).trace().real() / 32;
    REQUIRE(tab_avg.w_tilde[c] == Approx(w_or).margin(0.02 * std::abs(w_or) + 0.005));
    REQUIRE(tab_avg.w2_tilde[c] == Approx(w2_or).margin(0.02 * std::abs(w2_or) + 0.02));
    bp = bp * bn;
  }
}

TEST_CASE("stats builders: exact and recursion modes agree on structure") {
  CMat a = model::gen_matrix(32, 64, 6.0, 14);
  auto shards = shard_matrix(a, {16, 16});
  auto g = consensus::path_graph(2);
  auto se = spectral::make_stats_exact(a, 10, 20);
  auto sr = spectral::make_stats_recursion(shards, g, 64, 32, 10, 20, 9, 800);

  REQUIRE(se.delta == Approx(0.5));
  REQUIRE(se.lambda[0] == Approx(0.5));
  REQUIRE(se.w_tilde[0] == Approx(se.lambda[1]).epsilon(1e-9));
  REQUIRE(sr.w_tilde[0] == Approx(sr.lambda[1]).epsilon(1e-9));
  REQUIRE(sr.lambda_min == 0.0);
  RVec d = spectral::dense_gram_eigs(a);
  REQUIRE(sr.lambda_max >= d.maxCoeff());
  REQUIRE(se.lambda_max == Approx(d.maxCoeff()));
  // moments agree within averaging noise
  for (int t = 1; t <= 10; ++t) REQUIRE(sr.lambda[t] == Approx(se.lambda[t]).epsilon(0.15));
  REQUIRE(std::exp(se.log_lambda[10]) == Approx(se.lambda[10]).epsilon(1e-9));
}

TEST_CASE("stats builder: zero operator is handled") {
  auto st = spectral::make_stats_exact(CMat::Zero(6, 12), 3, 6);
  REQUIRE(st.lambda_dagger == 0.0);
  REQUIRE(st.b[0] == Approx(0.5));
  for (double v : st.w_tilde) REQUIRE(v == 0.0);
}
