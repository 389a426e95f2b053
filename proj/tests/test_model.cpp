#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>

#include "dmamp/instance_io.hpp"
#include "dmamp/model.hpp"
#include "dmamp/spectral.hpp"

using namespace dmamp;
using Catch::Approx;

namespace {

bool bitwise_equal(const CVec& a, const CVec& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a(i) != b(i)) return false;
  return true;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is.good());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("gen_signal: dense Gaussian limit (mu=1)") {
  const int n = 20000;
  CVec x = model::gen_signal(n, {1.0, 1.0}, 42);
  for (int i = 0; i < 100; ++i) REQUIRE(std::abs(x(i)) > 0.0);
  REQUIRE(x.squaredNorm() / n == Approx(1.0).margin(0.05));
}

TEST_CASE("gen_signal: mu=0 gives the zero vector") {
  CVec x = model::gen_signal(64, {0.0, 1.0}, 3);
  REQUIRE(x.isZero(0.0));
}

TEST_CASE("gen_signal: sparsity and power statistics at mu=0.1") {
  const int n = 2000;
  double frac = 0.0, power = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    CVec x = model::gen_signal(n, {0.1, 1.0}, seed);
    int nz = 0;
    for (int i = 0; i < n; ++i)
      if (x(i) != Complex(0, 0)) ++nz;
    frac += static_cast<double>(nz) / n;
    power += x.squaredNorm() / n;
  }
  frac /= 100.0;
  power /= 100.0;
  REQUIRE(frac == Approx(0.1).margin(0.02));
  REQUIRE(power == Approx(1.0).margin(0.05));
}

TEST_CASE("gen_signal: invalid sparsity rejected, same seed reproduces bits") {
  REQUIRE_THROWS_AS(model::gen_signal(8, {-0.1, 1.0}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(model::gen_signal(8, {1.5, 1.0}, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(model::gen_signal(0, {0.5, 1.0}, 1), std::invalid_argument);
  CVec a = model::gen_signal(512, {0.3, 2.0}, 77);
  CVec b = model::gen_signal(512, {0.3, 2.0}, 77);
  REQUIRE(bitwise_equal(a, b));
}

TEST_CASE("gen_matrix: flat spectrum at kappa=1") {
  CMat a = model::gen_matrix(16, 24, 1.0, 5);
  REQUIRE((a.adjoint() * a).trace().real() == Approx(24.0).epsilon(1e-12));
  RVec d = spectral::dense_gram_eigs(a);
  REQUIRE(d.maxCoeff() / d.minCoeff() == Approx(1.0).epsilon(1e-10));
}

TEST_CASE("gen_matrix: paper-scale instance has the requested condition number") {
  CMat a = model::gen_matrix(1000, 2000, 10.0, 1);
  REQUIRE((a.adjoint() * a).trace().real() == Approx(2000.0).epsilon(1e-9));
  RVec d = spectral::dense_gram_eigs(a);
  const double ratio = std::sqrt(d.maxCoeff() / d.minCoeff());
  REQUIRE(ratio == Approx(10.0).epsilon(1e-9));
}

TEST_CASE("gen_matrix: 4x4 spectrum matches the constructed singular values") {
  const int m = 4, n = 4, j = 4;
  const double kappa = 10.0;
  CMat a = model::gen_matrix(m, n, kappa, 9);
  // construction: s_i ~ kappa^{-i/(J-1)}, scaled to tr{A^H A} = N
  RVec s(j);
  for (int i = 0; i < j; ++i) s(i) = std::pow(kappa, -static_cast<double>(i) / (j - 1));
  s *= std::sqrt(static_cast<double>(n) / s.squaredNorm());
  RVec expected = s.cwiseProduct(s);
  std::sort(expected.data(), expected.data() + j);
  RVec d = spectral::dense_gram_eigs(a);
  for (int i = 0; i < j; ++i) REQUIRE(d(i) == Approx(expected(i)).margin(1e-10));
}

TEST_CASE("gen_matrix: invalid arguments rejected; deterministic per seed") {
  REQUIRE_THROWS_AS(model::gen_matrix(4, 4, 0.5, 1), std::invalid_argument);
  REQUIRE_THROWS_AS(model::gen_matrix(0, 4, 2.0, 1), std::invalid_argument);
  CMat a = model::gen_matrix(6, 10, 3.0, 123);
  CMat b = model::gen_matrix(6, 10, 3.0, 123);
  REQUIRE((a.array() == b.array()).all());
  CMat c = model::gen_matrix(6, 10, 3.0, 124);
  REQUIRE_FALSE((a.array() == c.array()).all());
}

TEST_CASE("gen_matrix: trace normalization across shapes") {
  for (auto [m, n] : {std::pair{8, 16}, {16, 8}, {32, 32}, {5, 40}}) {
    for (double kappa : {1.0, 4.0, 50.0}) {
      CMat a = model::gen_matrix(m, n, kappa, 7 * m + n);
      REQUIRE((a.adjoint() * a).trace().real() == Approx(double(n)).epsilon(1e-9));
    }
  }
}

TEST_CASE("add_noise: noiseless sentinel and unit-SNR definition") {
  Rng rng(4);
  CVec ax = rng.cnormal_vec(50, 2.0);
  auto [y0, s0] = model::add_noise(ax, std::numeric_limits<double>::infinity(), 1);
  REQUIRE(s0 == 0.0);
  REQUIRE(bitwise_equal(y0, ax));
  auto [y1, s1] = model::add_noise(ax, 0.0, 1);
  REQUIRE(s1 == Approx(ax.squaredNorm() / 50).epsilon(1e-15));
  REQUIRE_FALSE(bitwise_equal(y1, ax));
}

TEST_CASE("add_noise: realized noise energy concentrates") {
  Rng rng(8);
  CVec ax = rng.cnormal_vec(1000, 1.0);
  double ratio = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto [y, s2] = model::add_noise(ax, 30.0, seed);
    ratio += (y - ax).squaredNorm() / (1000.0 * s2);
  }
  REQUIRE(ratio / 100.0 == Approx(1.0).margin(0.1));
}

TEST_CASE("partition: equal split, paper shape") {
  auto sys = model::make_system(1000, 40, 8, 2.0, 20.0, {0.2, 1.0}, 2);
  auto shards = model::partition(sys, 8);
  REQUIRE(shards.size() == 8);
  for (const auto& sh : shards) {
    REQUIRE(sh.A_k.rows() == 125);
    REQUIRE(sh.y_k.size() == 125);
  }
  REQUIRE(shards[2].node_id == 3);
}

TEST_CASE("partition: K=1 reproduces the whole system") {
  auto sys = model::make_system(12, 20, 1, 3.0, 15.0, {0.5, 1.0}, 6);
  auto shards = model::partition(sys, 1);
  REQUIRE(shards.size() == 1);
  REQUIRE((shards[0].A_k.array() == sys.A.array()).all());
  REQUIRE(bitwise_equal(shards[0].y_k, sys.y));
}

TEST_CASE("partition: custom sizes stack back to the original") {
  auto sys = model::make_system(1000, 30, 1, 5.0, 25.0, {0.3, 1.0}, 11);
  auto shards = model::partition(sys, std::vector<int>{300, 700});
  REQUIRE(shards[0].A_k.rows() == 300);
  REQUIRE(shards[1].A_k.rows() == 700);
  CMat stacked(1000, 30);
  stacked << shards[0].A_k, shards[1].A_k;
  REQUIRE((stacked.array() == sys.A.array()).all());
  CVec ys(1000);
  ys << shards[0].y_k, shards[1].y_k;
  REQUIRE(bitwise_equal(ys, sys.y));
}

TEST_CASE("partition: inconsistent sizes rejected") {
  auto sys = model::make_system(10, 6, 1, 1.0, 10.0, {0.5, 1.0}, 3);
  REQUIRE_THROWS_AS(model::partition(sys, std::vector<int>{4, 4}), std::invalid_argument);
  REQUIRE_THROWS_AS(model::partition(sys, 3), std::invalid_argument);
}

TEST_CASE("instance io: round trip is exact and dumps are byte-stable") {
  auto sys = model::make_system(8, 12, 2, 4.0, 18.0, {0.25, 1.0}, 31);
  const std::string p1 = "test_model_inst1.bin", p2 = "test_model_inst2.bin";
  io::dump_instance(sys, p1);
  auto back = io::load_instance(p1);
  REQUIRE((back.A.array() == sys.A.array()).all());
  REQUIRE(bitwise_equal(back.x_true, sys.x_true));
  REQUIRE(bitwise_equal(back.y, sys.y));
  REQUIRE(back.sigma2 == sys.sigma2);
  REQUIRE(back.partition == sys.partition);
  REQUIRE(back.seed == sys.seed);
  io::dump_instance(back, p2);
  REQUIRE(slurp(p1) == slurp(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("instance io: bad magic rejected") {
  const std::string p = "test_model_badmagic.bin";
  {
    std::ofstream os(p, std::ios::binary);
    os << "NOTANINSTANCE";
  }
  REQUIRE_THROWS_AS(io::load_instance(p), std::runtime_error);
  std::remove(p.c_str());
}

TEST_CASE("make_system: observation matches the model equation") {
  auto sys = model::make_system(24, 36, 4, 6.0, 22.0, {0.2, 1.0}, 13);
  CVec n = sys.y - sys.A * sys.x_true;
  REQUIRE(n.squaredNorm() / 24 == Approx(sys.sigma2).margin(0.6 * sys.sigma2));
  REQUIRE(sys.delta() == Approx(24.0 / 36.0));
}
