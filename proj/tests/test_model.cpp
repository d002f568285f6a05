#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "symplyap/model.hpp"
#include "symplyap/rng.hpp"

using namespace symplyap;

namespace {

VectorX<double> vec(std::initializer_list<double> v) {
  VectorX<double> out(v.size());
  int i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

ModelConfig n2() { return ModelConfig::bernoulli(2, 0.5, {1, 1}); }

}  // namespace

TEST_CASE("config validation names the offending key") {
  auto expect_key = [](ModelConfig c, const std::string& key) {
    try {
      c.validate();
      FAIL("expected ConfigError for " << key);
    } catch (const ConfigError& e) {
      CHECK(e.key() == key);
    }
  };
  ModelConfig c = n2();
  c.validate();
  auto bad = c;
  bad.n_channels = 0;
  expect_key(bad, "n_channels");
  bad = c;
  bad.cell_length = 0.0;
  expect_key(bad, "cell_length");
  bad = c;
  bad.couplings = {1.0, 0.0};
  expect_key(bad, "couplings");
  bad = c;
  bad.couplings = {1.0};
  expect_key(bad, "couplings");
  bad = c;
  bad.disorder_support = {0.0, 2.0};
  expect_key(bad, "disorder_support");
  bad = c;
  bad.disorder_weights = {0.5, 0.6};
  expect_key(bad, "disorder_weights");
  bad = c;
  bad.disorder_weights = {1.5, -0.5};
  expect_key(bad, "disorder_weights");
  bad = c;
  bad.log_chart_radius = -1.0;
  expect_key(bad, "log_chart_radius");
}

TEST_CASE("site matrices") {
  const ModelConfig c = n2();
  MatrixX<double> expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK(build_site_matrix(c, vec({0, 0}), 0.0) == expected);
  expected << 1, 1, 1, 1;
  const MatrixX<double> m = build_site_matrix(c, vec({1, 1}), 0.0);
  CHECK(m == expected);
  Eigen::SelfAdjointEigenSolver<MatrixX<double>> eig(m);
  CHECK(eig.eigenvalues()(0) == doctest::Approx(0.0));
  CHECK(eig.eigenvalues()(1) == doctest::Approx(2.0));
  const ModelConfig one = ModelConfig::bernoulli(1, 1.0, {5});
  CHECK(build_site_matrix(one, vec({1}), 2.0)(0, 0) == 3.0);
  CHECK_THROWS_AS(build_site_matrix(c, vec({1}), 0.0), ArgumentError);
}

TEST_CASE("transfer matrix closed forms") {
  SUBCASE("M = 0 is the free shear") {
    const ModelConfig c = ModelConfig::bernoulli(1, 0.7, {3});
    MatrixX<double> expected(2, 2);
    expected << 1, 0.7, 0, 1;
    CHECK((transfer_matrix(c, vec({0}), 0.0).entries() - expected).norm() == 0.0);
  }
  SUBCASE("M = [1] at l = 1") {
    const ModelConfig c = ModelConfig::bernoulli(1, 1.0, {1});
    const MatrixX<double> t = transfer_matrix(c, vec({1}), 0.0).entries();
    CHECK(t(0, 0) == doctest::Approx(std::cosh(1.0)));
    CHECK(t(0, 1) == doctest::Approx(std::sinh(1.0)));
    CHECK(t(1, 0) == doctest::Approx(std::sinh(1.0)));
    CHECK(t(1, 1) == doctest::Approx(std::cosh(1.0)));
  }
  SUBCASE("100 random transfer matrices are symplectic") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> energy(-3.0, 3.0);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const int n = 1 + k % 4;
      const ModelConfig c = ModelConfig::bernoulli(n, 1.0, std::vector<double>(n, 1.0));
      const auto code = rng() % c.site_count();
      worst = std::max(worst, transfer_matrix(c, decode_site(c, code), energy(rng)).residual());
    }
    CHECK(worst <= 1e-10);
  }
}

TEST_CASE("eigenvalue extremes") {
  auto e1 = eigenvalue_extremes(ModelConfig::bernoulli(1, 1.0, {1}));
  CHECK(e1.lambda_min == doctest::Approx(0.0));
  CHECK(e1.lambda_max == doctest::Approx(1.0));
  CHECK(e1.delta0 == doctest::Approx(0.5));
  auto e2 = eigenvalue_extremes(n2());
  CHECK(std::abs(e2.lambda_min + 1.0) <= 1e-12);
  CHECK(std::abs(e2.lambda_max - 2.0) <= 1e-12);
  CHECK(e2.delta0 == doctest::Approx(1.5));
  auto e3 = eigenvalue_extremes(ModelConfig::bernoulli(2, 0.5, {-1, -1}));
  CHECK(e3.lambda_max == doctest::Approx(1.0));
  CHECK(e3.lambda_min == doctest::Approx(-2.0));
  CHECK_THROWS_AS(eigenvalue_extremes(ModelConfig::bernoulli(21, 0.1, std::vector<double>(21, 1.0))),
                  CapacityError);
}

TEST_CASE("extremes are invariant under permuting channels with their couplings") {
  // V₀ couples neighbours, so the permutation must be the reversal, which preserves V₀.
  const ModelConfig a = ModelConfig::bernoulli(3, 0.5, {1.0, -2.0, 0.5});
  const ModelConfig b = ModelConfig::bernoulli(3, 0.5, {0.5, -2.0, 1.0});
  const auto ea = eigenvalue_extremes(a);
  const auto eb = eigenvalue_extremes(b);
  CHECK(ea.lambda_min == doctest::Approx(eb.lambda_min).epsilon(1e-13));
  CHECK(ea.lambda_max == doctest::Approx(eb.lambda_max).epsilon(1e-13));
}

TEST_CASE("energy window") {
  const EnergyWindow w = energy_window(n2());
  CHECK(std::abs(w.lower - 0.0) <= 1e-12);
  CHECK(std::abs(w.upper - 1.0) <= 1e-12);
  CHECK(w.critical_length == doctest::Approx(2.0 / 3.0));
  CHECK(w.admissible());
  CHECK(w.center() == doctest::Approx(0.5 * (w.lambda_min + w.lambda_max)));
  auto wide = n2();
  wide.cell_length = 0.8;
  CHECK(energy_window(wide).empty());
  // ℓ_C never exceeds 1 even when d/δ₀ does.
  auto one = ModelConfig::bernoulli(1, 0.5, {1}, 3.0);
  CHECK(energy_window(one).critical_length == 1.0);
  // Length 2d/ℓ − 2δ₀ grows without bound as ℓ → 0.
  double previous = 0.0;
  for (double l : {0.5, 0.1, 0.01, 0.001}) {
    auto c = n2();
    c.cell_length = l;
    const auto wl = energy_window(c);
    CHECK(wl.width() == doctest::Approx(2.0 / l - 3.0));
    CHECK(wl.width() > previous);
    previous = wl.width();
  }
}

TEST_CASE("norm bound check") {
  const ModelConfig c = n2();
  const EnergyWindow w = energy_window(c);
  for (double e : {w.lower, w.center(), w.upper}) CHECK(norm_bound_check(c, e).admissible);
  CHECK_FALSE(norm_bound_check(c, w.lambda_max + 2.0 * c.log_chart_radius / c.cell_length).admissible);
  // ‖X_ω(E)‖ = max(1, max|λ − E|) against a direct SVD.
  for (double e : {-3.0, 0.2, 0.5, 4.0}) {
    double direct = 0.0;
    for (std::uint64_t code = 0; code < c.site_count(); ++code) {
      direct = std::max(direct, spectral_norm(hamiltonian_generator(c, decode_site(c, code), e).entries()));
    }
    CHECK(norm_bound_check(c, e).max_norm == doctest::Approx(c.cell_length * direct).epsilon(1e-12));
  }
}

TEST_CASE("transfer matrix is Lipschitz in E on the window") {
  const ModelConfig c = n2();
  const EnergyWindow w = energy_window(c);
  double c0 = 0.0;
  for (std::uint64_t code = 0; code < c.site_count(); ++code) {
    const VectorX<double> omega = decode_site(c, code);
    for (int k = 0; k <= 10; ++k) {
      const double e = w.lower + w.width() * k / 10.0;
      double previous = -1.0;
      for (double d : {1e-2, 5e-3, 2.5e-3}) {
        const double ratio = spectral_norm(transfer_matrix(c, omega, e + d).entries() -
                                           transfer_matrix(c, omega, e).entries()) / d;
        if (previous > 0) CHECK(ratio == doctest::Approx(previous).epsilon(1e-2));
        previous = ratio;
        c0 = std::max(c0, ratio);
      }
    }
  }
  // Any pair inside the window respects the fitted constant (with a small secant allowance).
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(w.lower, w.upper);
  for (int k = 0; k < 200; ++k) {
    const double e1 = u(rng), e2 = u(rng);
    const VectorX<double> omega = decode_site(c, rng() % c.site_count());
    const double lhs = spectral_norm(transfer_matrix(c, omega, e1).entries() - transfer_matrix(c, omega, e2).entries());
    CHECK(lhs <= 1.05 * c0 * std::abs(e1 - e2) + 1e-15);
  }
}

TEST_CASE("sampling is counter based and reproducible") {
  const ModelConfig c = ModelConfig::bernoulli(3, 1.0, {1, 1, 1});
  const auto a = sample_realization(c, 42, -10, 10);
  const auto b = sample_realization(c, 42, -10, 10);
  CHECK(a.cells == b.cells);
  const auto inner = sample_realization(c, 42, 0, 5);
  for (std::int64_t n = 0; n < 5; ++n) CHECK(inner.omega(n) == a.omega(n));
  const auto other = sample_realization(c, 43, -10, 10);
  CHECK(other.cells != a.cells);
  CHECK_THROWS_AS(sample_realization(c, 1, 3, 3), ArgumentError);
}

TEST_CASE("degenerate law gives constant cells") {
  const ModelConfig ones = ModelConfig::deterministic(2, 1.0, {1, 1}, 1);
  const auto r = sample_realization(ones, 7, 0, 100);
  CHECK(r.cells == MatrixX<double>::Ones(2, 100));
  const ModelConfig zeros = ModelConfig::deterministic(2, 1.0, {1, 1}, 0);
  CHECK(sample_realization(zeros, 7, 0, 100).cells.isZero());
}

TEST_CASE("empirical frequency of a weight-1/2 support point") {
  const ModelConfig c = ModelConfig::bernoulli(1, 1.0, {1});
  const auto r = sample_realization(c, 2024, 0, 100000);
  const double freq = r.cells.sum() / 100000.0;
  CHECK(freq >= 0.49);
  CHECK(freq <= 0.51);
}

TEST_CASE("general finite laws sample according to their weights") {
  ModelConfig c = ModelConfig::bernoulli(1, 1.0, {1});
  c.disorder_support = {0.0, 1.0, 2.5};
  c.disorder_weights = {0.2, 0.3, 0.5};
  c.validate();
  const auto r = sample_realization(c, 3, 0, 100000);
  long n25 = 0;
  for (Eigen::Index k = 0; k < r.cells.cols(); ++k) n25 += r.cells(0, k) == 2.5;
  CHECK(n25 / 100000.0 == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("transfer table matches direct construction") {
  const ModelConfig c = n2();
  const TransferTable table(c, 0.3);
  REQUIRE(table.cached());
  CHECK(table.size() == 4);
  for (std::uint64_t code = 0; code < 4; ++code) {
    CHECK((table.matrix(code) - transfer_matrix(c, decode_site(c, code), 0.3).entries()).norm() == 0.0);
  }
}

TEST_CASE("derive_key is a pure function of its inputs") {
  CHECK(derive_key(1, {2, 3}) == derive_key(1, {2, 3}));
  CHECK(derive_key(1, {2, 3}) != derive_key(1, {3, 2}));
  CHECK(derive_key(1, {2}) != derive_key(2, {2}));
  CHECK(key_to_unit(0) == 0.0);
  CHECK(key_to_unit(~0ULL) < 1.0);
}
