#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/multiprecision/eigen.hpp>

// Eigen 3.4 gives every dense type a void const_iterator, which Boost 1.74 mistakes for a
// byte container while resolving mixed number/matrix operators.
namespace boost::multiprecision::detail {
template <class S, int R, int C, int O, int MR, int MC>
struct is_byte_container<Eigen::Matrix<S, R, C, O, MR, MC>> : boost::false_type {};
template <class D>
struct is_byte_container<Eigen::MatrixBase<D>> : boost::false_type {};
template <class Op, class L, class R>
struct is_byte_container<Eigen::CwiseBinaryOp<Op, L, R>> : boost::false_type {};
}  // namespace boost::multiprecision::detail

#include "symplyap/lie.hpp"
#include "symplyap/model.hpp"

using namespace symplyap;
using Rational = boost::multiprecision::cpp_rational;
using RMat = MatrixX<Rational>;

namespace {

RMat X(int n, int i, int j) { return basis_x<Rational>(n, i, j); }
RMat Y(int n, int i, int j) { return basis_y<Rational>(n, i, j); }
RMat Z(int n, int i, int j) { return basis_z<Rational>(n, i, j); }
RMat br(const RMat& a, const RMat& b) { return bracket<Rational>(a, b); }
Rational delta(int a, int b) { return a == b ? Rational(1) : Rational(0); }
RMat zero(int n) { return RMat::Zero(2 * n, 2 * n); }
// Scalar times matrix, elementwise in exact arithmetic.
RMat sc(const Rational& s, const RMat& m) {
  return m.unaryExpr([&](const Rational& v) { return Rational(s * v); });
}

// X_ω(E) with integer couplings and E, in exact arithmetic.
RMat generator(int n, const std::vector<int>& omega, const std::vector<Rational>& c, const Rational& e) {
  RMat x = zero(n);
  for (int i = 0; i < n; ++i) {
    x(i, n + i) = 1;
    x(n + i, i) = c[i] * omega[i] - e;
    if (i + 1 < n) x(n + i, i + 1) = x(n + i + 1, i) = 1;
  }
  return x;
}

RMat J(int n) { return standard_J<Rational>(n); }

// Y_ij with the convention Y_ij = 0 when j is out of range (0-based).
RMat Y_or_zero(int n, int i, int j) { return j < 0 || j >= n ? zero(n) : Y(n, i, j); }

}  // namespace

TEST_CASE("canonical basis has dimension N(2N+1) and spans sp_N") {
  for (int n = 1; n <= 4; ++n) {
    const auto b = canonical_basis<double>(n);
    CHECK(b.dim() == n * (2 * n + 1));
    CHECK(stack_rank(b) == b.dim());
    CHECK(is_closed(b));
    const MatrixX<double> Jd = standard_J(n);
    for (const auto& m : b.elements) CHECK((m.transpose() * Jd + Jd * m).norm() == 0.0);
  }
  CHECK(canonical_basis<double>(1).dim() == 3);
  CHECK(canonical_basis<double>(2).dim() == 10);
  CHECK_THROWS_AS(canonical_basis<double>(0), ArgumentError);
}

TEST_CASE("[Z11, X11] = 2 X11") {
  CHECK(br(Z(1, 0, 0), X(1, 0, 0)) == sc(2, X(1, 0, 0)));
  CHECK((bracket<double>(basis_z(3, 0, 0), basis_x(3, 0, 0)) - 2 * basis_x(3, 0, 0)).norm() <= 1e-12);
}

TEST_CASE("structure relations (i)-(iii) hold exactly for N = 1, 2, 3") {
  for (int n = 1; n <= 3; ++n) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          for (int r = 0; r < n; ++r) {
            CAPTURE(n);
            CAPTURE(i);
            CAPTURE(j);
            CAPTURE(k);
            CAPTURE(r);
            CHECK(br(Z(n, i, j), X(n, k, r)) == sc(delta(j, k), X(n, i, r)) + sc(delta(j, r), X(n, i, k)));
            CHECK(br(Y(n, k, r), Z(n, i, j)) == sc(delta(i, k), Y(n, r, j)) + sc(delta(i, r), Y(n, k, j)));
            CHECK(br(X(n, i, j), Y(n, k, r)) ==
                  sc(Rational(1, 4), sc(delta(j, k), Z(n, i, r)) + sc(delta(j, r), Z(n, i, k)) +
                                    sc(delta(k, i), Z(n, j, r)) + sc(delta(i, r), Z(n, j, k))));
          }
  }
}

TEST_CASE("structure relations hold to 1e-12 in floating point") {
  const int n = 3;
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int r = 0; r < n; ++r) {
          const double d_jk = j == k, d_jr = j == r, d_ik = i == k, d_ir = i == r;
          const MatrixX<double> lhs = bracket<double>(basis_x(n, i, j), basis_y(n, k, r));
          const MatrixX<double> rhs = 0.25 * (d_jk * basis_z(n, i, r) + d_jr * basis_z(n, i, k) +
                                              d_ik * basis_z(n, j, r) + d_ir * basis_z(n, j, k));
          worst = std::max(worst, (lhs - rhs).norm());
          const MatrixX<double> zx = bracket<double>(basis_z(n, i, j), basis_x(n, k, r)) -
                                     (d_jk * basis_x(n, i, r) + d_jr * basis_x(n, i, k));
          worst = std::max(worst, zx.norm());
        }
  CHECK(worst <= 1e-12);
}

TEST_CASE("generation of sp_N from the near-diagonal X and Y") {
  const int n = 4;
  for (int i = 0; i < n; ++i) {
    // [X_ii, Y_ii] = Z_ii (the derivation writes a factor 2 here; direct computation gives 1).
    CHECK(br(X(n, i, i), Y(n, i, i)) == Z(n, i, i));
    if (i + 1 < n) CHECK(sc(2, br(X(n, i, i), Y(n, i, i + 1))) == Z(n, i, i + 1));
    if (i + 2 < n) {
      // X_{i,i+2} comes from [Z_{i,i+1}, X_{i+1,i+2}]; the bracket with Y_{i+1,i+2} vanishes.
      CHECK(br(Z(n, i, i + 1), X(n, i + 1, i + 2)) == X(n, i, i + 2));
      CHECK(br(Z(n, i, i + 1), Y(n, i + 1, i + 2)) == zero(n));
      CHECK(br(Y(n, i, i + 1), Z(n, i + 1, i + 2)) == Y(n, i, i + 2));
      CHECK(sc(4, br(X(n, i, i + 1), Y(n, i + 1, i + 2))) == Z(n, i, i + 2));
    }
  }
  std::vector<MatrixX<double>> gens;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < std::min(n, i + 2); ++j) {
      gens.push_back(basis_x(n, i, j));
      gens.push_back(basis_y(n, i, j));
    }
  CHECK(lie_closure(gens).dim() == n * (2 * n + 1));
}

TEST_CASE("proof steps 1-6 in exact arithmetic") {
  const std::vector<Rational> ones(3, Rational(1));
  for (int n = 1; n <= 3; ++n) {
    for (const Rational e : {Rational(0), Rational(1, 2), Rational(-3)}) {
      CAPTURE(n);
      const std::vector<int> zeros(n, 0);
      const RMat x0 = generator(n, zeros, ones, e);
      for (int i = 0; i < n; ++i) {
        std::vector<int> ei(n, 0);
        ei[i] = 1;
        const RMat xi = generator(n, ei, ones, e);
        // Step 1: [X_0, X_{e_i}] = Z_ii.
        CHECK(br(x0, xi) == Z(n, i, i));
        // Step 2: X_{e_i} − X_0 = Y_ii.
        CHECK(xi - x0 == Y(n, i, i));
        // Step 3, for every ω ∈ {0,1}^N.
        for (std::uint64_t code = 0; code < (1u << n); ++code) {
          std::vector<int> w(n);
          for (int k = 0; k < n; ++k) w[k] = (code >> k) & 1;
          const RMat lhs = br(generator(n, w, ones, e), Z(n, i, i));
          const RMat rhs = -sc(2, X(n, i, i)) + sc(2, Y_or_zero(n, i, i - 1)) + sc(2, Y_or_zero(n, i, i + 1)) +
                           sc(2 * (Rational(w[i]) - e), Y(n, i, i));
          CHECK(lhs == rhs);
        }
      }
      // Step 4: Σ(−X_ii + Y_{i,i−1} + Y_{i,i+1} − E Y_ii) − X_0 = [[0, −2I], [0, 0]], and J follows.
      RMat sum = zero(n), ysum = zero(n);
      for (int i = 0; i < n; ++i) {
        sum += -X(n, i, i) + Y_or_zero(n, i, i - 1) + Y_or_zero(n, i, i + 1) - sc(e, Y(n, i, i));
        ysum += Y(n, i, i);
      }
      RMat upper = zero(n);
      upper.topRightCorner(n, n) = -sc(2, RMat::Identity(n, n));
      CHECK(sum - x0 == upper);
      CHECK(sc(Rational(1, 2), sum - x0) + ysum == J(n));
      for (int i = 0; i < n; ++i) {
        // Step 5: [J, Z_ii] = 2Y_ii + 2X_ii.
        CHECK(br(J(n), Z(n, i, i)) == sc(2, Y(n, i, i)) + sc(2, X(n, i, i)));
        // Step 6.
        if (i + 1 < n) {
          CHECK(br(X(n, i, i), Y(n, i, i + 1)) == sc(Rational(1, 2), Z(n, i, i + 1)));
          CHECK(br(Z(n, i, i + 1), X(n, i + 1, i + 1)) == sc(2, X(n, i, i + 1)));
        }
      }
    }
  }
}

TEST_CASE("steps 1-3 with general couplings carry the factor c_i") {
  const int n = 2;
  const std::vector<Rational> c{Rational(3), Rational(-2)};
  const RMat x0 = generator(n, {0, 0}, c, Rational(1));
  const RMat x1 = generator(n, {1, 0}, c, Rational(1));
  CHECK(br(x0, x1) == sc(c[0], Z(n, 0, 0)));
  CHECK(x1 - x0 == sc(c[0], Y(n, 0, 0)));
}

TEST_CASE("exact closure of the generators for N = 1, 2") {
  const std::vector<Rational> ones(2, Rational(1));
  for (int n = 1; n <= 2; ++n) {
    std::vector<RMat> gens;
    for (std::uint64_t code = 0; code < (1u << n); ++code) {
      std::vector<int> w(n);
      for (int k = 0; k < n; ++k) w[k] = (code >> k) & 1;
      gens.push_back(generator(n, w, ones, Rational(1, 3)));
    }
    CHECK(lie_closure(gens).dim() == n * (2 * n + 1));
  }
}

TEST_CASE("closure examples") {
  MatrixX<double> a(2, 2), b(2, 2);
  a << 0, 1, 0, 0;
  b << 0, 1, 1, 0;
  CHECK(lie_closure<double>({a, b}).dim() == 3);
  CHECK(lie_closure<double>({standard_J(1)}).dim() == 1);
  CHECK(lie_closure<double>({}).dim() == 0);
  CHECK_THROWS_AS(lie_closure<double>({a, MatrixX<double>::Zero(4, 4)}), DimensionError);
}

TEST_CASE("closure of the transfer generators is sp_N for N = 1..4") {
  for (int n = 1; n <= 4; ++n) {
    for (double e : {0.0, 0.37, -2.5}) {
      for (double c : {1.0, -0.5}) {
        const ModelConfig cfg = ModelConfig::bernoulli(n, 0.5, std::vector<double>(n, c));
        std::vector<MatrixX<double>> gens;
        for (std::uint64_t code = 0; code < cfg.site_count(); ++code) {
          gens.push_back(hamiltonian_generator(cfg, decode_site(cfg, code), e).entries());
        }
        const auto basis = lie_closure(gens);
        CAPTURE(n);
        CAPTURE(e);
        CHECK(basis.dim() == n * (2 * n + 1));
        if (n <= 3) CHECK(is_closed(basis));
      }
    }
  }
}
