#include <catch2/catch_amalgamated.hpp>

#include "qloop/scalar.hpp"

using namespace qloop;

namespace {

RatScalar S(int p = 1) { return RatScalar::var(VS, p); }
RatScalar U() { return RatScalar::var(VU); }
RatScalar V() { return RatScalar::var(VV); }
RatScalar Q() { return RatScalar::q(); }

RatScalar gamma_q() { return Q() - Q().inv(); }
RatScalar alpha_q() { return Q() - RatScalar::integer(2) + Q().inv(); }

// (u q - v q^-1) / (u - v)
RatScalar f_uv(const RatScalar& u, const RatScalar& v) {
  return (u * Q() - v * Q().inv()) / (u - v);
}
RatScalar g_uv(const RatScalar& u, const RatScalar& v) {
  return gamma_q() * u / (u - v);
}
RatScalar gt_uv(const RatScalar& u, const RatScalar& v) {
  return gamma_q() * v / (u - v);
}

RatScalar random_scalar(SplitMix64& rng, bool nonzero = false) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    LaurentPoly num, den;
    int nt = 1 + static_cast<int>(rng.below(3));
    int dt = 1 + static_cast<int>(rng.below(2));
    auto random_poly = [&](int k) {
      LaurentPoly p;
      for (int t = 0; t < k; ++t) {
        Expo e = zero_expo();
        e[VS] = static_cast<int>(rng.range(-2, 2));
        e[VU] = static_cast<int>(rng.range(-2, 2));
        e[VV] = static_cast<int>(rng.range(-2, 2));
        long c = rng.range(-5, 5);
        p.add_term(e, mpq_class(c));
      }
      return p;
    };
    num = random_poly(nt);
    den = random_poly(dt);
    if (den.is_zero()) continue;
    RatScalar r(num, den);
    if (nonzero && r.is_zero()) continue;
    return r;
  }
  return RatScalar::integer(1);
}

}  // namespace

TEST_CASE("field basics and gcd cancellation") {
  RatScalar u = U(), v = V();
  CHECK((u - v) + (v - u) == RatScalar());
  RatScalar lhs = (u * u - v * v) / (u - v);
  CHECK(lhs == u + v);
  CHECK(gamma_q() * gamma_q().inv() == RatScalar::integer(1));
}

TEST_CASE("canonical denominator shape") {
  // denominator gains positive leading coefficient and sheds monomial content
  RatScalar r = RatScalar::integer(1) / (RatScalar::integer(-2) * U() * (U() - V()));
  CHECK(r.den().min_expo() == zero_expo());
  CHECK(r.den().leading_coeff() > 0);
  CHECK(r.canonical_invariant_holds());
  // 1/(u*(u-v)) keeps the monomial in the numerator
  RatScalar r2 = RatScalar::integer(1) / (U() * (U() - V()));
  CHECK(r2.num().terms.size() == 1);
  CHECK(r2.num().terms.begin()->first[VU] == -1);
}

TEST_CASE("substitution specializes exactly") {
  RatScalar f = f_uv(U(), V());
  RatScalar fq = substitute(f, {{VV, Q() * U()}});
  // compare against direct evaluation at 5 rational points
  SplitMix64 rng(2024);
  for (int i = 0; i < 5; ++i) {
    std::array<mpq_class, kNumVars> pt;
    pt.fill(0);
    pt[VS] = mpq_class(rng.range(2, 9));
    pt[VU] = mpq_class(rng.range(2, 40), rng.range(1, 7));
    mpq_class q4 = detail::mpq_pow_si(pt[VS], 4);
    std::array<mpq_class, kNumVars> pt2 = pt;
    pt2[VV] = q4 * pt[VU];
    CHECK(eval_exact(fq, pt) == eval_exact(f, pt2));
  }
  CHECK(substitute(f, {{VU, U()}}) == f);
  CHECK_THROWS_AS(substitute(g_uv(U(), V()), {{VV, U()}}), SubstitutionPole);
}

TEST_CASE("simultaneous substitution is not sequential") {
  // u -> v, v -> u swaps the arguments
  RatScalar r = U() / V();
  RatScalar sw = substitute(r, {{VU, V()}, {VV, U()}});
  CHECK(sw == V() / U());
}

TEST_CASE("exact evaluation matches hand value") {
  // r = (u*s - v*s^-1)/(u - v), treating the s slot as the deformation
  // parameter itself: at s=2, u=3, v=5 the value is (6 - 5/2)/(-2) = -7/4.
  RatScalar r = (U() * S() - V() * S(-1)) / (U() - V());
  std::array<mpq_class, kNumVars> pt;
  pt.fill(0);
  pt[VS] = 2;
  pt[VU] = 3;
  pt[VV] = 5;
  CHECK(eval_exact(r, pt) == mpq_class(-7, 4));
  CHECK(eval_exact(RatScalar(), pt) == 0);
  std::array<mpq_class, kNumVars> bad = pt;
  bad[VU] = 1;
  bad[VV] = 1;
  CHECK_THROWS_AS(eval_exact(g_uv(U(), V()), bad), PoleAtPoint);
}

TEST_CASE("limits against cancelled factors") {
  RatScalar f = f_uv(U(), V());
  RatScalar factor = (U() - V()) / U();
  CHECK(limit_with_factor(f, factor, VU, V()) == gamma_q());
  RatScalar reg = f_uv(U(), V() * V());
  CHECK(limit_with_factor(reg, RatScalar::integer(1), VU, V()) ==
        substitute(reg, {{VU, V()}}));
  RatScalar dbl = RatScalar::integer(1) / ((U() - V()) * (U() - V()));
  CHECK_THROWS_AS(limit_with_factor(dbl, U() - V(), VU, V()), ResidualPole);
}

TEST_CASE("scaling limit produces rational degeneration") {
  RatScalar c = RatScalar::var(VC);
  RatScalar target = RatScalar::integer(2) * c / (U() - V());
  CHECK(eps_limit(g_uv(U(), V())) == target);
  CHECK(eps_limit(RatScalar::integer(1)) == RatScalar::integer(1));
  CHECK(eps_limit(f_uv(U(), V()) - RatScalar::integer(1)) == target);
  CHECK(eps_limit(gt_uv(U(), V())) == target);
  // the second-difference combination opens at order two
  CHECK(eps_limit(alpha_q() / (gamma_q() * gamma_q())) == RatScalar::rational(1, 4));
  CHECK_THROWS_AS(eps_limit(gamma_q().inv()), NegativeOrderLimit);
  CHECK_THROWS_AS(scaling_substitute(U(), 1), QloopError);
}

TEST_CASE("field axioms on seeded triples") {
  SplitMix64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    RatScalar a = random_scalar(rng);
    RatScalar b = random_scalar(rng);
    RatScalar c = random_scalar(rng);
    REQUIRE((a + b) + c == a + (b + c));
    REQUIRE(a * (b + c) == a * b + a * c);
    REQUIRE(a + (-a) == RatScalar());
    REQUIRE((a * b) * c == a * (b * c));
    REQUIRE(a.canonical_invariant_holds());
    if (!a.is_zero()) REQUIRE(a * a.inv() == RatScalar::integer(1));
  }
}

TEST_CASE("cross multiplication agrees with canonical equality") {
  SplitMix64 rng(11);
  for (int i = 0; i < 300; ++i) {
    RatScalar a = random_scalar(rng);
    RatScalar b = random_scalar(rng, true);
    RatScalar c = random_scalar(rng);
    RatScalar d = random_scalar(rng, true);
    bool canon = (a / b == c / d);
    bool cross = (a * d - c * b).is_zero();
    REQUIRE(canon == cross);
  }
}

TEST_CASE("modular evaluation is a homomorphism") {
  SplitMix64 rng(13);
  auto primes = default_primes();
  for (int i = 0; i < 200; ++i) {
    RatScalar a = random_scalar(rng);
    RatScalar b = random_scalar(rng);
    PrimePoint pt = random_prime_point(primes[i % primes.size()], rng);
    try {
      uint64_t ea = eval_mod_p(a, pt);
      uint64_t eb = eval_mod_p(b, pt);
      uint64_t esum = eval_mod_p(a + b, pt);
      uint64_t eprod = eval_mod_p(a * b, pt);
      REQUIRE(esum == addmod(ea, eb, pt.p));
      REQUIRE(eprod == mulmod(ea, eb, pt.p));
    } catch (const PoleAtPoint&) {
      continue;  // a random point hit a denominator zero; skip
    }
  }
}

TEST_CASE("halving identities for the pole kernels") {
  RatScalar u = U(), v = V();
  RatScalar u2 = u * u, v2 = v * v;
  CHECK(f_uv(u, v) + f_uv(-u, v) == RatScalar::integer(2) * f_uv(u2, v2));
  CHECK(g_uv(u, v) + g_uv(-u, v) == RatScalar::integer(2) * g_uv(u2, v2));
  CHECK(gt_uv(u, v) + gt_uv(-u, v) == RatScalar::integer(2) * gt_uv(u2, v2));
}

TEST_CASE("canonical grammar round trip") {
  LaurentPoly p;
  {
    Expo e = zero_expo();
    e[VS] = 4;
    e[VU] = -1;
    e[VV] = 2;
    p.add_term(e, mpq_class(3, 2));
    p.add_term(zero_expo(), mpq_class(-1));
  }
  CHECK(poly_to_string(p) == "3/2*s^4*u^-1*v^2 - 1");
  CHECK(poly_from_string("3/2*s^4*u^-1*v^2 - 1") == p);
  CHECK(poly_to_string(LaurentPoly::zero()) == "0");
  CHECK(poly_from_string("0") == LaurentPoly::zero());
  CHECK_THROWS_AS(poly_from_string("3*zz^2"), UnknownVariable);

  SplitMix64 rng(17);
  for (int i = 0; i < 200; ++i) {
    RatScalar r = random_scalar(rng);
    CHECK(poly_from_string(poly_to_string(r.num())) == r.num());
    CHECK(poly_from_string(poly_to_string(r.den())) == r.den());
  }
}

TEST_CASE("division errors") {
  CHECK_THROWS_AS(RatScalar::integer(1) / RatScalar(), DivisionByZero);
  CHECK_THROWS_AS(RatScalar().inv(), DivisionByZero);
  CHECK_THROWS_AS(rat_ops(U(), RatScalar(), RatOp::div), DivisionByZero);
  CHECK(rat_ops(U(), V(), RatOp::sub) == U() - V());
}
