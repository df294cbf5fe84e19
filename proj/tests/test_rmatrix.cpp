#include <catch2/catch_amalgamated.hpp>

#include "qloop/rmatrix.hpp"

using namespace qloop;

namespace {

RatScalar uvar() { return RatScalar::var(VU); }
RatScalar vvar() { return RatScalar::var(VV); }

RatScalar subst_v_qu(const RatScalar& r) {
  return substitute(r, {{VV, RatScalar::var(VS, 4) * RatScalar::var(VU)}});
}

bool even_in_y(const LaurentPoly& p) {
  for (const auto& [e, c] : p.terms) {
    (void)c;
    if (e[VY] % 2 != 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("half-integer weights and the weight diagonal") {
  Ctx c3(3);
  std::vector<int> want = {3, 1, 0, 0, -1, -3};
  for (int i = 1; i <= 6; ++i) REQUIRE(c3.bar2(i) == want[i - 1]);
  SparseMat D = d_mat(c3);
  for (int i = 1; i <= 6; ++i)
    REQUIRE(D.get(i, i) == RatScalar::var(VS, 2 * want[i - 1]));

  for (int n = 1; n <= 5; ++n) {
    Ctx c(n);
    if (n >= 2) REQUIRE(c.bar2(1) == 2 * n - 3);
    REQUIRE(c.bar2(n) == 0);
    REQUIRE(c.bar2(n + 1) == 0);
  }
  REQUIRE_THROWS_AS(c3.bar2(0), IndexOutOfRange);
  REQUIRE_THROWS_AS(c3.bar2(7), IndexOutOfRange);
}

TEST_CASE("structural matrices obey their exact relations") {
  for (int n = 1; n <= 5; ++n) {
    for (XiMode mode : {XiMode::specialized, XiMode::generic}) {
      if (mode == XiMode::generic && n > 3) continue;
      Ctx c(n, mode);
      SparseMat I = identity(c.N);
      SparseMat U = u_mat(c);
      SparseMat UU = uu_mat(c);
      SparseMat UUi = uu_inv_mat(c);
      SparseMat D = d_mat(c);
      REQUIRE(mat_mul(U, U) == I);
      REQUIRE(mat_mul(UU, UUi) == I);
      REQUIRE(mat_mul(D, U) == mat_mul(U, D));
      REQUIRE(mat_mul(UU, U) == mat_mul(U, UU));
      REQUIRE(anti_transpose(D) == d_mat_inv(c));
      REQUIRE(anti_transpose(D) == invert(D));
      REQUIRE(anti_transpose(UU) == UU);
      REQUIRE(dt_mat(c) == mat_mul(D, mat_mul(UU, UU)));
    }
  }
}

TEST_CASE("pole kernel specializations at v equal to q times u") {
  Ctx c(2);
  RatScalar u = uvar(), v = vvar();
  RatScalar q = c.q();
  RatScalar one = RatScalar::integer(1);
  REQUIRE(subst_v_qu(f_fn(c, u * u, v * v)).is_zero());
  REQUIRE(subst_v_qu(g_fn(c, u * u, v * v)) == RatScalar() - q.inv());
  REQUIRE(subst_v_qu(gt_fn(c, u * u, v * v)) == RatScalar() - q);
  REQUIRE(subst_v_qu(g_fn(c, u, v)) == RatScalar() - (q.inv() + one));
  REQUIRE(subst_v_qu(g_fn(c, RatScalar() - u, v)) == RatScalar() - (q.inv() - one));
  REQUIRE(subst_v_qu(gt_fn(c, u, v)) == RatScalar() - (q + one));
  REQUIRE(subst_v_qu(gt_fn(c, RatScalar() - u, v)) == RatScalar() - (q - one));
}

TEST_CASE("entrywise assembly oracle for the permutation-type block") {
  Ctx c(2);
  RatScalar u = uvar(), v = vvar();
  SparseMat P = p_block(c, u, v);
  SparseMat alt = SparseMat::shape(c.N, 2);
  for (int i = 1; i <= c.N; ++i)
    for (int j = 1; j <= c.N; ++j)
      alt = mat_add(alt, scalar_mul(p_fn(c, i, j, u, v), kron(unit(j, i, c.N), unit(i, j, c.N))));
  REQUIRE(P == alt);

  SplitMix64 rng(31);
  PrimePoint pt = random_prime_point(default_primes()[0], rng);
  REQUIRE(mod_eval(P, pt) == mod_eval(alt, pt));
}

TEST_CASE("mid-coupling correction block commutes with the mid swap") {
  for (int n : {1, 2, 3}) {
    for (XiMode mode : {XiMode::specialized, XiMode::generic}) {
      Ctx c(n, mode);
      SparseMat X = x_block(c);
      SparseMat U1 = tensor_embed(u_mat(c), {1}, 2);
      REQUIRE(conj(X, U1, U1) == X);
    }
  }
}

TEST_CASE("crossed permutation core reproduces the coefficient block") {
  RatScalar u = uvar(), v = vvar();
  for (int n : {1, 2, 3}) {
    Ctx c(n);
    int N = c.N;
    SparseMat P12 = permutation(N);
    SparseMat D2 = tensor_embed(d_mat(c), {2}, 2);
    SparseMat D2i = tensor_embed(d_mat_inv(c), {2}, 2);
    SparseMat Pm = p_block(c, v * c.xi(), u);
    SparseMat core = mat_mul(
        D2, mat_mul(P12, mat_mul(anti_transpose(Pm, {1}), mat_mul(P12, D2i))));
    SparseMat corr = SparseMat::shape(N, 2);
    for (int i = n; i <= n + 1; ++i)
      corr.add_to(flat_index({c.prime(i), i}, N), flat_index({c.prime(i), i}, N),
                  c.alpha());
    REQUIRE(mat_sub(core, corr) == qj_block(c, u, v));
  }
}

TEST_CASE("both constructions of the twisted block agree") {
  RatScalar u = uvar(), v = vvar();
  for (int n : {1, 2}) {
    Ctx c(n);
    REQUIRE(q_block(c, u, v) == q_block_assembled(c, u, v));
  }
}

TEST_CASE("structured and compact presentations coincide") {
  RatScalar u = uvar(), v = vvar();
  for (int n : {1, 2}) {
    Ctx c(n);
    REQUIRE(rj_structured(c, u, v) == rj_compact(c, u, v));
  }
}

TEST_CASE("twisted matrix equals the conjugated presentation in all variants") {
  RatScalar u = uvar(), v = vvar();
  Ctx c(2);
  SparseMat R = r_mat(c, u, v, QVariant::q);
  REQUIRE(R == r_via_conj(c, u, v, false));
  REQUIRE(R == r_via_conj(c, u, v, true));
  REQUIRE(R == r_mat(c, u, v, QVariant::qtilde));
  REQUIRE(R == mat_add(identity(c.N, 2), mat_add(script_p(c, u, v), script_q(c, u, v))));
  REQUIRE(rj_compact(c, u, v) ==
          mat_add(identity(c.N, 2), mat_add(script_p(c, u, v), script_qj(c, u, v))));
}

TEST_CASE("rank one twisted matrix is diagonal") {
  Ctx c(1);
  RatScalar u = uvar(), v = vvar();
  SparseMat R = r_mat(c, u, v);
  RatScalar mu = RatScalar() - u;
  RatScalar mv = RatScalar() - v;
  RatScalar A = frak_f(c, u, v) * frak_f(c, v, mu);
  RatScalar B = frak_f(c, u, mv) * frak_f(c, v, u);
  SparseMat want = SparseMat::shape(2, 2);
  want.set(1, 1, A);
  want.set(2, 2, B);
  want.set(3, 3, B);
  want.set(4, 4, A);
  REQUIRE(R == want);
}

TEST_CASE("even variant stays even in the generic half power") {
  RatScalar u = uvar(), v = vvar();
  for (int n : {1, 2}) {
    Ctx c(n, XiMode::generic);
    SparseMat Qt = qtilde_block(c, u, v);
    REQUIRE(!Qt.is_zero());
    for (const auto& [rc, val] : Qt.entries) {
      (void)rc;
      REQUIRE(even_in_y(val.num()));
      REQUIRE(even_in_y(val.den()));
    }
  }
}

TEST_CASE("rational degeneration matrix") {
  for (int n : {1, 2, 3}) {
    SparseMat R = r_rational(n);
    int N = 2 * n;
    SparseMat P = permutation(N);
    REQUIRE(anti_transpose(P, {1}) == anti_transpose(P, {2}));
    RatScalar u = RatScalar::var(VU), v = RatScalar::var(VV), cc = RatScalar::var(VC);
    RatScalar one = RatScalar::integer(1);
    REQUIRE(R.get(1, 1) == one + cc / (u - v));
    if (n >= 2) {
      long d = flat_index({1, N}, N);
      REQUIRE(R.get(d, d) ==
              one - cc / (u - v + cc * RatScalar::integer(n - 1)));
    }
  }
}

TEST_CASE("flat part of the pole kernel degenerates at second order") {
  Ctx c(2);
  RatScalar al = c.alpha(), ga = c.gamma();
  REQUIRE(eps_limit(al).is_zero());
  REQUIRE(eps_limit(al / ga).is_zero());
  REQUIRE(eps_limit(al / (ga * ga)) == RatScalar::rational(1, 4));
}
