#include <catch2/catch_amalgamated.hpp>

#include "qloop/tensor.hpp"

using namespace qloop;

namespace {

RatScalar rnd_scalar(SplitMix64& rng) {
  long c = static_cast<long>(rng.range(1, 9)) - 5;
  if (c == 0) c = 5;
  RatScalar r = RatScalar::integer(c);
  switch (rng.below(4)) {
    case 0:
      r = r * RatScalar::var(VS, static_cast<int>(rng.range(1, 2)));
      break;
    case 1:
      r = r * RatScalar::var(VU);
      break;
    default:
      break;
  }
  return r;
}

SparseMat rnd_mat(SplitMix64& rng, int N, int legs, int fill_percent = 35) {
  SparseMat m = SparseMat::shape(N, legs);
  for (long r = 1; r <= m.dim; ++r)
    for (long c = 1; c <= m.dim; ++c)
      if (rng.below(100) < static_cast<uint64_t>(fill_percent))
        m.set(r, c, rnd_scalar(rng));
  return m;
}

}  // namespace

TEST_CASE("constructors build the expected exact matrices") {
  REQUIRE(mat_mul(permutation(4), permutation(4)) == identity(4, 2));
  REQUIRE(mat_mul(unit(1, 2, 4), unit(2, 3, 4)) == unit(1, 3, 4));
  REQUIRE(mat_mul(unit(1, 2, 4), unit(3, 1, 4)).is_zero());

  std::vector<RatScalar> d = {RatScalar::var(VU), RatScalar::integer(3)};
  SparseMat D = diagonal(d);
  REQUIRE(D.entries.size() == 2);
  REQUIRE(D.get(1, 1) == RatScalar::var(VU));
  REQUIRE(D.get(2, 2) == RatScalar::integer(3));

  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j) {
      SparseVec out = mat_vec(permutation(3), basis_vec({i, j}, 3));
      REQUIRE(out.entries.size() == 1);
      REQUIRE(out.get(flat_index({j, i}, 3)) == RatScalar::integer(1));
    }

  REQUIRE_THROWS_AS(unit(0, 2, 4), IndexOutOfRange);
  REQUIRE_THROWS_AS(unit(1, 5, 4), IndexOutOfRange);
}

TEST_CASE("tensor embedding places factors on the named legs") {
  SplitMix64 rng(21);
  SparseMat A = rnd_mat(rng, 3, 1);
  REQUIRE(tensor_embed(A, {1}, 2) == kron(A, identity(3)));
  SparseMat A2 = rnd_mat(rng, 3, 2);
  REQUIRE(tensor_embed(A2, {1, 2}, 2) == A2);

  SparseMat E = tensor_embed(A, {2}, 3);
  REQUIRE(E == kron(kron(identity(3), A), identity(3)));

  SparseMat R = rnd_mat(rng, 2, 2);
  SparseMat R13 = tensor_embed(R, {1, 3}, 3);
  for (int a = 1; a <= 2; ++a)
    for (int b = 1; b <= 2; ++b)
      for (int c = 1; c <= 2; ++c) {
        SparseVec out = mat_vec(R13, basis_vec({a, b, c}, 2));
        for (const auto& [idx, val] : out.entries) {
          std::vector<int> dg = unflatten(idx, 2, 3);
          REQUIRE(dg[1] == b);
          REQUIRE(val == R.get(flat_index({dg[0], dg[2]}, 2), flat_index({a, c}, 2)));
        }
      }

  REQUIRE(tensor_embed(identity(3), {2}, 3) == identity(3, 3));

  SparseMat S = rnd_mat(rng, 2, 2);
  SparseMat R12 = tensor_embed(R, {1, 2}, 4);
  SparseMat S34 = tensor_embed(S, {3, 4}, 4);
  REQUIRE(mat_mul(R12, S34) == mat_mul(S34, R12));

  REQUIRE_THROWS_AS(tensor_embed(R, {1, 1}, 3), LegMismatch);
  REQUIRE_THROWS_AS(tensor_embed(R, {0, 2}, 3), LegMismatch);
  REQUIRE_THROWS_AS(tensor_embed(R, {1}, 3), LegMismatch);
}

TEST_CASE("embedding respects composition on the same legs") {
  SplitMix64 rng(22);
  SparseMat A = rnd_mat(rng, 2, 2);
  SparseMat B = rnd_mat(rng, 2, 2);
  std::vector<int> legs = {3, 1};
  REQUIRE(tensor_embed(mat_mul(A, B), legs, 3) ==
          mat_mul(tensor_embed(A, legs, 3), tensor_embed(B, legs, 3)));
}

TEST_CASE("anti transposition flips through the anti-diagonal") {
  int N = 4;
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      REQUIRE(anti_transpose(unit(i, j, N)) == unit(N + 1 - j, N + 1 - i, N));

  SplitMix64 rng(23);
  SparseMat A = rnd_mat(rng, 3, 2);
  REQUIRE(anti_transpose(anti_transpose(A)) == A);
  REQUIRE(anti_transpose(anti_transpose(A, {1}), {1}) == A);
  REQUIRE(anti_transpose(anti_transpose(A, {2}), {2}) == A);
  REQUIRE(anti_transpose(anti_transpose(A, {1}), {2}) == anti_transpose(A));

  SparseMat A1 = anti_transpose(A, {1});
  for (int i = 1; i <= 3; ++i)
    for (int j = 1; j <= 3; ++j)
      for (int k = 1; k <= 3; ++k)
        for (int l = 1; l <= 3; ++l)
          REQUIRE(A1.get(flat_index({i, j}, 3), flat_index({k, l}, 3)) ==
                  A.get(flat_index({4 - k, j}, 3), flat_index({4 - i, l}, 3)));

  SparseMat B = rnd_mat(rng, 3, 2);
  REQUIRE(anti_transpose(mat_mul(A, B)) ==
          mat_mul(anti_transpose(B), anti_transpose(A)));
}

TEST_CASE("permutation conjugation swaps tensor factors") {
  SplitMix64 rng(24);
  SparseMat A = rnd_mat(rng, 3, 1);
  SparseMat B = rnd_mat(rng, 3, 1);
  SparseMat P = permutation(3);
  REQUIRE(mat_mul(P, mat_mul(kron(A, B), P)) == kron(B, A));
}

TEST_CASE("matrix algebra is exact and checks shapes") {
  SplitMix64 rng(25);
  SparseMat A = rnd_mat(rng, 2, 2);
  SparseMat B = rnd_mat(rng, 2, 2);
  REQUIRE(mat_mul(A, identity(2, 2)) == A);
  REQUIRE(mat_add(A, scalar_mul(RatScalar::integer(-1), A)).is_zero());
  REQUIRE(mat_sub(A, A).is_zero());

  SparseVec v;
  v.dim = 4;
  for (long i = 1; i <= 4; ++i)
    if (rng.below(2)) v.set(i, rnd_scalar(rng));
  SparseVec lhs = mat_vec(mat_mul(A, B), v);
  SparseVec rhs = mat_vec(A, mat_vec(B, v));
  REQUIRE(lhs.entries == rhs.entries);

  for (long c = 1; c <= 4; ++c) {
    SparseVec ej;
    ej.dim = 4;
    ej.set(c, RatScalar::integer(1));
    SparseVec col = mat_vec(A, ej);
    for (long r = 1; r <= 4; ++r) REQUIRE(col.get(r) == A.get(r, c));
  }

  SparseMat C = rnd_mat(rng, 3, 1);
  REQUIRE_THROWS_AS(mat_mul(A, C), DimMismatch);
  REQUIRE_THROWS_AS(mat_add(A, C), DimMismatch);
  SparseVec w;
  w.dim = 3;
  REQUIRE_THROWS_AS(mat_vec(A, w), DimMismatch);
}

TEST_CASE("modular product oracle agrees with exact products") {
  SplitMix64 rng(26);
  for (int round = 0; round < 5; ++round) {
    SparseMat A = rnd_mat(rng, 3, 1);
    SparseMat B = rnd_mat(rng, 3, 1);
    PrimePoint pt = random_prime_point(default_primes()[round % 3], rng);
    REQUIRE(mod_eval(mat_mul(A, B), pt) == mod_mul(mod_eval(A, pt), mod_eval(B, pt)));
  }
}

TEST_CASE("inversion over the fraction field") {
  std::vector<RatScalar> d = {RatScalar::var(VU), RatScalar::rational(3, 2)};
  SparseMat Dinv = invert(diagonal(d));
  REQUIRE(Dinv.get(1, 1) == RatScalar::var(VU).inv());
  REQUIRE(Dinv.get(2, 2) == RatScalar::rational(2, 3));

  SplitMix64 rng(27);
  SparseMat A;
  while (true) {
    A = rnd_mat(rng, 4, 1, 60);
    try {
      SparseMat Ai = invert(A);
      REQUIRE(mat_mul(A, Ai) == identity(4));
      REQUIRE(mat_mul(Ai, A) == identity(4));
      break;
    } catch (const SingularMatrix&) {
    }
  }

  SparseMat S = SparseMat::shape(2, 1);
  S.set(1, 1, RatScalar::integer(1));
  S.set(2, 2, RatScalar());
  REQUIRE_THROWS_AS(invert(S), SingularMatrix);

  SparseMat T = SparseMat::shape(2, 1);
  T.set(1, 1, RatScalar::integer(1));
  T.set(1, 2, RatScalar::integer(2));
  T.set(2, 1, RatScalar::integer(2));
  T.set(2, 2, RatScalar::integer(4));
  REQUIRE_THROWS_AS(invert(T), SingularMatrix);
}

TEST_CASE("json round trip preserves matrices and rejects unknown variables") {
  SplitMix64 rng(28);
  SparseMat A = rnd_mat(rng, 3, 2);
  nlohmann::json j = mat_to_json(A);
  REQUIRE(mat_from_json(j) == A);
  REQUIRE(j.at("N") == 3);
  REQUIRE(j.at("legs") == 2);
  for (const auto& e : j.at("entries")) {
    REQUIRE(e.at("r").get<long>() >= 0);
    REQUIRE(e.at("c").get<long>() >= 0);
  }

  nlohmann::json bad;
  bad["N"] = 2;
  bad["legs"] = 1;
  bad["entries"] = nlohmann::json::array();
  nlohmann::json e;
  e["r"] = 0;
  e["c"] = 0;
  e["num"] = "x^2";
  e["den"] = "1";
  bad["entries"].push_back(e);
  REQUIRE_THROWS_AS(mat_from_json(bad), UnknownVariable);
}
