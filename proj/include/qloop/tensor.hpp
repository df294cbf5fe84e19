#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qloop/scalar.hpp"

namespace qloop {

struct IndexOutOfRange : QloopError {
  IndexOutOfRange() : QloopError("index out of range") {}
};
struct LegMismatch : QloopError {
  LegMismatch() : QloopError("tensor leg mismatch") {}
};
struct DimMismatch : QloopError {
  DimMismatch() : QloopError("dimension mismatch") {}
};
struct SingularMatrix : QloopError {
  SingularMatrix() : QloopError("matrix is singular") {}
};

inline long pow_long(long base, int e) {
  long r = 1;
  while (e-- > 0) r *= base;
  return r;
}

// Basis labels |i1,...,ik> use 1-based digits; flat indices are 1..N^k.
inline long flat_index(const std::vector<int>& digits, int N) {
  long idx = 0;
  for (int d : digits) {
    if (d < 1 || d > N) throw IndexOutOfRange();
    idx = idx * N + (d - 1);
  }
  return idx + 1;
}

inline std::vector<int> unflatten(long idx, int N, int legs) {
  std::vector<int> d(legs);
  long x = idx - 1;
  for (int m = legs - 1; m >= 0; --m) {
    d[m] = static_cast<int>(x % N) + 1;
    x /= N;
  }
  return d;
}

struct SparseVec {
  long dim = 0;
  std::map<long, RatScalar> entries;  // 1-based flat index, no zeros

  void set(long i, const RatScalar& v) {
    if (i < 1 || i > dim) throw IndexOutOfRange();
    if (v.is_zero())
      entries.erase(i);
    else
      entries[i] = v;
  }
  RatScalar get(long i) const {
    auto it = entries.find(i);
    return it == entries.end() ? RatScalar() : it->second;
  }
};

inline SparseVec basis_vec(const std::vector<int>& digits, int N) {
  SparseVec v;
  v.dim = pow_long(N, static_cast<int>(digits.size()));
  v.entries[flat_index(digits, N)] = RatScalar::integer(1);
  return v;
}

struct SparseMat {
  int N = 0;
  int legs = 1;
  long dim = 0;  // N^legs
  std::map<std::pair<long, long>, RatScalar> entries;  // row-major, no zeros

  static SparseMat shape(int N, int legs) {
    SparseMat m;
    m.N = N;
    m.legs = legs;
    m.dim = pow_long(N, legs);
    return m;
  }

  void set(long r, long c, const RatScalar& v) {
    if (r < 1 || r > dim || c < 1 || c > dim) throw IndexOutOfRange();
    if (v.is_zero())
      entries.erase({r, c});
    else
      entries[{r, c}] = v;
  }
  void add_to(long r, long c, const RatScalar& v) { set(r, c, get(r, c) + v); }
  RatScalar get(long r, long c) const {
    auto it = entries.find({r, c});
    return it == entries.end() ? RatScalar() : it->second;
  }

  bool same_shape(const SparseMat& o) const {
    return N == o.N && legs == o.legs && dim == o.dim;
  }

  friend bool operator==(const SparseMat& a, const SparseMat& b) {
    return a.N == b.N && a.legs == b.legs && a.entries == b.entries;
  }
  friend bool operator!=(const SparseMat& a, const SparseMat& b) { return !(a == b); }

  bool is_zero() const { return entries.empty(); }
};

inline SparseMat identity(int N, int legs = 1) {
  SparseMat m = SparseMat::shape(N, legs);
  RatScalar one = RatScalar::integer(1);
  for (long i = 1; i <= m.dim; ++i) m.entries[{i, i}] = one;
  return m;
}

inline SparseMat unit(int i, int j, int N) {
  if (i < 1 || i > N || j < 1 || j > N) throw IndexOutOfRange();
  SparseMat m = SparseMat::shape(N, 1);
  m.entries[{i, j}] = RatScalar::integer(1);
  return m;
}

// P|i,j> = |j,i>
inline SparseMat permutation(int N) {
  SparseMat m = SparseMat::shape(N, 2);
  RatScalar one = RatScalar::integer(1);
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      m.entries[{flat_index({j, i}, N), flat_index({i, j}, N)}] = one;
  return m;
}

inline SparseMat diagonal(const std::vector<RatScalar>& d) {
  SparseMat m = SparseMat::shape(static_cast<int>(d.size()), 1);
  for (long i = 1; i <= m.dim; ++i)
    if (!d[i - 1].is_zero()) m.entries[{i, i}] = d[i - 1];
  return m;
}

// A acting on the named legs of a k-leg space, identity on the rest.
inline SparseMat tensor_embed(const SparseMat& A, const std::vector<int>& target_legs,
                              int total_legs) {
  int m = static_cast<int>(target_legs.size());
  if (m != A.legs || total_legs < m) throw LegMismatch();
  std::vector<char> used(total_legs + 1, 0);
  for (int l : target_legs) {
    if (l < 1 || l > total_legs || used[l]) throw LegMismatch();
    used[l] = 1;
  }
  std::vector<int> rest;
  for (int l = 1; l <= total_legs; ++l)
    if (!used[l]) rest.push_back(l);

  SparseMat out = SparseMat::shape(A.N, total_legs);
  long id_count = pow_long(A.N, static_cast<int>(rest.size()));
  std::vector<int> rd(total_legs), cd(total_legs);
  for (const auto& [rc, val] : A.entries) {
    std::vector<int> ar = unflatten(rc.first, A.N, A.legs);
    std::vector<int> ac = unflatten(rc.second, A.N, A.legs);
    for (long t = 0; t < id_count; ++t) {
      long x = t;
      for (size_t s = rest.size(); s-- > 0;) {
        int digit = static_cast<int>(x % A.N) + 1;
        x /= A.N;
        rd[rest[s] - 1] = digit;
        cd[rest[s] - 1] = digit;
      }
      for (int s = 0; s < m; ++s) {
        rd[target_legs[s] - 1] = ar[s];
        cd[target_legs[s] - 1] = ac[s];
      }
      out.entries[{flat_index(rd, A.N), flat_index(cd, A.N)}] = val;
    }
  }
  return out;
}

// Anti-diagonal transposition on the chosen legs: on a single leg the image
// of entry (r,c) sits at (c', r') with i' = N+1-i.
inline SparseMat anti_transpose(const SparseMat& A, const std::vector<int>& legs_subset) {
  std::vector<char> flip(A.legs + 1, 0);
  for (int l : legs_subset) {
    if (l < 1 || l > A.legs) throw IndexOutOfRange();
    flip[l] = 1;
  }
  SparseMat out = SparseMat::shape(A.N, A.legs);
  for (const auto& [rc, val] : A.entries) {
    std::vector<int> rd = unflatten(rc.first, A.N, A.legs);
    std::vector<int> cd = unflatten(rc.second, A.N, A.legs);
    for (int l = 1; l <= A.legs; ++l) {
      if (!flip[l]) continue;
      int r = rd[l - 1], c = cd[l - 1];
      rd[l - 1] = A.N + 1 - c;
      cd[l - 1] = A.N + 1 - r;
    }
    out.entries[{flat_index(rd, A.N), flat_index(cd, A.N)}] = val;
  }
  return out;
}

inline SparseMat anti_transpose(const SparseMat& A) {
  std::vector<int> all(A.legs);
  for (int l = 1; l <= A.legs; ++l) all[l - 1] = l;
  return anti_transpose(A, all);
}

// Kronecker product; legs concatenate, leg dimension must agree.
inline SparseMat kron(const SparseMat& A, const SparseMat& B) {
  if (A.N != B.N) throw LegMismatch();
  SparseMat out = SparseMat::shape(A.N, A.legs + B.legs);
  for (const auto& [arc, aval] : A.entries)
    for (const auto& [brc, bval] : B.entries) {
      RatScalar p = aval * bval;
      if (p.is_zero()) continue;
      long r = (arc.first - 1) * B.dim + brc.first;
      long c = (arc.second - 1) * B.dim + brc.second;
      out.entries[{r, c}] = p;
    }
  return out;
}

inline SparseMat mat_add(const SparseMat& A, const SparseMat& B) {
  if (!A.same_shape(B)) throw DimMismatch();
  SparseMat out = A;
  for (const auto& [rc, val] : B.entries) {
    RatScalar s = out.get(rc.first, rc.second) + val;
    if (s.is_zero())
      out.entries.erase(rc);
    else
      out.entries[rc] = s;
  }
  return out;
}

inline SparseMat mat_sub(const SparseMat& A, const SparseMat& B) {
  if (!A.same_shape(B)) throw DimMismatch();
  SparseMat out = A;
  for (const auto& [rc, val] : B.entries) {
    RatScalar s = out.get(rc.first, rc.second) - val;
    if (s.is_zero())
      out.entries.erase(rc);
    else
      out.entries[rc] = s;
  }
  return out;
}

inline SparseMat scalar_mul(const RatScalar& s, const SparseMat& A) {
  SparseMat out = SparseMat::shape(A.N, A.legs);
  if (s.is_zero()) return out;
  for (const auto& [rc, val] : A.entries) {
    RatScalar p = s * val;
    if (!p.is_zero()) out.entries[rc] = p;
  }
  return out;
}

inline SparseMat mat_mul(const SparseMat& A, const SparseMat& B) {
  if (!A.same_shape(B)) throw DimMismatch();
  std::map<long, std::vector<std::pair<long, const RatScalar*>>> brows;
  for (const auto& [rc, val] : B.entries) brows[rc.first].emplace_back(rc.second, &val);
  SparseMat out = SparseMat::shape(A.N, A.legs);
  for (const auto& [rc, aval] : A.entries) {
    auto it = brows.find(rc.second);
    if (it == brows.end()) continue;
    for (const auto& [c, bval] : it->second) {
      auto key = std::make_pair(rc.first, c);
      auto slot = out.entries.find(key);
      RatScalar p = aval * (*bval);
      if (slot == out.entries.end()) {
        if (!p.is_zero()) out.entries.emplace(key, std::move(p));
      } else {
        slot->second = slot->second + p;
        if (slot->second.is_zero()) out.entries.erase(slot);
      }
    }
  }
  return out;
}

inline SparseVec mat_vec(const SparseMat& A, const SparseVec& v) {
  if (A.dim != v.dim) throw DimMismatch();
  SparseVec out;
  out.dim = v.dim;
  for (const auto& [rc, aval] : A.entries) {
    auto it = v.entries.find(rc.second);
    if (it == v.entries.end()) continue;
    RatScalar p = aval * it->second;
    if (p.is_zero()) continue;
    auto slot = out.entries.find(rc.first);
    if (slot == out.entries.end())
      out.entries.emplace(rc.first, std::move(p));
    else {
      slot->second = slot->second + p;
      if (slot->second.is_zero()) out.entries.erase(slot);
    }
  }
  return out;
}

// Gauss-Jordan over the fraction field; every pivot is checked nonzero in
// canonical form before elimination.
inline SparseMat invert(const SparseMat& A) {
  long n = A.dim;
  std::vector<std::vector<RatScalar>> M(n, std::vector<RatScalar>(2 * n));
  for (const auto& [rc, val] : A.entries) M[rc.first - 1][rc.second - 1] = val;
  RatScalar one = RatScalar::integer(1);
  for (long i = 0; i < n; ++i) M[i][n + i] = one;

  for (long col = 0; col < n; ++col) {
    long piv = -1;
    for (long r = col; r < n; ++r)
      if (!M[r][col].is_zero()) {
        piv = r;
        break;
      }
    if (piv < 0) throw SingularMatrix();
    std::swap(M[col], M[piv]);
    RatScalar inv_p = M[col][col].inv();
    for (long c = col; c < 2 * n; ++c)
      if (!M[col][c].is_zero()) M[col][c] = M[col][c] * inv_p;
    for (long r = 0; r < n; ++r) {
      if (r == col || M[r][col].is_zero()) continue;
      RatScalar factor = M[r][col];
      for (long c = col; c < 2 * n; ++c) {
        if (M[col][c].is_zero()) continue;
        M[r][c] = M[r][c] - factor * M[col][c];
      }
    }
  }

  SparseMat out = SparseMat::shape(A.N, A.legs);
  for (long r = 0; r < n; ++r)
    for (long c = 0; c < n; ++c)
      if (!M[r][n + c].is_zero()) out.entries[{r + 1, c + 1}] = M[r][n + c];
  return out;
}

inline SparseMat transpose(const SparseMat& A) {
  SparseMat out = SparseMat::shape(A.N, A.legs);
  for (const auto& [rc, val] : A.entries) out.entries[{rc.second, rc.first}] = val;
  return out;
}

// Right action of a two-leg operator on the named legs of a tensor vector.
inline SparseVec apply_on_legs(const SparseMat& A, const SparseVec& x, int leg_a,
                               int leg_b, int total_legs) {
  if (A.legs != 2) throw LegMismatch();
  if (leg_a == leg_b || leg_a < 1 || leg_b < 1 || leg_a > total_legs ||
      leg_b > total_legs)
    throw LegMismatch();
  if (x.dim != pow_long(A.N, total_legs)) throw DimMismatch();
  std::map<std::pair<int, int>, std::vector<std::pair<std::pair<int, int>, const RatScalar*>>>
      cols;
  for (const auto& [rc, val] : A.entries) {
    int r1 = static_cast<int>((rc.first - 1) / A.N + 1);
    int r2 = static_cast<int>((rc.first - 1) % A.N + 1);
    int c1 = static_cast<int>((rc.second - 1) / A.N + 1);
    int c2 = static_cast<int>((rc.second - 1) % A.N + 1);
    cols[{c1, c2}].emplace_back(std::make_pair(r1, r2), &val);
  }
  SparseVec out;
  out.dim = x.dim;
  for (const auto& [idx, xv] : x.entries) {
    std::vector<int> digits = unflatten(idx, A.N, total_legs);
    auto it = cols.find({digits[leg_a - 1], digits[leg_b - 1]});
    if (it == cols.end()) continue;
    for (const auto& [rr, aval] : it->second) {
      std::vector<int> nd = digits;
      nd[leg_a - 1] = rr.first;
      nd[leg_b - 1] = rr.second;
      long ni = flat_index(nd, A.N);
      RatScalar p = (*aval) * xv;
      if (p.is_zero()) continue;
      auto slot = out.entries.find(ni);
      if (slot == out.entries.end())
        out.entries.emplace(ni, std::move(p));
      else {
        slot->second = slot->second + p;
        if (slot->second.is_zero()) out.entries.erase(slot);
      }
    }
  }
  return out;
}

// Common-denominator form: every entry is a Laurent numerator over one shared
// polynomial denominator.  Chained products stay in polynomial arithmetic,
// which sidesteps the GCD pressure of accumulating rational sums.
struct ClearedMat {
  int N = 0;
  int legs = 1;
  long dim = 0;
  LaurentPoly den;
  std::map<std::pair<long, long>, LaurentPoly> entries;
};

inline ClearedMat clear_denominators(const SparseMat& A) {
  ClearedMat out;
  out.N = A.N;
  out.legs = A.legs;
  out.dim = A.dim;
  LaurentPoly d = LaurentPoly::constant(1);
  for (const auto& [rc, val] : A.entries) {
    (void)rc;
    LaurentPoly g = detail::laurent_gcd(d, val.den());
    d = d * detail::divexact(val.den(), g);
  }
  out.den = d;
  for (const auto& [rc, val] : A.entries)
    out.entries[rc] = val.num() * detail::divexact(d, val.den());
  return out;
}

inline ClearedMat cleared_mul(const ClearedMat& A, const ClearedMat& B) {
  if (A.N != B.N || A.legs != B.legs || A.dim != B.dim) throw DimMismatch();
  std::map<long, std::vector<std::pair<long, const LaurentPoly*>>> brows;
  for (const auto& [rc, val] : B.entries) brows[rc.first].emplace_back(rc.second, &val);
  ClearedMat out;
  out.N = A.N;
  out.legs = A.legs;
  out.dim = A.dim;
  out.den = A.den * B.den;
  for (const auto& [rc, aval] : A.entries) {
    auto it = brows.find(rc.second);
    if (it == brows.end()) continue;
    for (const auto& [c, bval] : it->second) {
      auto key = std::make_pair(rc.first, c);
      auto slot = out.entries.find(key);
      if (slot == out.entries.end())
        out.entries.emplace(key, aval * (*bval));
      else
        slot->second = slot->second + aval * (*bval);
    }
  }
  for (auto it = out.entries.begin(); it != out.entries.end();)
    it = it->second.is_zero() ? out.entries.erase(it) : std::next(it);
  return out;
}

// First entry where the two cleared matrices differ as rational matrices,
// together with the exact scalar difference; equality cross-multiplies by the
// opposite denominators unless the denominators already coincide.
inline std::optional<std::pair<std::pair<long, long>, RatScalar>> cleared_mismatch(
    const ClearedMat& A, const ClearedMat& B) {
  if (A.dim != B.dim) throw DimMismatch();
  bool same_den = A.den == B.den;
  LaurentPoly zero;
  auto ita = A.entries.begin();
  auto itb = B.entries.begin();
  while (ita != A.entries.end() || itb != B.entries.end()) {
    std::pair<long, long> key;
    const LaurentPoly *pa = &zero, *pb = &zero;
    if (itb == B.entries.end() || (ita != A.entries.end() && ita->first < itb->first)) {
      key = ita->first;
      pa = &ita->second;
      ++ita;
    } else if (ita == A.entries.end() || itb->first < ita->first) {
      key = itb->first;
      pb = &itb->second;
      ++itb;
    } else {
      key = ita->first;
      pa = &ita->second;
      pb = &itb->second;
      ++ita;
      ++itb;
    }
    if (same_den) {
      if (*pa == *pb) continue;
      return std::make_pair(key, RatScalar(*pa - *pb, A.den));
    }
    LaurentPoly lhs = *pa * B.den;
    LaurentPoly rhs = *pb * A.den;
    if (lhs == rhs) continue;
    return std::make_pair(key, RatScalar(lhs - rhs, A.den * B.den));
  }
  return std::nullopt;
}

// Modular image of a matrix at one prime point; the plain product of two
// images serves as the fast oracle for exact products.
struct SparseModMat {
  long dim = 0;
  uint64_t p = 0;
  std::map<std::pair<long, long>, uint64_t> entries;

  uint64_t get(long r, long c) const {
    auto it = entries.find({r, c});
    return it == entries.end() ? 0 : it->second;
  }
  friend bool operator==(const SparseModMat& a, const SparseModMat& b) {
    return a.dim == b.dim && a.p == b.p && a.entries == b.entries;
  }
};

inline SparseModMat mod_eval(const SparseMat& A, const PrimePoint& pt) {
  SparseModMat out;
  out.dim = A.dim;
  out.p = pt.p;
  for (const auto& [rc, val] : A.entries) {
    uint64_t v = eval_mod_p(val, pt);
    if (v != 0) out.entries[rc] = v;
  }
  return out;
}

inline SparseModMat mod_mul(const SparseModMat& A, const SparseModMat& B) {
  if (A.dim != B.dim || A.p != B.p) throw DimMismatch();
  std::map<long, std::vector<std::pair<long, uint64_t>>> brows;
  for (const auto& [rc, val] : B.entries) brows[rc.first].emplace_back(rc.second, val);
  SparseModMat out;
  out.dim = A.dim;
  out.p = A.p;
  for (const auto& [rc, aval] : A.entries) {
    auto it = brows.find(rc.second);
    if (it == brows.end()) continue;
    for (const auto& [c, bval] : it->second) {
      auto key = std::make_pair(rc.first, c);
      uint64_t& slot = out.entries[key];
      slot = addmod(slot, mulmod(aval, bval, A.p), A.p);
    }
  }
  for (auto it = out.entries.begin(); it != out.entries.end();)
    it = it->second == 0 ? out.entries.erase(it) : std::next(it);
  return out;
}

inline SparseModMat mod_sub(const SparseModMat& A, const SparseModMat& B) {
  if (A.dim != B.dim || A.p != B.p) throw DimMismatch();
  SparseModMat out = A;
  for (const auto& [rc, val] : B.entries) {
    uint64_t s = submod(out.get(rc.first, rc.second), val, A.p);
    if (s == 0)
      out.entries.erase(rc);
    else
      out.entries[rc] = s;
  }
  return out;
}

struct SparseModVec {
  long dim = 0;
  uint64_t p = 0;
  std::map<long, uint64_t> entries;

  friend bool operator==(const SparseModVec& a, const SparseModVec& b) {
    return a.dim == b.dim && a.p == b.p && a.entries == b.entries;
  }
};

inline SparseModMat mod_transpose(const SparseModMat& A) {
  SparseModMat out;
  out.dim = A.dim;
  out.p = A.p;
  for (const auto& [rc, val] : A.entries) out.entries[{rc.second, rc.first}] = val;
  return out;
}

inline SparseModVec mod_apply_on_legs(const SparseModMat& A, int N,
                                      const SparseModVec& x, int leg_a, int leg_b,
                                      int total_legs) {
  if (A.dim != static_cast<long>(N) * N) throw DimMismatch();
  if (x.dim != pow_long(N, total_legs) || x.p != A.p) throw DimMismatch();
  std::map<std::pair<int, int>, std::vector<std::pair<std::pair<int, int>, uint64_t>>> cols;
  for (const auto& [rc, val] : A.entries) {
    int r1 = static_cast<int>((rc.first - 1) / N + 1);
    int r2 = static_cast<int>((rc.first - 1) % N + 1);
    int c1 = static_cast<int>((rc.second - 1) / N + 1);
    int c2 = static_cast<int>((rc.second - 1) % N + 1);
    cols[{c1, c2}].emplace_back(std::make_pair(r1, r2), val);
  }
  SparseModVec out;
  out.dim = x.dim;
  out.p = x.p;
  for (const auto& [idx, xv] : x.entries) {
    std::vector<int> digits = unflatten(idx, N, total_legs);
    auto it = cols.find({digits[leg_a - 1], digits[leg_b - 1]});
    if (it == cols.end()) continue;
    for (const auto& [rr, aval] : it->second) {
      std::vector<int> nd = digits;
      nd[leg_a - 1] = rr.first;
      nd[leg_b - 1] = rr.second;
      long ni = flat_index(nd, N);
      uint64_t& slot = out.entries[ni];
      slot = addmod(slot, mulmod(aval, xv, x.p), x.p);
    }
  }
  for (auto it = out.entries.begin(); it != out.entries.end();)
    it = it->second == 0 ? out.entries.erase(it) : std::next(it);
  return out;
}

inline nlohmann::json mat_to_json(const SparseMat& A) {
  nlohmann::json j;
  j["N"] = A.N;
  j["legs"] = A.legs;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [rc, val] : A.entries) {
    nlohmann::json e;
    e["r"] = rc.first - 1;
    e["c"] = rc.second - 1;
    e["num"] = poly_to_string(val.num());
    e["den"] = poly_to_string(val.den());
    arr.push_back(std::move(e));
  }
  j["entries"] = std::move(arr);
  return j;
}

inline SparseMat mat_from_json(const nlohmann::json& j) {
  SparseMat m = SparseMat::shape(j.at("N").get<int>(), j.at("legs").get<int>());
  for (const auto& e : j.at("entries")) {
    LaurentPoly num = poly_from_string(e.at("num").get<std::string>());
    LaurentPoly den = poly_from_string(e.at("den").get<std::string>());
    long r = e.at("r").get<long>() + 1;
    long c = e.at("c").get<long>() + 1;
    m.set(r, c, RatScalar(num, den));
  }
  return m;
}

}  // namespace qloop
