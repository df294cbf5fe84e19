#pragma once

// Exact scalars: sparse multivariate Laurent polynomials over Q and their
// fraction field, with a canonical form strong enough that zero testing is
// a map lookup.  Canonical fraction: denominator is a true polynomial
// (no negative exponents, monomial content stripped into the numerator),
// integer-primitive, positive leading coefficient under the fixed graded-lex
// order, and gcd(num, den) = 1.  The numerator may carry a Laurent monomial
// unit; with the denominator pinned this representation is unique.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "qloop/modular.hpp"

namespace qloop {

struct QloopError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivisionByZero : QloopError {
  DivisionByZero() : QloopError("DivisionByZero") {}
};
struct SubstitutionPole : QloopError {
  SubstitutionPole() : QloopError("SubstitutionPole") {}
};
struct PoleAtPoint : QloopError {
  PoleAtPoint() : QloopError("PoleAtPoint") {}
};
struct ResidualPole : QloopError {
  ResidualPole() : QloopError("ResidualPole") {}
};
struct TruncationUnstable : QloopError {
  TruncationUnstable() : QloopError("TruncationUnstable") {}
};
struct NegativeOrderLimit : QloopError {
  NegativeOrderLimit() : QloopError("NegativeOrderLimit") {}
};
struct ParseError : QloopError {
  explicit ParseError(const std::string& what) : QloopError("ParseError: " + what) {}
};
struct UnknownVariable : QloopError {
  explicit UnknownVariable(const std::string& name)
      : QloopError("UnknownVariable: " + name) {}
};

using Expo = std::array<int, kNumVars>;

inline Expo zero_expo() { return Expo{}; }

inline long total_degree(const Expo& e) {
  long d = 0;
  for (int x : e) d += x;
  return d;
}

// Graded lexicographic over the registry order, descending, so that the
// first map entry is the leading term.
struct GradedLexDesc {
  bool operator()(const Expo& a, const Expo& b) const {
    long da = total_degree(a), db = total_degree(b);
    if (da != db) return da > db;
    return a > b;
  }
};

class LaurentPoly {
 public:
  using Map = std::map<Expo, mpq_class, GradedLexDesc>;
  Map terms;

  LaurentPoly() = default;

  static LaurentPoly zero() { return LaurentPoly(); }

  static LaurentPoly constant(const mpq_class& c) {
    LaurentPoly p;
    if (c != 0) p.terms[zero_expo()] = c;
    return p;
  }

  static LaurentPoly monomial(const Expo& e, const mpq_class& c) {
    LaurentPoly p;
    if (c != 0) p.terms[e] = c;
    return p;
  }

  static LaurentPoly variable(int var, int power = 1) {
    Expo e = zero_expo();
    e[var] = power;
    return monomial(e, 1);
  }

  bool is_zero() const { return terms.empty(); }

  bool is_constant() const {
    return terms.empty() ||
           (terms.size() == 1 && terms.begin()->first == zero_expo());
  }

  bool is_monomial() const { return terms.size() == 1; }

  const mpq_class& leading_coeff() const {
    static const mpq_class kZero = 0;
    return terms.empty() ? kZero : terms.begin()->second;
  }

  friend bool operator==(const LaurentPoly& a, const LaurentPoly& b) {
    return a.terms == b.terms;
  }
  friend bool operator!=(const LaurentPoly& a, const LaurentPoly& b) {
    return !(a == b);
  }

  void add_term(const Expo& e, const mpq_class& c) {
    if (c == 0) return;
    auto it = terms.find(e);
    if (it == terms.end()) {
      terms.emplace(e, c);
    } else {
      it->second += c;
      if (it->second == 0) terms.erase(it);
    }
  }

  friend LaurentPoly operator+(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly r = a;
    for (const auto& [e, c] : b.terms) r.add_term(e, c);
    return r;
  }

  friend LaurentPoly operator-(const LaurentPoly& a) {
    LaurentPoly r = a;
    for (auto& [e, c] : r.terms) c = -c;
    return r;
  }

  friend LaurentPoly operator-(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly r = a;
    for (const auto& [e, c] : b.terms) r.add_term(e, -c);
    return r;
  }

  friend LaurentPoly operator*(const LaurentPoly& a, const LaurentPoly& b) {
    LaurentPoly r;
    if (a.is_zero() || b.is_zero()) return r;
    for (const auto& [ea, ca] : a.terms) {
      for (const auto& [eb, cb] : b.terms) {
        Expo e;
        for (int i = 0; i < kNumVars; ++i) e[i] = ea[i] + eb[i];
        r.add_term(e, ca * cb);
      }
    }
    return r;
  }

  friend LaurentPoly operator*(const LaurentPoly& a, const mpq_class& c) {
    LaurentPoly r;
    if (c == 0) return r;
    r = a;
    for (auto& [e, v] : r.terms) v *= c;
    return r;
  }

  LaurentPoly pow(int e) const;

  // Per-variable minimum exponent over all terms (0 on the zero polynomial).
  Expo min_expo() const {
    Expo m = zero_expo();
    bool first = true;
    for (const auto& [e, c] : terms) {
      (void)c;
      if (first) {
        m = e;
        first = false;
      } else {
        for (int i = 0; i < kNumVars; ++i) m[i] = std::min(m[i], e[i]);
      }
    }
    return m;
  }

  Expo max_expo() const {
    Expo m = zero_expo();
    bool first = true;
    for (const auto& [e, c] : terms) {
      (void)c;
      if (first) {
        m = e;
        first = false;
      } else {
        for (int i = 0; i < kNumVars; ++i) m[i] = std::max(m[i], e[i]);
      }
    }
    return m;
  }

  LaurentPoly shifted(const Expo& delta) const {
    LaurentPoly r;
    for (const auto& [e, c] : terms) {
      Expo ne;
      for (int i = 0; i < kNumVars; ++i) ne[i] = e[i] + delta[i];
      r.terms.emplace(ne, c);
    }
    return r;
  }

  int degree_in(int var) const {
    int d = 0;
    bool first = true;
    for (const auto& [e, c] : terms) {
      (void)c;
      if (first || e[var] > d) d = e[var];
      first = false;
    }
    return terms.empty() ? -1 : d;
  }

  bool uses(int var) const {
    for (const auto& [e, c] : terms) {
      (void)c;
      if (e[var] != 0) return true;
    }
    return false;
  }

  std::array<bool, kNumVars> vars_used() const {
    std::array<bool, kNumVars> used{};
    for (const auto& [e, c] : terms) {
      (void)c;
      for (int i = 0; i < kNumVars; ++i)
        if (e[i] != 0) used[i] = true;
    }
    return used;
  }
};

inline LaurentPoly LaurentPoly::pow(int e) const {
  if (e < 0) throw QloopError("LaurentPoly::pow: negative exponent");
  LaurentPoly r = constant(1);
  LaurentPoly base = *this;
  while (e) {
    if (e & 1) r = r * base;
    base = base * base;
    e >>= 1;
  }
  return r;
}

namespace detail {

// Signed rational content: the unique c with p/c integer-primitive and
// positive-leading under the global order.  content(0) := 1.
inline mpq_class rat_content(const LaurentPoly& p) {
  if (p.is_zero()) return 1;
  mpz_class g = 0, l = 1;
  for (const auto& [e, c] : p.terms) {
    (void)e;
    mpz_class cn = abs(c.get_num());
    mpz_class cd = c.get_den();
    mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), cn.get_mpz_t());
    mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), cd.get_mpz_t());
  }
  mpq_class content(g, l);
  content.canonicalize();
  if (p.leading_coeff() < 0) content = -content;
  return content;
}

inline LaurentPoly primitive_part(const LaurentPoly& p) {
  if (p.is_zero()) return p;
  mpq_class c = rat_content(p);
  mpq_class inv = 1 / c;
  return p * inv;
}

// Exact division of multivariate polynomials by leading-term elimination
// (valid because the graded-lex order is multiplicative).  Throws if the
// division is not exact; callers only divide by known divisors.
inline LaurentPoly divexact(const LaurentPoly& a, const LaurentPoly& b) {
  if (b.is_zero()) throw DivisionByZero();
  if (a.is_zero()) return a;
  if (b.is_constant()) {
    mpq_class inv = 1 / b.leading_coeff();
    return a * inv;
  }
  LaurentPoly rem = a, quot;
  const Expo& eb = b.terms.begin()->first;
  const mpq_class& cb = b.terms.begin()->second;
  while (!rem.is_zero()) {
    const Expo& er = rem.terms.begin()->first;
    const mpq_class& cr = rem.terms.begin()->second;
    Expo eq;
    for (int i = 0; i < kNumVars; ++i) eq[i] = er[i] - eb[i];
    mpq_class cq = cr / cb;
    LaurentPoly t = LaurentPoly::monomial(eq, cq);
    quot = quot + t;
    rem = rem - t * b;
    // the leading monomial must strictly drop on every exact-division step
    if (!rem.is_zero() && !GradedLexDesc{}(er, rem.terms.begin()->first))
      throw QloopError("divexact: non-exact division");
  }
  return quot;
}

LaurentPoly poly_gcd(const LaurentPoly& a, const LaurentPoly& b);

// Univariate view: coefficients (polynomials in the other variables) by
// degree in the main variable.
struct UPoly {
  int var;
  std::vector<LaurentPoly> coeff;  // index = degree in var

  int deg() const { return static_cast<int>(coeff.size()) - 1; }

  void trim() {
    while (!coeff.empty() && coeff.back().is_zero()) coeff.pop_back();
  }

  bool is_zero() const { return coeff.empty(); }

  LaurentPoly to_poly() const {
    LaurentPoly p;
    for (size_t d = 0; d < coeff.size(); ++d) {
      LaurentPoly xd = LaurentPoly::variable(var, static_cast<int>(d));
      p = p + coeff[d] * xd;
    }
    return p;
  }
};

inline UPoly to_upoly(const LaurentPoly& p, int var) {
  UPoly u;
  u.var = var;
  int d = p.degree_in(var);
  u.coeff.assign(static_cast<size_t>(d + 1), LaurentPoly());
  for (const auto& [e, c] : p.terms) {
    Expo stripped = e;
    int dv = e[var];
    stripped[var] = 0;
    u.coeff[static_cast<size_t>(dv)].add_term(stripped, c);
  }
  return u;
}

inline UPoly upoly_scale(const UPoly& a, const LaurentPoly& s) {
  UPoly r;
  r.var = a.var;
  r.coeff.reserve(a.coeff.size());
  for (const auto& c : a.coeff) r.coeff.push_back(c * s);
  r.trim();
  return r;
}

inline UPoly upoly_sub(const UPoly& a, const UPoly& b) {
  UPoly r;
  r.var = a.var;
  size_t n = std::max(a.coeff.size(), b.coeff.size());
  r.coeff.assign(n, LaurentPoly());
  for (size_t i = 0; i < n; ++i) {
    LaurentPoly x = i < a.coeff.size() ? a.coeff[i] : LaurentPoly();
    LaurentPoly y = i < b.coeff.size() ? b.coeff[i] : LaurentPoly();
    r.coeff[i] = x - y;
  }
  r.trim();
  return r;
}

// times the main variable to the k-th power
inline UPoly upoly_shift(const UPoly& a, int k) {
  UPoly r;
  r.var = a.var;
  r.coeff.assign(a.coeff.size() + static_cast<size_t>(k), LaurentPoly());
  for (size_t i = 0; i < a.coeff.size(); ++i)
    r.coeff[i + static_cast<size_t>(k)] = a.coeff[i];
  return r;
}

inline LaurentPoly upoly_content(const UPoly& a) {
  LaurentPoly g;
  for (const auto& c : a.coeff) {
    if (c.is_zero()) continue;
    g = poly_gcd(g, c);
    if (g.is_constant() && !g.is_zero()) return LaurentPoly::constant(1);
  }
  if (g.is_zero()) return LaurentPoly::constant(1);
  return g;
}

inline UPoly upoly_divexact_scalar(const UPoly& a, const LaurentPoly& s) {
  UPoly r;
  r.var = a.var;
  r.coeff.reserve(a.coeff.size());
  for (const auto& c : a.coeff)
    r.coeff.push_back(c.is_zero() ? c : divexact(c, s));
  return r;
}

// Strip both the polynomial content and the rational content; without the
// latter, pseudo-remainder chains over constant coefficients blow up
// exponentially in coefficient bit-length.
inline UPoly upoly_primitive(const UPoly& a) {
  if (a.is_zero()) return a;
  LaurentPoly pc = upoly_content(a);
  UPoly r = pc.is_constant() ? a : upoly_divexact_scalar(a, pc);
  mpz_class g = 0, l = 1;
  for (const auto& c : r.coeff) {
    for (const auto& [e, q] : c.terms) {
      (void)e;
      mpz_class cn = abs(q.get_num());
      mpz_class cd = q.get_den();
      mpz_gcd(g.get_mpz_t(), g.get_mpz_t(), cn.get_mpz_t());
      mpz_lcm(l.get_mpz_t(), l.get_mpz_t(), cd.get_mpz_t());
    }
  }
  mpq_class content(g, l);
  content.canonicalize();
  if (content != 1) {
    mpq_class inv = 1 / content;
    for (auto& c : r.coeff) c = c * inv;
  }
  return r;
}

// Certify coprimality of two primitive pure polynomials in their main
// variable by reducing to univariate images mod a fixed prime. If the
// leading coefficient of `a` keeps its degree under the evaluation and the
// univariate gcd of the images is constant, the gcd of the originals is
// constant too; any degenerate image reports "unknown" instead.
inline bool images_certify_coprime(const UPoly& a, const UPoly& b) {
  constexpr uint64_t P = 2305843009213693951ULL;
  SplitMix64 rng(0x5eed5eed5eed5eedULL);
  std::array<uint64_t, kNumVars> res{};
  for (int i = 0; i < kNumVars; ++i) res[i] = rng.range(1, P - 1);

  auto image = [&](const UPoly& u, std::vector<uint64_t>& out) -> bool {
    out.assign(u.coeff.size(), 0);
    for (size_t k = 0; k < u.coeff.size(); ++k) {
      uint64_t acc = 0;
      for (const auto& [e, c] : u.coeff[k].terms) {
        mpz_class cn = c.get_num(), cd = c.get_den();
        uint64_t den_r = mpz_fdiv_ui(cd.get_mpz_t(), P);
        if (den_r == 0) return false;
        uint64_t t = mulmod(mpz_fdiv_ui(cn.get_mpz_t(), P), invmod(den_r, P), P);
        for (int i = 0; i < kNumVars; ++i)
          if (e[i] > 0) t = mulmod(t, powmod(res[i], static_cast<uint64_t>(e[i]), P), P);
        acc = addmod(acc, t, P);
      }
      out[k] = acc;
    }
    while (!out.empty() && out.back() == 0) out.pop_back();
    return true;
  };

  std::vector<uint64_t> fa, fb;
  if (!image(a, fa) || !image(b, fb)) return false;
  if (fa.size() != a.coeff.size()) return false;  // lc(a) vanished
  if (fa.empty() || fb.empty()) return false;

  while (fb.size() > 1) {
    uint64_t lead = invmod(fb.back(), P);
    std::vector<uint64_t> r = fa;
    while (r.size() >= fb.size()) {
      uint64_t factor = mulmod(r.back(), lead, P);
      size_t off = r.size() - fb.size();
      for (size_t i = 0; i < fb.size(); ++i)
        r[off + i] = submod(r[off + i], mulmod(factor, fb[i], P), P);
      while (!r.empty() && r.back() == 0) r.pop_back();
    }
    if (r.empty()) return false;  // images share a factor
    fa = std::move(fb);
    fb = std::move(r);
  }
  return true;  // image gcd is a nonzero constant
}

// Pseudo-remainder up to a factor of lc(b)^k; the caller strips content
// immediately, so the exact normalization factor is irrelevant.
inline UPoly pseudo_rem(const UPoly& a, const UPoly& b) {
  UPoly r = a;
  const LaurentPoly& lb = b.coeff.back();
  int db = b.deg();
  while (!r.is_zero() && r.deg() >= db) {
    const LaurentPoly lr = r.coeff.back();
    int shift = r.deg() - db;
    r = upoly_sub(upoly_scale(r, lb), upoly_shift(upoly_scale(b, lr), shift));
  }
  return r;
}

// GCD of pure polynomials (no negative exponents) via recursive
// content / primitive-part reduction and a primitive PRS.
inline LaurentPoly poly_gcd(const LaurentPoly& a, const LaurentPoly& b) {
  if (a.is_zero()) return primitive_part(b);
  if (b.is_zero()) return primitive_part(a);
  if (a.is_constant() || b.is_constant()) return LaurentPoly::constant(1);
  if (a == b) return primitive_part(a);

  // Main variable: present in both, smallest joint degree (determinism:
  // ties broken by registry order).
  int var = -1;
  long best = 0;
  for (int i = 0; i < kNumVars; ++i) {
    if (!a.uses(i) || !b.uses(i)) continue;
    long score = static_cast<long>(a.degree_in(i)) + b.degree_in(i);
    if (var < 0 || score < best) {
      var = i;
      best = score;
    }
  }
  if (var < 0) return LaurentPoly::constant(1);

  UPoly ua = to_upoly(a, var);
  UPoly ub = to_upoly(b, var);
  LaurentPoly ca = upoly_content(ua);
  LaurentPoly cb = upoly_content(ub);
  UPoly pa = upoly_primitive(upoly_divexact_scalar(ua, ca));
  UPoly pb = upoly_primitive(upoly_divexact_scalar(ub, cb));
  LaurentPoly cg = poly_gcd(ca, cb);

  if (pa.deg() < pb.deg()) std::swap(pa, pb);
  if (images_certify_coprime(pa, pb)) return primitive_part(cg);
  while (true) {
    UPoly r = pseudo_rem(pa, pb);
    if (r.is_zero()) break;
    if (r.deg() == 0) {
      // coprime in the main variable
      return primitive_part(cg);
    }
    pa = pb;
    pb = upoly_primitive(r);
  }
  LaurentPoly g = pb.to_poly();
  return primitive_part(cg * primitive_part(g));
}

// Laurent wrapper: ignores monomial units on both sides.
inline LaurentPoly pure_part(const LaurentPoly& p) {
  Expo m = p.min_expo();
  for (auto& x : m) x = -x;
  return p.shifted(m);
}

inline LaurentPoly laurent_gcd(const LaurentPoly& a, const LaurentPoly& b) {
  if (a.is_zero()) return primitive_part(pure_part(b));
  if (b.is_zero()) return primitive_part(pure_part(a));
  return poly_gcd(pure_part(a), pure_part(b));
}

}  // namespace detail

class RatScalar {
 public:
  RatScalar() : num_(LaurentPoly::zero()), den_(LaurentPoly::constant(1)) {}

  RatScalar(const LaurentPoly& num, const LaurentPoly& den) : num_(num), den_(den) {
    normalize();
  }

  explicit RatScalar(const LaurentPoly& num)
      : num_(num), den_(LaurentPoly::constant(1)) {}

  static RatScalar integer(long v) {
    return RatScalar(LaurentPoly::constant(mpq_class(v)));
  }

  static RatScalar rational(long num, long den) {
    mpq_class c(num, den);
    c.canonicalize();
    return RatScalar(LaurentPoly::constant(c));
  }

  static RatScalar from_mpq(const mpq_class& c) {
    return RatScalar(LaurentPoly::constant(c));
  }

  static RatScalar var(int v, int power = 1) {
    return RatScalar(LaurentPoly::variable(v, power));
  }

  // q = s^4, q^{1/2} = s^2, q^{1/4} = s
  static RatScalar q(int quarters = 4) { return var(VS, quarters); }

  const LaurentPoly& num() const { return num_; }
  const LaurentPoly& den() const { return den_; }

  bool is_zero() const { return num_.is_zero(); }

  bool is_one() const {
    return num_ == LaurentPoly::constant(1) && den_ == LaurentPoly::constant(1);
  }

  friend bool operator==(const RatScalar& a, const RatScalar& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const RatScalar& a, const RatScalar& b) {
    return !(a == b);
  }

  friend RatScalar operator-(const RatScalar& a) {
    RatScalar r;
    r.num_ = -a.num_;
    r.den_ = a.den_;
    return r;
  }

  friend RatScalar operator+(const RatScalar& a, const RatScalar& b) {
    if (a.is_zero()) return b;
    if (b.is_zero()) return a;
    RatScalar r;
    if (a.den_ == b.den_) {
      LaurentPoly t = a.num_ + b.num_;
      if (t.is_zero()) return RatScalar();
      r.assign_reduced(t, a.den_, /*den_known_primitive=*/true,
                       /*gcd_known_trivial=*/false);
      return r;
    }
    LaurentPoly g0 = detail::poly_gcd(a.den_, b.den_);
    if (g0.is_constant()) {
      LaurentPoly t = a.num_ * b.den_ + b.num_ * a.den_;
      if (t.is_zero()) return RatScalar();
      r.num_ = t;
      r.den_ = a.den_ * b.den_;
      return r;
    }
    LaurentPoly da1 = detail::divexact(a.den_, g0);
    LaurentPoly db1 = detail::divexact(b.den_, g0);
    LaurentPoly t = a.num_ * db1 + b.num_ * da1;
    if (t.is_zero()) return RatScalar();
    LaurentPoly g1 = detail::laurent_gcd(t, g0);
    if (!g1.is_constant()) {
      Expo mt = t.min_expo();
      Expo neg = mt;
      for (auto& x : neg) x = -x;
      LaurentPoly tp = t.shifted(neg);
      tp = detail::divexact(tp, g1);
      t = tp.shifted(mt);
      g0 = detail::divexact(g0, g1);
    }
    r.num_ = t;
    r.den_ = g0 * da1 * db1;
    r.fix_scale();
    return r;
  }

  friend RatScalar operator-(const RatScalar& a, const RatScalar& b) {
    return a + (-b);
  }

  friend RatScalar operator*(const RatScalar& a, const RatScalar& b) {
    if (a.is_zero() || b.is_zero()) return RatScalar();
    RatScalar r;
    // cross-reduce before multiplying
    auto [na, mono_a] = split_monomial(a.num_);
    auto [nb, mono_b] = split_monomial(b.num_);
    LaurentPoly g1 = detail::poly_gcd(na, b.den_);
    LaurentPoly g2 = detail::poly_gcd(nb, a.den_);
    LaurentPoly pa = g1.is_constant() ? na : detail::divexact(na, g1);
    LaurentPoly pb = g2.is_constant() ? nb : detail::divexact(nb, g2);
    LaurentPoly da = g2.is_constant() ? a.den_ : detail::divexact(a.den_, g2);
    LaurentPoly db = g1.is_constant() ? b.den_ : detail::divexact(b.den_, g1);
    Expo mono;
    for (int i = 0; i < kNumVars; ++i) mono[i] = mono_a[i] + mono_b[i];
    r.num_ = (pa * pb).shifted(mono);
    r.den_ = da * db;
    r.fix_scale();
    return r;
  }

  RatScalar inv() const {
    if (is_zero()) throw DivisionByZero();
    RatScalar r;
    r.num_ = den_;
    r.den_ = num_;
    r.renormalize_den_side(/*skip_gcd=*/true);
    return r;
  }

  friend RatScalar operator/(const RatScalar& a, const RatScalar& b) {
    if (b.is_zero()) throw DivisionByZero();
    return a * b.inv();
  }

  RatScalar pow(int e) const {
    if (e == 0) return integer(1);
    if (e < 0) return inv().pow(-e);
    RatScalar r = integer(1);
    RatScalar base = *this;
    int k = e;
    while (k) {
      if (k & 1) r = r * base;
      base = base * base;
      k >>= 1;
    }
    return r;
  }

  std::array<bool, kNumVars> vars_used() const {
    auto a = num_.vars_used();
    auto b = den_.vars_used();
    for (int i = 0; i < kNumVars; ++i) a[i] = a[i] || b[i];
    return a;
  }

  // already-canonical check, used by the idempotence test
  bool canonical_invariant_holds() const {
    RatScalar copy;
    copy.num_ = num_;
    copy.den_ = den_;
    copy.normalize();
    return copy == *this;
  }

 private:
  LaurentPoly num_, den_;

  friend RatScalar rat_raw(const LaurentPoly&, const LaurentPoly&);

  static std::pair<LaurentPoly, Expo> split_monomial(const LaurentPoly& p) {
    Expo m = p.min_expo();
    Expo neg = m;
    for (auto& x : neg) x = -x;
    return {p.shifted(neg), m};
  }

  // full normalization from arbitrary num/den
  void normalize() {
    if (den_.is_zero()) throw DivisionByZero();
    if (num_.is_zero()) {
      den_ = LaurentPoly::constant(1);
      return;
    }
    renormalize_den_side();
  }

  // num/den arbitrary Laurent, num nonzero: make den pure+primitive+positive
  // and cancel the gcd.
  void renormalize_den_side(bool skip_gcd = false) {
    if (den_.is_zero()) throw DivisionByZero();
    auto [dp, dmono] = split_monomial(den_);
    Expo neg = dmono;
    for (auto& x : neg) x = -x;
    num_ = num_.shifted(neg);
    den_ = dp;
    if (!skip_gcd && !den_.is_constant()) {
      auto [np, nmono] = split_monomial(num_);
      LaurentPoly g = detail::poly_gcd(np, den_);
      if (!g.is_constant()) {
        np = detail::divexact(np, g);
        den_ = detail::divexact(den_, g);
        num_ = np.shifted(nmono);
      }
    }
    fix_scale();
  }

  // den known pure and gcd-free: enforce primitivity and sign only.
  void fix_scale() {
    if (den_.is_constant()) {
      mpq_class c = den_.leading_coeff();
      if (c != 1) {
        mpq_class inv = 1 / c;
        num_ = num_ * inv;
      }
      den_ = LaurentPoly::constant(1);
      return;
    }
    mpq_class c = detail::rat_content(den_);
    if (c != 1) {
      mpq_class inv = 1 / c;
      num_ = num_ * inv;
      den_ = den_ * inv;
    }
  }

  void assign_reduced(const LaurentPoly& n, const LaurentPoly& d,
                      bool den_known_primitive, bool gcd_known_trivial) {
    num_ = n;
    den_ = d;
    if (!gcd_known_trivial) {
      auto [np, nmono] = split_monomial(num_);
      LaurentPoly g = detail::poly_gcd(np, den_);
      if (!g.is_constant()) {
        np = detail::divexact(np, g);
        den_ = detail::divexact(den_, g);
        num_ = np.shifted(nmono);
      }
    }
    if (!den_known_primitive) fix_scale();
    if (den_.is_constant()) fix_scale();
  }
};

// Construct without re-normalization for values already known canonical.
inline RatScalar rat_raw(const LaurentPoly& num, const LaurentPoly& den) {
  RatScalar r;
  r.num_ = num;
  r.den_ = den;
  return r;
}

enum class RatOp { add, sub, mul, div, neg, inv };

inline RatScalar rat_ops(const RatScalar& a, const RatScalar& b, RatOp op) {
  switch (op) {
    case RatOp::add: return a + b;
    case RatOp::sub: return a - b;
    case RatOp::mul: return a * b;
    case RatOp::div: return a / b;
    case RatOp::neg: return -a;
    case RatOp::inv: return a.inv();
  }
  throw QloopError("rat_ops: bad op");
}

// ---------------------------------------------------------------------------
// substitution

using Binding = std::pair<int, RatScalar>;

namespace detail {

inline bool monomial_bindings(const std::vector<Binding>& bs) {
  for (const auto& [v, r] : bs) {
    (void)v;
    if (!(r.den().is_constant() && r.num().terms.size() <= 1)) return false;
  }
  return true;
}

inline LaurentPoly subst_poly_monomial(const LaurentPoly& p,
                                       const std::array<bool, kNumVars>& bound,
                                       const std::array<Expo, kNumVars>& mono,
                                       const std::array<mpq_class, kNumVars>& cf) {
  LaurentPoly out;
  for (const auto& [e, c] : p.terms) {
    Expo ne = zero_expo();
    mpq_class nc = c;
    bool dead = false;
    for (int i = 0; i < kNumVars && !dead; ++i) {
      int a = e[i];
      if (a == 0) continue;
      if (!bound[i]) {
        ne[i] += a;
        continue;
      }
      if (cf[i] == 0) {
        if (a > 0) {
          dead = true;  // entire term vanishes
        } else {
          throw SubstitutionPole();
        }
        continue;
      }
      // coefficient power
      mpq_class p2;
      mpz_class cn = cf[i].get_num(), cd = cf[i].get_den();
      unsigned long ab = static_cast<unsigned long>(a < 0 ? -a : a);
      mpz_class pn, pd;
      mpz_pow_ui(pn.get_mpz_t(), cn.get_mpz_t(), ab);
      mpz_pow_ui(pd.get_mpz_t(), cd.get_mpz_t(), ab);
      if (a > 0) p2 = mpq_class(pn, pd);
      else p2 = mpq_class(pd, pn);
      p2.canonicalize();
      nc *= p2;
      for (int k = 0; k < kNumVars; ++k) ne[k] += a * mono[i][k];
    }
    if (!dead) out.add_term(ne, nc);
  }
  return out;
}

inline RatScalar subst_poly_general(const LaurentPoly& p,
                                    const std::array<bool, kNumVars>& bound,
                                    const std::array<RatScalar, kNumVars>& repl) {
  RatScalar acc;
  for (const auto& [e, c] : p.terms) {
    RatScalar term = RatScalar::from_mpq(c);
    for (int i = 0; i < kNumVars; ++i) {
      int a = e[i];
      if (a == 0) continue;
      RatScalar base = bound[i] ? repl[i] : RatScalar::var(i);
      if (base.is_zero() && a < 0) throw SubstitutionPole();
      if (base.is_zero() && a > 0) {
        term = RatScalar();
        break;
      }
      term = term * base.pow(a);
    }
    acc = acc + term;
  }
  return acc;
}

}  // namespace detail

inline RatScalar substitute(const RatScalar& r, const std::vector<Binding>& bindings) {
  if (bindings.empty()) return r;
  std::array<bool, kNumVars> bound{};
  for (const auto& [v, val] : bindings) {
    (void)val;
    if (v < 0 || v >= kNumVars) throw QloopError("substitute: bad variable");
    if (bound[v]) throw QloopError("substitute: duplicate variable");
    bound[v] = true;
  }
  if (detail::monomial_bindings(bindings)) {
    std::array<Expo, kNumVars> mono{};
    std::array<mpq_class, kNumVars> cf{};
    for (auto& m : mono) m = zero_expo();
    for (const auto& [v, val] : bindings) {
      if (val.is_zero()) {
        cf[v] = 0;
        continue;
      }
      const auto& t = *val.num().terms.begin();
      mpq_class c = t.second / val.den().leading_coeff();
      mono[v] = t.first;
      cf[v] = c;
    }
    LaurentPoly nn = detail::subst_poly_monomial(r.num(), bound, mono, cf);
    LaurentPoly nd = detail::subst_poly_monomial(r.den(), bound, mono, cf);
    if (nd.is_zero()) throw SubstitutionPole();
    return RatScalar(nn, nd);
  }
  std::array<RatScalar, kNumVars> repl{};
  for (const auto& [v, val] : bindings) repl[v] = val;
  RatScalar nn = detail::subst_poly_general(r.num(), bound, repl);
  RatScalar nd = detail::subst_poly_general(r.den(), bound, repl);
  if (nd.is_zero()) throw SubstitutionPole();
  return nn / nd;
}

// ---------------------------------------------------------------------------
// evaluation

namespace detail {

inline mpq_class mpq_pow_si(const mpq_class& b, int e) {
  if (e == 0) return 1;
  mpz_class bn = b.get_num(), bd = b.get_den();
  unsigned long a = static_cast<unsigned long>(e < 0 ? -e : e);
  mpz_class pn, pd;
  mpz_pow_ui(pn.get_mpz_t(), bn.get_mpz_t(), a);
  mpz_pow_ui(pd.get_mpz_t(), bd.get_mpz_t(), a);
  mpq_class r = e > 0 ? mpq_class(pn, pd) : mpq_class(pd, pn);
  r.canonicalize();
  return r;
}

inline mpq_class eval_poly(const LaurentPoly& p,
                           const std::array<mpq_class, kNumVars>& pt) {
  mpq_class acc = 0;
  for (const auto& [e, c] : p.terms) {
    mpq_class t = c;
    bool dead = false;
    for (int i = 0; i < kNumVars && !dead; ++i) {
      if (e[i] == 0) continue;
      if (pt[i] == 0) {
        if (e[i] > 0) dead = true;
        else throw PoleAtPoint();
        continue;
      }
      t *= mpq_pow_si(pt[i], e[i]);
    }
    if (!dead) acc += t;
  }
  return acc;
}

inline uint64_t eval_poly_mod(const LaurentPoly& p, const PrimePoint& pt) {
  uint64_t acc = 0;
  const uint64_t P = pt.p;
  for (const auto& [e, c] : p.terms) {
    mpz_class cn = c.get_num(), cd = c.get_den();
    uint64_t num_r = mpz_fdiv_ui(cn.get_mpz_t(), P);
    uint64_t den_r = mpz_fdiv_ui(cd.get_mpz_t(), P);
    if (den_r == 0) throw PoleAtPoint();
    uint64_t t = mulmod(num_r, invmod(den_r, P), P);
    for (int i = 0; i < kNumVars; ++i) {
      int ex = e[i];
      if (ex == 0) continue;
      uint64_t base = pt.res[i] % P;
      if (base == 0) {
        if (ex > 0) {
          t = 0;
          break;
        }
        throw PoleAtPoint();
      }
      if (ex < 0) {
        base = invmod(base, P);
        ex = -ex;
      }
      t = mulmod(t, powmod(base, static_cast<uint64_t>(ex), P), P);
    }
    acc = addmod(acc, t, P);
  }
  return acc;
}

}  // namespace detail

inline mpq_class eval_exact(const RatScalar& r,
                            const std::array<mpq_class, kNumVars>& pt) {
  mpq_class d = detail::eval_poly(r.den(), pt);
  if (d == 0) throw PoleAtPoint();
  mpq_class n = detail::eval_poly(r.num(), pt);
  return n / d;
}

inline uint64_t eval_mod_p(const RatScalar& r, const PrimePoint& pt) {
  uint64_t d = detail::eval_poly_mod(r.den(), pt);
  if (d == 0) throw PoleAtPoint();
  uint64_t n = detail::eval_poly_mod(r.num(), pt);
  return mulmod(n, invmod(d, pt.p), pt.p);
}

// lim_{var -> value} factor * r, exact; the limit must be finite.
inline RatScalar limit_with_factor(const RatScalar& r, const RatScalar& factor,
                                   int var, const RatScalar& value) {
  RatScalar h = factor * r;
  try {
    return substitute(h, {{var, value}});
  } catch (const SubstitutionPole&) {
    throw ResidualPole();
  }
}

// ---------------------------------------------------------------------------
// scaling limit: u -> exp(eps*u), v -> exp(eps*v), q -> exp(eps*c),
// exp truncated at the given order, then eps -> 0 as the ratio of the
// lowest-order coefficients.

namespace detail {

// coefficients of eps^0..eps^order; entries are polynomials in u, v, c.
using EpsSeries = std::vector<LaurentPoly>;

inline EpsSeries eps_substitute_poly(const LaurentPoly& p, int order) {
  EpsSeries out(static_cast<size_t>(order + 1), LaurentPoly());
  for (const auto& [e, c] : p.terms) {
    for (int i = 0; i < kNumVars; ++i) {
      if (i == VS || i == VU || i == VV) continue;
      if (e[i] != 0)
        throw QloopError("scaling_substitute: input uses a variable outside {s,u,v}");
    }
    // log of the substituted monomial, divided by eps
    LaurentPoly L = LaurentPoly::variable(VC) * mpq_class(e[VS], 4) +
                    LaurentPoly::variable(VU) * mpq_class(e[VU]) +
                    LaurentPoly::variable(VV) * mpq_class(e[VV]);
    LaurentPoly pk = LaurentPoly::constant(1);
    out[0] = out[0] + pk * c;
    for (int k = 1; k <= order; ++k) {
      pk = pk * L * mpq_class(1, k);
      out[static_cast<size_t>(k)] = out[static_cast<size_t>(k)] + pk * c;
    }
  }
  return out;
}

inline int eps_valuation(const EpsSeries& s) {
  for (size_t k = 0; k < s.size(); ++k)
    if (!s[k].is_zero()) return static_cast<int>(k);
  return -1;  // zero through the truncation order
}

}  // namespace detail

inline RatScalar scaling_substitute(const RatScalar& r, int order) {
  if (order < 2) throw QloopError("scaling_substitute: order must be >= 2");
  if (r.is_zero()) return r;
  detail::EpsSeries num_s = detail::eps_substitute_poly(r.num(), order);
  detail::EpsSeries den_s = detail::eps_substitute_poly(r.den(), order);
  int vn = detail::eps_valuation(num_s);
  int vd = detail::eps_valuation(den_s);
  if (vd < 0) throw TruncationUnstable();
  if (vn < 0) throw TruncationUnstable();  // nonzero input invisible at this order
  if (vn < vd) throw NegativeOrderLimit();
  if (vn > vd) return RatScalar();
  return RatScalar(num_s[static_cast<size_t>(vn)], den_s[static_cast<size_t>(vd)]);
}

// order-2 evaluation with an automatic next-order stability re-check; if the
// truncation cannot resolve the valuations yet, the order is raised (bounded)
// before the two-order agreement is enforced.
inline RatScalar eps_limit(const RatScalar& r) {
  if (r.is_zero()) return r;
  const int kMaxOrder = 10;
  for (int order = 2; order + 1 <= kMaxOrder; ++order) {
    RatScalar a, b;
    try {
      a = scaling_substitute(r, order);
    } catch (const TruncationUnstable&) {
      continue;  // raise the order until the valuation becomes visible
    }
    b = scaling_substitute(r, order + 1);
    if (a != b) throw TruncationUnstable();
    return a;
  }
  throw TruncationUnstable();
}

// ---------------------------------------------------------------------------
// canonical string grammar: signed exact-fraction coefficients, "*"-joined
// variable powers, terms sorted by the monomial order.
// Example: "3/2*s^4*u^-1*v^2 - 1".

inline std::string poly_to_string(const LaurentPoly& p) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [e, c] : p.terms) {
    mpq_class a = c;
    bool neg = a < 0;
    if (neg) a = -a;
    if (first) {
      if (neg) out += "-";
      first = false;
    } else {
      out += neg ? " - " : " + ";
    }
    std::string vars;
    for (int i = 0; i < kNumVars; ++i) {
      if (e[i] == 0) continue;
      if (!vars.empty()) vars += "*";
      vars += var_names()[i];
      if (e[i] != 1) vars += "^" + std::to_string(e[i]);
    }
    if (vars.empty()) {
      out += a.get_str();
    } else if (a == 1) {
      out += vars;
    } else {
      out += a.get_str() + "*" + vars;
    }
  }
  return out;
}

inline std::string rat_to_string(const RatScalar& r) {
  if (r.den() == LaurentPoly::constant(1)) return poly_to_string(r.num());
  return "(" + poly_to_string(r.num()) + ") / (" + poly_to_string(r.den()) + ")";
}

inline LaurentPoly poly_from_string(const std::string& s) {
  // split into signed terms on " + " / " - ", with an optional leading sign
  std::vector<std::pair<int, std::string>> parts;
  size_t pos = 0;
  int sign = 1;
  std::string body = s;
  if (!body.empty() && (body[0] == '-' || body[0] == '+')) {
    sign = body[0] == '-' ? -1 : 1;
    body = body.substr(1);
    while (!body.empty() && body[0] == ' ') body = body.substr(1);
  }
  while (true) {
    size_t plus = body.find(" + ", pos);
    size_t minus = body.find(" - ", pos);
    size_t cut = std::min(plus, minus);
    if (cut == std::string::npos) {
      parts.emplace_back(sign, body.substr(pos));
      break;
    }
    parts.emplace_back(sign, body.substr(pos, cut - pos));
    sign = (cut == minus) ? -1 : 1;
    pos = cut + 3;
  }
  LaurentPoly out;
  for (auto& [sg, term] : parts) {
    while (!term.empty() && term.back() == ' ') term.pop_back();
    while (!term.empty() && term.front() == ' ') term = term.substr(1);
    if (term.empty()) throw ParseError("empty term");
    if (term == "0") continue;
    mpq_class coeff = 1;
    Expo e = zero_expo();
    size_t fpos = 0;
    while (fpos < term.size()) {
      size_t star = term.find('*', fpos);
      std::string factor = term.substr(
          fpos, star == std::string::npos ? std::string::npos : star - fpos);
      if (factor.empty()) throw ParseError("empty factor in '" + term + "'");
      if (std::isdigit(static_cast<unsigned char>(factor[0]))) {
        try {
          mpq_class c(factor);
          c.canonicalize();
          coeff *= c;
        } catch (const std::exception&) {
          throw ParseError("bad coefficient '" + factor + "'");
        }
      } else {
        size_t caret = factor.find('^');
        std::string name =
            caret == std::string::npos ? factor : factor.substr(0, caret);
        int vi = var_index(name);
        if (vi < 0) throw UnknownVariable(name);
        int ex = 1;
        if (caret != std::string::npos) {
          try {
            ex = std::stoi(factor.substr(caret + 1));
          } catch (const std::exception&) {
            throw ParseError("bad exponent in '" + factor + "'");
          }
        }
        e[vi] += ex;
      }
      if (star == std::string::npos) break;
      fpos = star + 1;
    }
    out.add_term(e, sg < 0 ? mpq_class(-coeff) : coeff);
  }
  return out;
}

}  // namespace qloop
