#pragma once

#include <vector>

#include "qloop/tensor.hpp"

namespace qloop {

enum class XiMode { specialized, generic };

struct ModelParams {
  int n = 2;
  XiMode xi_mode = XiMode::specialized;
  int N() const { return 2 * n; }
};

// Fixes the rank and the xi branch. All scalars live in the shared variable
// registry: s is the quarter power of q, y the generic half power of xi.
struct Ctx {
  int n, N;
  XiMode mode;

  explicit Ctx(int rank, XiMode m = XiMode::specialized) : n(rank), N(2 * rank), mode(m) {
    if (rank < 1) throw QloopError("rank must be >= 1");
  }
  explicit Ctx(const ModelParams& p) : Ctx(p.n, p.xi_mode) {}

  RatScalar q() const { return RatScalar::var(VS, 4); }
  RatScalar qh() const { return RatScalar::var(VS, 2); }
  RatScalar qq() const { return RatScalar::var(VS, 1); }
  RatScalar xih() const {
    return mode == XiMode::specialized ? RatScalar::var(VS, 2 * (1 - n))
                                       : RatScalar::var(VY);
  }
  RatScalar xi() const {
    RatScalar h = xih();
    return h * h;
  }

  int prime(int i) const { return N + 1 - i; }
  bool is_mid(int i) const { return i == n || i == n + 1; }

  // doubled half-integer weight, 2*bar(i)
  int bar2(int i) const {
    if (i < 1 || i > N) throw IndexOutOfRange();
    if (i < n) return 2 * n - 1 - 2 * i;
    if (i > n + 1) return 2 * n + 3 - 2 * i;
    return 0;
  }
  RatScalar qbar(int i) const { return RatScalar::var(VS, 2 * bar2(i)); }

  RatScalar gamma() const { return q() - q().inv(); }
  RatScalar alpha() const { return q() - RatScalar::integer(2) + q().inv(); }
};

// ---- scalar functions ----

inline RatScalar f_fn(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return (u * c.q() - v * c.q().inv()) / (u - v);
}
inline RatScalar g_fn(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return c.gamma() * u / (u - v);
}
inline RatScalar gt_fn(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return c.gamma() * v / (u - v);
}
inline RatScalar frak_f(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return (c.qh() * u - v * c.qh().inv()) / (u - v);
}
inline RatScalar frak_g(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return (c.qh() - c.qh().inv()) * u / (u - v);
}
inline RatScalar frak_gt(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return (c.qh() - c.qh().inv()) * v / (u - v);
}

inline RatScalar p_fn(const Ctx& c, int i, int j, const RatScalar& u, const RatScalar& v) {
  if (i == j) return f_fn(c, u, v) - RatScalar::integer(1);
  return i < j ? gt_fn(c, u, v) : g_fn(c, u, v);
}

inline RatScalar q_fn(const Ctx& c, int i, int j, const RatScalar& u, const RatScalar& v,
                      const RatScalar& xi) {
  RatScalar val =
      RatScalar::var(VS, 2 * (c.bar2(i) - c.bar2(j))) * p_fn(c, j, i, v * xi, u);
  if (i == j && c.is_mid(i)) val = val - c.alpha();
  return val;
}
inline RatScalar q_fn(const Ctx& c, int i, int j, const RatScalar& u, const RatScalar& v) {
  return q_fn(c, i, j, u, v, c.xi());
}

// pole-kernel numerators of the mid 2x2 coupling
inline RatScalar q1_fn(const Ctx& c, const RatScalar& u, const RatScalar& v,
                       const RatScalar& xi) {
  return c.gamma() * (v * xi * xi + u) * (v + u) / (v * v * xi * xi - u * u);
}
inline RatScalar q2_fn(const Ctx& c, const RatScalar& u, const RatScalar& v,
                       const RatScalar& xi) {
  return c.gamma() * (xi * xi - RatScalar::integer(1)) * v * u /
         (v * v * xi * xi - u * u);
}

// mixing weights of the even/odd recombination, and their inverse-q twins
inline RatScalar alpha_pm(const Ctx& c, int pm, int m) {
  RatScalar t = RatScalar::var(VS, 4 * (m - 1));
  RatScalar num = pm > 0 ? RatScalar::integer(1) + t : RatScalar::integer(1) - t;
  return num * RatScalar::rational(1, 2) * c.qh().inv();
}
inline RatScalar alpha_pm_inv(const Ctx& c, int pm, int m) {
  RatScalar t = RatScalar::var(VS, 4 * (1 - m));
  RatScalar num = pm > 0 ? RatScalar::integer(1) + t : RatScalar::integer(1) - t;
  return num * RatScalar::rational(1, 2) * c.qh();
}

inline RatScalar phi_fn(const Ctx& c, int m, int i, int j, const RatScalar& u,
                        const RatScalar& v, const RatScalar& xi) {
  return alpha_pm(c, +1, m) * q_fn(c, i, j, u, v, xi) +
         alpha_pm(c, -1, m) * q_fn(c, i, j, RatScalar() - u, v, xi);
}
inline RatScalar phip_fn(const Ctx& c, int m, int i, int j, const RatScalar& u,
                         const RatScalar& v, const RatScalar& xi) {
  return alpha_pm_inv(c, +1, m) * q_fn(c, i, j, u, v, xi) +
         alpha_pm_inv(c, -1, m) * q_fn(c, i, j, RatScalar() - u, v, xi);
}

// ---- structural matrices ----

inline SparseMat d_mat(const Ctx& c) {
  SparseMat m = SparseMat::shape(c.N, 1);
  for (int i = 1; i <= c.N; ++i) m.set(i, i, c.qbar(i));
  return m;
}

inline SparseMat d_mat_inv(const Ctx& c) {
  SparseMat m = SparseMat::shape(c.N, 1);
  for (int i = 1; i <= c.N; ++i) m.set(i, i, c.qbar(i).inv());
  return m;
}

// involution exchanging the two middle labels
inline SparseMat u_mat(const Ctx& c) {
  SparseMat m = SparseMat::shape(c.N, 1);
  RatScalar one = RatScalar::integer(1);
  for (int i = 1; i <= c.N; ++i)
    m.set(i, c.is_mid(i) ? c.prime(i) : i, one);
  return m;
}

inline SparseMat uu_mat(const Ctx& c) {
  SparseMat m = SparseMat::shape(c.N, 1);
  RatScalar one = RatScalar::integer(1);
  RatScalar half = RatScalar::rational(1, 2);
  RatScalar ap = (one + c.xih().inv()) * half * c.qq().inv();
  RatScalar am = (one - c.xih().inv()) * half * c.qq().inv();
  for (int i = 1; i <= c.N; ++i) {
    if (c.is_mid(i)) {
      m.set(i, i, ap);
      m.set(i, c.prime(i), am);
    } else {
      m.set(i, i, one);
    }
  }
  return m;
}

inline SparseMat uu_inv_mat(const Ctx& c) {
  SparseMat m = SparseMat::shape(c.N, 1);
  RatScalar one = RatScalar::integer(1);
  RatScalar half = RatScalar::rational(1, 2);
  RatScalar ap = (one + c.xih()) * half * c.qq();
  RatScalar am = (one - c.xih()) * half * c.qq();
  for (int i = 1; i <= c.N; ++i) {
    if (c.is_mid(i)) {
      m.set(i, i, ap);
      m.set(i, c.prime(i), am);
    } else {
      m.set(i, i, one);
    }
  }
  return m;
}

inline SparseMat dt_mat(const Ctx& c) {
  SparseMat uu = uu_mat(c);
  return mat_mul(d_mat(c), mat_mul(uu, uu));
}

inline SparseMat conj(const SparseMat& M, const SparseMat& A, const SparseMat& Ainv) {
  return mat_mul(A, mat_mul(M, Ainv));
}

// ---- two-leg blocks ----

namespace detail_r {
inline void add_e2(SparseMat& out, int N, int r1, int c1, int r2, int c2,
                   const RatScalar& val) {
  if (val.is_zero()) return;
  out.add_to(flat_index({r1, r2}, N), flat_index({c1, c2}, N), val);
}
}  // namespace detail_r

inline SparseMat p_block(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  SparseMat out = SparseMat::shape(c.N, 2);
  for (int i = 1; i <= c.N; ++i)
    for (int j = 1; j <= c.N; ++j)
      detail_r::add_e2(out, c.N, j, i, i, j, p_fn(c, i, j, u, v));
  return out;
}

inline SparseMat qj_block(const Ctx& c, const RatScalar& u, const RatScalar& v,
                          const RatScalar& xi) {
  SparseMat out = SparseMat::shape(c.N, 2);
  for (int i = 1; i <= c.N; ++i)
    for (int j = 1; j <= c.N; ++j)
      detail_r::add_e2(out, c.N, c.prime(i), c.prime(j), i, j, q_fn(c, i, j, u, v, xi));
  return out;
}
inline SparseMat qj_block(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return qj_block(c, u, v, c.xi());
}

inline SparseMat x_block(const Ctx& c) {
  int n = c.N / 2;
  RatScalar pref = c.gamma() / (RatScalar::integer(8) * c.xih());
  SparseMat A = SparseMat::shape(c.N, 1);
  RatScalar one = RatScalar::integer(1);
  A.set(n, n + 1, one);
  A.set(n + 1, n, one);
  SparseMat B = SparseMat::shape(c.N, 1);
  RatScalar ximinus1 = c.xi() - one;
  RatScalar c2 = (c.xih() - one) * (c.xih() - one);
  B.set(n, n, ximinus1);
  B.set(n + 1, n + 1, RatScalar() - ximinus1);
  B.set(n + 1, n, c2);
  B.set(n, n + 1, RatScalar() - c2);
  return scalar_mul(pref, kron(A, B));
}

// Twisted Q via conjugation of the crossed permutation core.
inline SparseMat q_block(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  int N = c.N;
  SparseMat P12 = permutation(N);
  SparseMat D2 = tensor_embed(d_mat(c), {2}, 2);
  SparseMat D2i = tensor_embed(d_mat_inv(c), {2}, 2);
  SparseMat Pm = p_block(c, v * c.xi(), u);
  SparseMat core =
      mat_mul(D2, mat_mul(P12, mat_mul(anti_transpose(Pm, {1}), mat_mul(P12, D2i))));
  SparseMat UU2 = kron(uu_mat(c), uu_mat(c));
  SparseMat UU2i = kron(uu_inv_mat(c), uu_inv_mat(c));
  SparseMat res = conj(core, UU2, UU2i);
  RatScalar alph = c.alpha();
  for (int i = c.N / 2; i <= c.N / 2 + 1; ++i)
    detail_r::add_e2(res, N, i, i, i, i, RatScalar() - alph);
  return mat_add(res, x_block(c));
}

// Same matrix assembled from the entrywise coefficient functions instead of
// the crossed permutation core.
inline SparseMat q_block_assembled(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  int N = c.N;
  SparseMat UU2 = kron(uu_mat(c), uu_mat(c));
  SparseMat UU2i = kron(uu_inv_mat(c), uu_inv_mat(c));
  SparseMat res = conj(qj_block(c, u, v), UU2, UU2i);
  RatScalar alph = c.alpha();
  SparseMat corr = SparseMat::shape(N, 2);
  for (int i = c.N / 2; i <= c.N / 2 + 1; ++i)
    detail_r::add_e2(corr, N, c.prime(i), c.prime(i), i, i, alph);
  res = mat_add(res, conj(corr, UU2, UU2i));
  for (int i = c.N / 2; i <= c.N / 2 + 1; ++i)
    detail_r::add_e2(res, N, i, i, i, i, RatScalar() - alph);
  return mat_add(res, x_block(c));
}

// Even-in-y replacement for the twisted Q.
inline SparseMat qtilde_block(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  int n = c.N / 2, N = c.N;
  SparseMat out = SparseMat::shape(N, 2);
  RatScalar one = RatScalar::integer(1);
  RatScalar half = RatScalar::rational(1, 2);
  RatScalar xi = c.xi();
  RatScalar mxi = RatScalar() - xi;
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j) {
      int ip = c.prime(i), jp = c.prime(j);
      if (!c.is_mid(i) && !c.is_mid(j)) {
        RatScalar val =
            half * (q_fn(c, i, j, u, v, xi) + q_fn(c, i, j, u, v, mxi));
        detail_r::add_e2(out, N, ip, jp, i, j, val);
      } else if (c.is_mid(i) && !c.is_mid(j)) {
        RatScalar val = half * c.qh().inv() *
                        ((one + xi.inv()) * q_fn(c, i, j, u, v, xi) +
                         (one - xi.inv()) * q_fn(c, i, j, u, v, mxi));
        detail_r::add_e2(out, N, ip, jp, i, j, val);
      } else if (!c.is_mid(i) && c.is_mid(j)) {
        RatScalar val = half * c.qh() *
                        ((one + xi) * q_fn(c, i, j, u, v, xi) +
                         (one - xi) * q_fn(c, i, j, u, v, mxi));
        detail_r::add_e2(out, N, ip, jp, i, j, val);
      }
    }
  RatScalar quarter = RatScalar::rational(1, 4);
  RatScalar eighth = RatScalar::rational(1, 8);
  RatScalar Q1 = q1_fn(c, u, v, xi);
  RatScalar Q1m = q1_fn(c, RatScalar() - u, v, xi);
  RatScalar Q2 = q2_fn(c, u, v, xi);
  for (int i = n; i <= n + 1; ++i)
    for (int j = n; j <= n + 1; ++j) {
      int ip = c.prime(i), jp = c.prime(j);
      detail_r::add_e2(out, N, ip, jp, i, j, quarter * Q1);
      detail_r::add_e2(out, N, i, j, i, j, quarter * Q1m);
      struct Term {
        int r, c, s;
      };
      Term left[2] = {{i, j, 1}, {ip, jp, -1}};
      Term right[2] = {{i, jp, 1}, {ip, j, -1}};
      for (const Term& L : left)
        for (const Term& R : right)
          detail_r::add_e2(out, N, L.r, L.c, R.r, R.c,
                           eighth * RatScalar::integer(L.s * R.s) * Q2);
    }
  RatScalar alph = c.alpha();
  RatScalar gam = c.gamma();
  for (int r1 = n; r1 <= n + 1; ++r1)
    for (int r2 = n; r2 <= n + 1; ++r2)
      detail_r::add_e2(out, N, r1, r1, r2, r2, RatScalar() - quarter * alph);
  for (int r1 : {n, n + 1}) {
    int c1 = r1 == n ? n + 1 : n;
    detail_r::add_e2(out, N, r1, c1, n + 1, n, RatScalar() - quarter * gam);
    detail_r::add_e2(out, N, r1, c1, n, n + 1, quarter * gam);
  }
  return out;
}

// ---- entrywise presentation coefficients ----

inline RatScalar a_fn(const Ctx& c, int i, int j, const RatScalar& u, const RatScalar& v) {
  RatScalar arg1 = v * v * c.xi() * c.xi();
  RatScalar arg2 = u * u;
  if (i == j) return f_fn(c, arg1, arg2);
  RatScalar r = RatScalar::var(VS, 2 * (c.bar2(i) - c.bar2(j)));
  return i < j ? r * g_fn(c, arg1, arg2) : r * gt_fn(c, arg1, arg2);
}

inline RatScalar b_fn(const Ctx& c, int sgn, int i, const RatScalar& u, const RatScalar& v) {
  int n = c.N / 2;
  RatScalar r = RatScalar::var(VS, 2 * (c.bar2(n) - c.bar2(i)));
  RatScalar su = sgn > 0 ? u : RatScalar() - u;
  RatScalar val = i < n ? g_fn(c, su, v * c.xi()) : gt_fn(c, su, v * c.xi());
  return RatScalar() - r * val;
}

inline RatScalar c_fn(const Ctx& c, int sgn, const RatScalar& u, const RatScalar& v) {
  RatScalar su = sgn > 0 ? u : RatScalar() - u;
  RatScalar msu = sgn > 0 ? RatScalar() - u : u;
  return RatScalar::integer(1) +
         RatScalar::rational(1, 2) * (RatScalar::integer(1) + c.xi()) / c.gamma() *
             gt_fn(c, msu, v) * g_fn(c, su, v * c.xi());
}

inline RatScalar d_fn(const Ctx& c, int sgn, const RatScalar& u, const RatScalar& v) {
  RatScalar su = sgn > 0 ? u : RatScalar() - u;
  return RatScalar::rational(1, 2) * (RatScalar::integer(1) - c.xi()) / c.gamma() *
         gt_fn(c, su, v) * g_fn(c, su, v * c.xi());
}

// ---- gauged R-matrix, both presentations ----

inline SparseMat rj_compact(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  SparseMat I2 = identity(c.N, 2);
  SparseMat U1 = tensor_embed(u_mat(c), {1}, 2);
  RatScalar half = RatScalar::rational(1, 2);
  SparseMat part1 = mat_add(I2, mat_add(p_block(c, u, v), qj_block(c, u, v)));
  RatScalar mu = RatScalar() - u;
  SparseMat part2 = mat_add(I2, mat_add(p_block(c, mu, v), qj_block(c, mu, v)));
  return mat_add(scalar_mul(half, part1), scalar_mul(half, conj(part2, U1, U1)));
}

inline SparseMat rj_structured(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  int n = c.N / 2, N = c.N;
  SparseMat out = SparseMat::shape(N, 2);
  RatScalar half = RatScalar::rational(1, 2);
  RatScalar mu = RatScalar() - u;
  RatScalar f2 = f_fn(c, u * u, v * v);
  RatScalar g2 = g_fn(c, u * u, v * v);
  RatScalar gt2 = gt_fn(c, u * u, v * v);
  RatScalar one = RatScalar::integer(1);

  for (int i = 1; i <= N; ++i)
    if (!c.is_mid(i)) detail_r::add_e2(out, N, i, i, i, i, f2);
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      if (i != j && i != c.prime(j) && (!c.is_mid(i) || !c.is_mid(j)))
        detail_r::add_e2(out, N, i, i, j, j, one);
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      if (i < j && !c.is_mid(i) && !c.is_mid(j)) {
        detail_r::add_e2(out, N, i, j, j, i, g2);
        detail_r::add_e2(out, N, j, i, i, j, gt2);
      }
  for (int i = 1; i <= N; ++i)
    for (int j = 1; j <= N; ++j)
      if (!c.is_mid(i) && !c.is_mid(j))
        detail_r::add_e2(out, N, c.prime(i), c.prime(j), i, j, a_fn(c, i, j, u, v));

  for (int i = 1; i < n; ++i) {
    int ip = c.prime(i);
    for (int j = n; j <= n + 1; ++j) {
      int jp = c.prime(j);
      detail_r::add_e2(out, N, i, j, j, i, half * g_fn(c, u, v));
      detail_r::add_e2(out, N, j, ip, ip, j, half * g_fn(c, u, v));
      detail_r::add_e2(out, N, j, i, i, j, half * gt_fn(c, u, v));
      detail_r::add_e2(out, N, ip, j, j, ip, half * gt_fn(c, u, v));
      detail_r::add_e2(out, N, i, j, jp, i, half * g_fn(c, mu, v));
      detail_r::add_e2(out, N, j, ip, ip, jp, half * g_fn(c, mu, v));
      detail_r::add_e2(out, N, j, i, i, jp, half * gt_fn(c, mu, v));
      detail_r::add_e2(out, N, ip, j, jp, ip, half * gt_fn(c, mu, v));
    }
  }
  for (int i = 1; i <= N; ++i) {
    if (c.is_mid(i)) continue;
    int ip = c.prime(i);
    for (int j = n; j <= n + 1; ++j) {
      int jp = c.prime(j);
      RatScalar bp = half * b_fn(c, +1, i, u, v);
      RatScalar bm = half * b_fn(c, -1, i, u, v);
      detail_r::add_e2(out, N, i, j, ip, jp, bp);
      detail_r::add_e2(out, N, jp, ip, j, i, bp);
      detail_r::add_e2(out, N, i, j, ip, j, bm);
      detail_r::add_e2(out, N, j, ip, j, i, bm);
    }
  }
  for (int i = n; i <= n + 1; ++i) {
    int ip = c.prime(i);
    detail_r::add_e2(out, N, i, i, ip, ip, c_fn(c, +1, u, v));
    detail_r::add_e2(out, N, i, i, i, i, c_fn(c, -1, u, v));
    detail_r::add_e2(out, N, ip, i, i, ip, d_fn(c, +1, u, v));
    detail_r::add_e2(out, N, i, ip, i, ip, d_fn(c, -1, u, v));
  }
  return out;
}

// ---- twisted R-matrix ----

enum class QVariant { q, qtilde };

inline SparseMat r_mat(const Ctx& c, const RatScalar& u, const RatScalar& v,
                       QVariant variant = QVariant::q) {
  SparseMat I2 = identity(c.N, 2);
  SparseMat U1 = tensor_embed(u_mat(c), {1}, 2);
  RatScalar half = RatScalar::rational(1, 2);
  RatScalar mu = RatScalar() - u;
  SparseMat Q1 = variant == QVariant::q ? q_block(c, u, v) : qtilde_block(c, u, v);
  SparseMat Q2 = variant == QVariant::q ? q_block(c, mu, v) : qtilde_block(c, mu, v);
  SparseMat part1 = mat_add(I2, mat_add(p_block(c, u, v), Q1));
  SparseMat part2 = mat_add(I2, mat_add(p_block(c, mu, v), Q2));
  return mat_add(scalar_mul(half, part1), scalar_mul(half, conj(part2, U1, U1)));
}

inline SparseMat r_via_conj(const Ctx& c, const RatScalar& u, const RatScalar& v,
                            bool structured = false) {
  SparseMat UU2 = kron(uu_mat(c), uu_mat(c));
  SparseMat UU2i = kron(uu_inv_mat(c), uu_inv_mat(c));
  SparseMat RJ = structured ? rj_structured(c, u, v) : rj_compact(c, u, v);
  return conj(RJ, UU2, UU2i);
}

// half-symmetrized blocks entering R = I + scriptP + scriptQ
inline SparseMat script_sym(const Ctx& c, const SparseMat& at_u, const SparseMat& at_mu) {
  SparseMat U1 = tensor_embed(u_mat(c), {1}, 2);
  RatScalar half = RatScalar::rational(1, 2);
  return mat_add(scalar_mul(half, at_u), scalar_mul(half, conj(at_mu, U1, U1)));
}

inline SparseMat script_p(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return script_sym(c, p_block(c, u, v), p_block(c, RatScalar() - u, v));
}
inline SparseMat script_qj(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return script_sym(c, qj_block(c, u, v), qj_block(c, RatScalar() - u, v));
}
inline SparseMat script_q(const Ctx& c, const RatScalar& u, const RatScalar& v) {
  return script_sym(c, q_block(c, u, v), q_block(c, RatScalar() - u, v));
}

// rational degeneration: I + c/(u-v) P - c/(u-v+c(n-1)) Q with Q the
// anti-transpose of the permutation on one leg
inline SparseMat r_rational(int n) {
  int N = 2 * n;
  RatScalar u = RatScalar::var(VU), v = RatScalar::var(VV), cc = RatScalar::var(VC);
  SparseMat P = permutation(N);
  SparseMat Q = anti_transpose(P, {1});
  RatScalar kappa = RatScalar::integer(n - 1);
  SparseMat out = identity(N, 2);
  out = mat_add(out, scalar_mul(cc / (u - v), P));
  out = mat_sub(out, scalar_mul(cc / (u - v + cc * kappa), Q));
  return out;
}

}  // namespace qloop
