#pragma once

#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <utility>
#include <vector>

#include "cwqed/core.hpp"
#include "cwqed/smatrix.hpp"

namespace cwqed {

struct DiagramConfig {
  PhysParams params;
  bool include_loops = false;
};

enum class Diagram { C1 = 1, C2, C3, C4, C5, C6 };

// The six orderings (a, b) of the outgoing momenta (p1, p2, p3 = -p1-p2).
inline std::array<std::pair<cplx, cplx>, 6> momentum_permutations(cplx p1, cplx p2) {
  const cplx p3 = -p1 - p2;
  return {{{p1, p2}, {p1, p3}, {p2, p1}, {p2, p3}, {p3, p1}, {p3, p2}}};
}

namespace detail {

inline cplx tk(cplx k, double beta) { return transmission_c(k, beta); }

// S(n) = sum_{j=0}^{n} t0^{3j} A^{n-j}, n = 0..nmax.
inline std::vector<cplx> chain_sums(cplx A, double t0, int nmax) {
  std::vector<cplx> s(std::max(nmax, 0) + 1);
  double t3 = 1.0;
  s[0] = 1.0;
  for (int n = 1; n <= nmax; ++n) {
    t3 *= t0 * t0 * t0;
    s[n] = A * s[n - 1] + t3;
  }
  return s;
}

// Gauss-Legendre nodes and weights on [0,1] exact for polynomials up to a given degree.
struct UnitGauss {
  std::vector<double> x, w;
  int degree = 0;

  template <int N>
  static UnitGauss make() {
    using G = boost::math::quadrature::gauss<double, N>;
    UnitGauss g;
    g.degree = 2 * N - 1;
    const auto& a = G::abscissa();
    const auto& wt = G::weights();
    for (std::size_t i = 0; i < a.size(); ++i) {
      g.x.push_back(0.5 * (1.0 - a[i]));
      g.w.push_back(0.5 * wt[i]);
      if (a[i] == 0.0) continue;
      g.x.push_back(0.5 * (1.0 + a[i]));
      g.w.push_back(0.5 * wt[i]);
    }
    return g;
  }
  static const UnitGauss& get(int degree) {
    static const UnitGauss g40 = make<40>();
    if (degree <= g40.degree) return g40;
    static const UnitGauss g80 = make<80>();
    if (degree <= g80.degree) return g80;
    static const UnitGauss g160 = make<160>();
    if (degree <= g160.degree) return g160;
    throw unsupported_parameters("loop order beyond quadrature table");
  }
};

// table[r][s] = int_0^1 t^{r+shift} (1 - z t)^{s+shift} dt for 0 <= r,s <= n.
inline std::vector<cplx> poly_moments(cplx z, int n, int shift) {
  const auto& g = UnitGauss::get(2 * (n + shift));
  const int w = n + 1;
  std::vector<cplx> out(w * w, 0.0);
  std::vector<double> tr(w);
  std::vector<cplx> os(w);
  for (std::size_t i = 0; i < g.x.size(); ++i) {
    const double t = g.x[i];
    const cplx om = 1.0 - z * t;
    double a = g.w[i] * powi(t, shift);
    cplx b = powi(om, shift);
    for (int r = 0; r <= n; ++r, a *= t) tr[r] = a;
    for (int s = 0; s <= n; ++s, b *= om) os[s] = b;
    for (int r = 0; r <= n; ++r)
      for (int s = 0; s <= n; ++s) out[r * w + s] += tr[r] * os[s];
  }
  return out;
}

}  // namespace detail

// T^{3v}: single three-photon vertex at one atom, transmissions elsewhere.
inline cplx t3v(cplx p1, cplx p2, const DiagramConfig& cfg) {
  const auto& prm = cfg.params;
  const int M = prm.num_atoms;
  const double b = prm.beta;
  const cplx p3 = -p1 - p2;
  const cplx A = detail::tk(p1, b) * detail::tk(p2, b) * detail::tk(p3, b);
  const auto S = detail::chain_sums(A, prm.t0(), M - 1);
  return b * b * b * s3c({p1, p2, p3}, {0.0, 0.0, 0.0}) * S[M - 1];
}

// One ordering of T^{4v}: two-photon vertex on (p2,p3) after a two-photon vertex
// on (p1, q2 = -p1).
inline cplx t4v_single(cplx p1, cplx p2, cplx p3, const DiagramConfig& cfg) {
  const auto& prm = cfg.params;
  const int M = prm.num_atoms;
  if (M < 2) return 0.0;
  const double b = prm.beta, t0 = prm.t0();
  const cplx q2 = -p1;
  const cplx x = detail::tk(p2, b) * detail::tk(p3, b);
  const cplx y = detail::tk(q2, b) * t0;
  const cplx t1 = detail::tk(p1, b);
  const cplx pref = b * b * b * b * s2c(p2, p3, q2, 0.0) * s2c(p1, q2, 0.0, 0.0);
  cplx g = 1.0, yn = 1.0, t1n = t1, sum = 0.0;
  for (int n = 0; n <= M - 2; ++n) {
    if (n > 0) {
      yn *= y;
      g = x * g + yn;
      t1n *= t1;
    }
    sum += powi(t0, 3 * (M - 2 - n)) * t1n * g;
  }
  return pref * t0 * sum;
}

inline cplx t4v(cplx p1, cplx p2, const DiagramConfig& cfg) {
  const cplx p3 = -p1 - p2;
  const std::array<cplx, 3> p{p1, p2, p3};
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  cplx s = 0.0;
  for (const auto& q : perms) s += t4v_single(p[q[0]], p[q[1]], p[q[2]], cfg);
  return s;
}

// Closed forms of the four loop-momentum integrals over the real line:
//   1: (l+i/2)^{-a} (-l+i/2)^{-b}
//   2: (l+i/2)^{-a} (-l+i/2)^{-b} (l+P+i/2)^{-c}, c >= 2
//   3: (l+i/2)^{-a} (-l+i/2)^{-b} (l+P+i/2)^{-1}
//   4: (l+i/2)^{-a} (-l-p1+i/2)^{-b}
inline cplx fundamental_integral(int variant, int a, int b, int c, cplx arg) {
  if (a < 1 || b < 1) throw unsupported_parameters("fundamental_integral needs a,b >= 1");
  switch (variant) {
    case 1:
      return 2.0 * pi * ipow(-a - b) * binomial(a + b - 2, a - 1);
    case 2: {
      if (c < 2) throw unsupported_parameters("variant 2 needs c >= 2");
      const cplx P = arg;
      return -2.0 * pi * ipow(1 - a) * powi(P + I, 1 - b - c) * binomial(b + c - 2, b - 1) *
             gauss2f1_terminating<cplx>(a, 1 - b, 2 - b - c, -I * (P + I));
    }
    case 3: {
      if (c != 1) throw unsupported_parameters("variant 3 needs c = 1");
      const cplx P = arg;
      CompensatedSum<cplx> s;
      cplx zk = 1.0;
      for (int k = 0; k <= b - 1; ++k, zk *= -I * P) s.add(binomial(b - 1, k) * zk / double(a + k));
      return -2.0 * I * pi * powi(P + I, -b) * (b * binomial(a + b - 1, b)) * ipow(-a) * s.value();
    }
    case 4: {
      const cplx p1 = arg;
      return -2.0 * pi * I * binomial(a + b - 2, b - 1) * powi(-p1 + I, 1 - a - b);
    }
    default:
      throw unsupported_parameters("fundamental_integral variant must be 1..4");
  }
}

// Closed-form loop diagrams C1..C6 with the momentum-independent inner sums
// precomputed for fixed (beta, M).
class LoopEvaluator {
 public:
  explicit LoopEvaluator(const PhysParams& prm) : prm_(prm), M_(prm.num_atoms), b_(prm.beta), t0_(prm.t0()) {
    prm.validate();
    const int nb = 2 * M_ + 8;
    binom_.assign((nb + 1) * (nb + 1), 0.0);
    for (int n = 0; n <= nb; ++n)
      for (int k = 0; k <= n; ++k) binom_[n * (nb + 1) + k] = binomial(n, k);
    nb_ = nb;
    const int K = M_ + 2;
    // G_k(m) = sum_s C(m,s)(-b)^s [2 C(s+k,k) + C(s+k+1,k)]
    gk_.assign((M_ + 1) * (K + 1), 0.0);
    for (int m = 0; m <= M_; ++m)
      for (int k = 0; k <= K; ++k) {
        CompensatedSum<double> s;
        double bs = 1.0;
        for (int j = 0; j <= m; ++j, bs *= -b_) s.add(bn(m, j) * bs * (2.0 * bn(j + k, k) + bn(j + k + 1, k)));
        gk_[m * (K + 1) + k] = s.value();
      }
    kdim_ = K;
    // h_k(r,t) = (-r-1)_k / (-r-t-2)_k
    hk_.assign((M_ + 1) * (M_ + 1) * (K + 1), 0.0);
    for (int r = 0; r <= M_; ++r)
      for (int t = 0; t <= M_; ++t) {
        double h = 1.0;
        for (int k = 0; k <= std::min(r + 1, K); ++k) {
          hk_[(r * (M_ + 1) + t) * (K + 1) + k] = h;
          h *= double(-r - 1 + k) / double(-r - t - 2 + k);
        }
      }
    // sum_{r,s<=q} C(q,r) C(q,s) (-b)^{r+s} C(r+s+2, r+1)
    inner45_.assign(M_ + 1, 0.0);
    for (int q = 0; q <= M_; ++q) {
      CompensatedSum<double> s;
      for (int r = 0; r <= q; ++r)
        for (int t = 0; t <= q; ++t) s.add(bn(q, r) * bn(q, t) * powi(-b_, r + t) * bn(r + t + 2, r + 1));
      inner45_[q] = s.value();
    }
  }

  const PhysParams& params() const { return prm_; }

  cplx diagram(Diagram d, cplx p1, cplx p2) const {
    const auto S = chain(p1, p2);
    switch (d) {
      case Diagram::C1: return c1(p1, p2, S);
      case Diagram::C2: return c2(p1, p2, S);
      case Diagram::C3: return c3(p1, p2, S);
      case Diagram::C4: return c4(p1, p2, S);
      case Diagram::C5: return c5(p1, p2, S);
      case Diagram::C6: return c6(p1, p2, S);
    }
    return 0.0;
  }

  // (1/2) sum_perm (C1 + C2) + sum_perm (C3 + C4 + C5 + C6)
  cplx symmetrized(cplx p1, cplx p2) const {
    if (M_ < 2 || b_ == 0.0) return 0.0;
    const auto S = chain(p1, p2);
    const cplx c2v = c2(p1, p2, S);
    cplx half = 6.0 * c2v, full = 0.0;
    for (const auto& [a, bb] : momentum_permutations(p1, p2)) {
      half += c1(a, bb, S);
      if (M_ >= 3) full += c3(a, bb, S) + c4(a, bb, S) + c5(a, bb, S) + c6(a, bb, S);
    }
    return 0.5 * half + full;
  }

 private:
  double bn(int n, int k) const {
    if (k < 0 || k > n) return 0.0;
    return binom_[n * (nb_ + 1) + k];
  }
  double gk(int m, int k) const { return gk_[m * (kdim_ + 1) + k]; }
  double hk(int r, int t, int k) const { return hk_[(r * (M_ + 1) + t) * (kdim_ + 1) + k]; }
  cplx t(cplx k) const { return detail::tk(k, b_); }

  std::vector<cplx> chain(cplx p1, cplx p2) const {
    const cplx A = t(p1) * t(p2) * t(-p1 - p2);
    return detail::chain_sums(A, t0_, M_);
  }

  // sum_{r,s<=m} C(m,r) C(m,s) (-i b)^{r+s} X(r,s) for m = 0..n
  std::vector<cplx> binomial_fold(const std::vector<cplx>& X, int n) const {
    std::vector<cplx> pw(2 * n + 1);
    pw[0] = 1.0;
    for (int k = 1; k <= 2 * n; ++k) pw[k] = pw[k - 1] * (-I * b_);
    std::vector<cplx> out(n + 1);
    for (int m = 0; m <= n; ++m) {
      CompensatedSum<cplx> s;
      for (int r = 0; r <= m; ++r)
        for (int q = 0; q <= m; ++q) s.add(bn(m, r) * bn(m, q) * pw[r + q] * X[r * (n + 1) + q]);
      out[m] = s.value();
    }
    return out;
  }

  cplx c1(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 2) return 0.0;
    if (p1 == 0.0) throw requires_offset("C1 evaluated at p1 = 0");
    const int n = M_ - 2;
    const cplx p3 = -p1 - p2;
    const cplx u = 1.0 / (-p1 + I);
    const cplx w = p1 / (p1 - I);
    const auto Q = detail::poly_moments(w, n, 0);
    std::vector<cplx> up(2 * n + 3);
    up[0] = 1.0;
    for (std::size_t k = 1; k < up.size(); ++k) up[k] = up[k - 1] * u;
    const cplx dm = 1.0 / (p1 - 0.5 * I), dp = 1.0 / (p1 + 0.5 * I);
    std::vector<cplx> br((n + 1) * (n + 1));
    for (int r = 0; r <= n; ++r)
      for (int s = 0; s <= n; ++s) {
        const cplx a = bn(r + s + 2, r + 1) * up[r + s + 2] * dm;
        const cplx x = ipow(-s - 1) * double(s + 1) * bn(r + s + 1, s + 1) * up[r + 1] * Q[r * (n + 1) + s] +
                       ipow(-r - 1) * double(r + 1) * bn(r + s + 1, r + 1) * up[s + 1] * Q[s * (n + 1) + r];
        br[r * (n + 1) + s] = a + x * dp;
      }
    const auto inner = binomial_fold(br, n);
    const cplx t1 = t(p1);
    cplx t1m = t1, tot = 0.0;
    for (int m = 0; m <= n; ++m, t1m *= t1) tot += t1m * S[n - m] * inner[m];
    const cplx pre = -2.0 * I * std::pow(b_, 5) * (-p1 + I) / (pi * pi * p1 * (p3 + 0.5 * I) * (p2 + 0.5 * I));
    return pre * tot;
  }

  cplx c2(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 2) return 0.0;
    const int n = M_ - 2;
    const int w = n + 1;
    std::vector<cplx> Y(w * w, 0.0);
    const cplx p3 = -p1 - p2;
    const std::array<cplx, 3> p{p1, p2, p3};
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& sg : perms) {
      const cplx a1 = p[sg[0]];
      const cplx P = a1 + p[sg[1]];
      const auto R = detail::poly_moments(I * P, n, 1);
      std::vector<cplx> pp(n + 3);
      pp[0] = 1.0;
      const cplx ip = 1.0 / (P + I);
      for (int k = 1; k <= n + 2; ++k) pp[k] = pp[k - 1] * ip;
      const cplx da = 1.0 / (a1 + 0.5 * I), dP = 1.0 / (P + 0.5 * I);
      for (int r = 0; r <= n; ++r)
        for (int s = 0; s <= n; ++s) {
          const cplx f1 = 2.0 * pi * ipow(-r - s) * bn(r + s + 2, r + 1) * dP;
          const cplx f3 = -2.0 * I * pi * pp[s + 2] * (double(s + 2) * bn(r + s + 3, s + 2)) * ipow(-r - 2) *
                          R[r * w + s];
          const cplx f3b = -2.0 * I * pi * pp[r + 2] * (double(r + 2) * bn(r + s + 3, r + 2)) * ipow(-s - 2) *
                           R[s * w + r];
          Y[r * w + s] += da * (f1 + f3 + f3b);
        }
    }
    const auto inner = binomial_fold(Y, n);
    cplx tm = t0_, tot = 0.0;
    for (int m = 0; m <= n; ++m, tm *= t0_) tot += tm * S[n - m] * inner[m];
    return -2.0 * std::pow(b_, 5) / (3.0 * pi * pi * pi) * tot;
  }

  // Shared (r,t,m) kernel of C3 and C6:
  //   sum_{r<=m+q+1, t<=q} C(m+q+1,r) C(q,t) V(r,t) sum_k h_k(r,t) z^k G_k(m)
  std::vector<cplx> hyper_inner(cplx z, const std::vector<cplx>& V) const {
    const int n = M_ - 3;
    const int rmax = M_ - 2;
    std::vector<cplx> zk(kdim_ + 1);
    zk[0] = 1.0;
    for (int k = 1; k <= kdim_; ++k) zk[k] = zk[k - 1] * z;
    // H(r,t,m) for t + m <= n
    std::vector<cplx> H((rmax + 1) * (n + 1) * (n + 1), 0.0);
    auto hidx = [&](int r, int t, int m) { return (r * (n + 1) + t) * (n + 1) + m; };
    std::vector<cplx> E(kdim_ + 1);
    for (int r = 0; r <= rmax; ++r)
      for (int t = 0; t <= n; ++t) {
        for (int k = 0; k <= r + 1; ++k) E[k] = hk(r, t, k) * zk[k];
        for (int m = 0; m + t <= n; ++m) {
          cplx s = 0.0;
          for (int k = 0; k <= r + 1; ++k) s += E[k] * gk(m, k);
          H[hidx(r, t, m)] = s;
        }
      }
    std::vector<cplx> out((n + 1) * (n + 1), 0.0);
    for (int m = 0; m <= n; ++m)
      for (int q = 0; m + q <= n; ++q) {
        CompensatedSum<cplx> s;
        for (int r = 0; r <= m + q + 1; ++r)
          for (int t = 0; t <= q; ++t)
            s.add(bn(m + q + 1, r) * bn(q, t) * V[r * (n + 1) + t] * H[hidx(r, t, m)]);
        out[m * (n + 1) + q] = s.value();
      }
    return out;
  }

  cplx c3(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 3) return 0.0;
    const int n = M_ - 3;
    const cplx P = p1 + p2;
    const cplx ip = 1.0 / (P + I);
    std::vector<cplx> V((M_ - 1) * (n + 1));
    for (int r = 0; r <= M_ - 2; ++r)
      for (int t = 0; t <= n; ++t)
        V[r * (n + 1) + t] = powi(b_, r + t) * ipow(-r - t) * powi(ip, r + t + 3) * bn(r + t + 2, r + 1);
    const auto inner = hyper_inner(1.0 - I * P, V);
    const cplx tmP = t(-P);
    cplx tot = 0.0, tm = t0_;
    for (int m = 0; m <= n; ++m, tm *= t0_) {
      cplx tq = tmP;
      for (int q = 0; m + q <= n; ++q, tq *= tmP) tot += tm * tq * S[n - m - q] * inner[m * (n + 1) + q];
    }
    const cplx pre = I * powi(b_, 6) * (P + I) / (pi * pi * (p1 + 0.5 * I) * (p2 + 0.5 * I) * (-P + 0.5 * I));
    return -pre * tot;
  }

  cplx c4(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 3) return 0.0;
    const int n = M_ - 3;
    const cplx P = p1 + p2;
    const cplx tP = t(P), tmP = t(-P);
    cplx tot = 0.0;
    for (int m = 0; m <= n; ++m) {
      const cplx fm = powi(t0_, m + 1) * powi(tP, m) * powi(tmP, m + 2);
      cplx tq = 1.0;
      for (int q = 0; m + q <= n; ++q, tq *= tmP) tot += fm * tq * S[n - m - q] * (2.0 * pi * inner45_[q]);
    }
    const cplx pre = -powi(b_, 6) * (P + I) /
                     (pi * pi * pi * (p1 + 0.5 * I) * (-P + 0.5 * I) * (p2 + 0.5 * I) * (P + 0.5 * I) * (P + 0.5 * I));
    return pre * tot;
  }

  cplx c5(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 3) return 0.0;
    const int n = M_ - 3;
    const cplx P = p1 + p2;
    const cplx t1 = t(p1), tm1 = t(-p1);
    cplx tot = 0.0;
    for (int m = 0; m <= n; ++m)
      for (int q = 0; m + q <= n; ++q)
        tot += powi(t0_, m + q + 2) * powi(tm1, q) * powi(t1, q + 1) * S[n - m - q] * inner45_[m];
    const cplx pre = 2.0 * powi(b_, 6) * (p1 - I) /
                     (pi * pi * (p1 + 0.5 * I) * (-P + 0.5 * I) * (p2 + 0.5 * I) * (-p1 + 0.5 * I) * (-p1 + 0.5 * I));
    return pre * tot;
  }

  cplx c6(cplx p1, cplx p2, const std::vector<cplx>& S) const {
    if (M_ < 3) return 0.0;
    const int n = M_ - 3;
    const cplx P = p1 + p2;
    const cplx ip = 1.0 / (-p2 + I);
    std::vector<cplx> V((M_ - 1) * (n + 1));
    for (int r = 0; r <= M_ - 2; ++r)
      for (int t = 0; t <= n; ++t)
        V[r * (n + 1) + t] = powi(-I * b_, r + t) * powi(ip, r + t + 3) * bn(r + t + 2, r + 1);
    const auto inner = hyper_inner(1.0 + I * p2, V);
    const cplx t2 = t(p2);
    cplx tot = 0.0, tm = t0_;
    for (int m = 0; m <= n; ++m, tm *= t0_) {
      cplx tq = t2;
      for (int q = 0; m + q <= n; ++q, tq *= t2) tot += tm * tq * S[n - m - q] * inner[m * (n + 1) + q];
    }
    const cplx pre = -2.0 * I * powi(b_, 6) * (-p2 + I) / (pi * pi * (p1 + 0.5 * I) * (p2 + 0.5 * I) * (-P + 0.5 * I));
    return 0.5 * pre * tot;
  }

  PhysParams prm_;
  int M_;
  double b_, t0_;
  int nb_ = 0, kdim_ = 0;
  std::vector<double> binom_, gk_, hk_, inner45_;
};

inline cplx loop_diagram(Diagram d, cplx p1, cplx p2, const DiagramConfig& cfg) {
  return LoopEvaluator(cfg.params).diagram(d, p1, p2);
}

// Integrand over the loop momentum l whose real-line integral is loop_diagram(d).
inline cplx loop_integrand(Diagram d, cplx p1, cplx p2, cplx l, const DiagramConfig& cfg) {
  const auto& prm = cfg.params;
  const int M = prm.num_atoms;
  const double b = prm.beta, t0 = prm.t0();
  auto t = [&](cplx k) { return detail::tk(k, b); };
  const cplx p3 = -p1 - p2, P = p1 + p2;
  cplx ts = 0.0;
  switch (d) {
    case Diagram::C1: {
      const cplx q = -p1 - l;
      for (int j = 0; j <= M - 2; ++j)
        for (int m = 0; m <= M - j - 2; ++m)
          ts += powi(t0, 3 * j) * powi(t(l) * t(q), m) * powi(t(p1), M - j - 1) * powi(t(p2) * t(p3), M - j - m - 2);
      return powi(b, 5) * s3c({p1, l, q}, {0.0, 0.0, 0.0}) * s2c(p2, p3, l, q) * ts;
    }
    case Diagram::C2:
      for (int j = 0; j <= M - 2; ++j)
        for (int m = 0; m <= M - j - 2; ++m)
          ts += powi(t0, 3 * j + m + 1) * powi(t(l) * t(-l), m) * powi(t(p1) * t(p2) * t(p3), M - j - m - 2);
      return powi(b, 5) * s2c(l, -l, 0.0, 0.0) * s3c({p1, p2, p3}, {l, -l, 0.0}) * ts;
    default:
      break;
  }
  for (int j = 0; j <= M - 3; ++j)
    for (int m = 0; m <= M - j - 3; ++m)
      for (int q = 0; q <= M - j - m - 3; ++q) {
        switch (d) {
          case Diagram::C3:
            ts += powi(t0, 3 * j + 1 + m) * powi(t(-l), m + q + 1) * powi(t(l), m) * powi(t(l + P), q) *
                  powi(t(p1) * t(p2), M - j - m - q - 3) * powi(t(-P), M - j - m - 2);
            break;
          case Diagram::C4:
            ts += powi(t0, 3 * j + m + 1) * powi(t(P), m) * powi(t(-l) * t(l), q) *
                  powi(t(p1) * t(p2), M - j - m - q - 3) * powi(t(-P), M - j - 1);
            break;
          case Diagram::C5:
            ts += powi(t(l) * t(-l), m) * powi(t0, 3 * j + 2 + m + q) * powi(t(-p1), q) * powi(t(p1), M - j - m - 2) *
                  powi(t(p2) * t(-P), M - j - m - q - 3);
            break;
          default:
            ts += powi(t(-l), m + q + 1) * powi(t(l), m) * powi(t(l - p2), q) * powi(t0, 3 * j + 1 + m) *
                  powi(t(p2), M - j - m - 2) * powi(t(p1) * t(-P), M - j - m - q - 3);
            break;
        }
      }
  const double b6 = powi(b, 6);
  switch (d) {
    case Diagram::C3: return b6 * s2c(-l, l, 0.0, 0.0) * s2c(l + P, -P, l, 0.0) * s2c(p1, p2, -l, l + P) * ts;
    case Diagram::C4: return b6 * s2c(P, -P, 0.0, 0.0) * s2c(-l, l, 0.0, P) * s2c(p1, p2, -l, l) * ts;
    case Diagram::C5: return b6 * s2c(l, -l, 0.0, 0.0) * s2c(p1, -p1, l, -l) * s2c(p2, -P, -p1, 0.0) * ts;
    default: return b6 * s2c(-l, l, 0.0, 0.0) * s2c(p2, l - p2, l, 0.0) * s2c(p1, -P, -l, l - p2) * ts;
  }
}

// Connected three-photon momentum amplitude on the delta(p1+p2+p3) shell.
class Phi3Evaluator {
 public:
  explicit Phi3Evaluator(const DiagramConfig& cfg) : cfg_(cfg) {
    cfg.params.validate();
    if (cfg.include_loops && cfg.params.num_atoms >= 2) loops_.emplace_back(cfg.params);
  }
  cplx tree(cplx p1, cplx p2) const { return t3v(p1, p2, cfg_) + t4v(p1, p2, cfg_); }
  cplx loop(cplx p1, cplx p2) const { return loops_.empty() ? cplx(0.0) : loops_.front().symmetrized(p1, p2); }
  cplx operator()(cplx p1, cplx p2) const {
    if (cfg_.params.beta == 0.0) return 0.0;
    return tree(p1, p2) + loop(p1, p2);
  }
  const DiagramConfig& config() const { return cfg_; }

 private:
  DiagramConfig cfg_;
  std::vector<LoopEvaluator> loops_;
};

inline cplx phi3_momentum(cplx p1, cplx p2, const DiagramConfig& cfg) { return Phi3Evaluator(cfg)(p1, p2); }

}  // namespace cwqed
