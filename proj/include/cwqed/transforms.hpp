#pragma once

#include <fftw3.h>

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "cwqed/core.hpp"

namespace cwqed {

// Fourier convention: f(x) = int d^n p e^{i p.x} f(p), no 2 pi factors.
// Three-photon positions enter through u = x1 - x3, v = x2 - x3.

struct insufficient_extent : error {
  using error::error;
};

struct MomentumGrid2D {
  double k_max = 8.0;
  int n = 256;
  bool offset = true;

  double dk() const { return 2.0 * k_max / n; }
  double k(int i) const { return -k_max + (i + (offset ? 0.5 : 0.0)) * dk(); }
  double dx() const { return 2.0 * pi / (n * dk()); }
  // Position of output index m (0..n-1), centered: m - n/2.
  double x(int m) const { return (m - n / 2) * dx(); }
  void validate() const {
    if (!(k_max > 0.0) || n < 4 || n % 2) throw precondition_violation("grid needs k_max > 0 and even n >= 4");
  }
};

struct PositionField3 {
  std::vector<double> u, v;     // axes
  std::vector<double> values;   // row-major [iu][iv]
  double imag_ratio = 0.0;      // max|Im| / max|Re| before discarding
  double at(std::size_t iu, std::size_t iv) const { return values[iu * v.size() + iv]; }
};

struct JacobiField {
  std::vector<double> eta, zeta;
  std::vector<double> values;  // row-major [ieta][izeta]
  bool clamped = false;
  double at(std::size_t i, std::size_t j) const { return values[i * zeta.size() + j]; }
};

// (eta, zeta) at R = 0 to (u, v).
inline std::array<double, 2> jacobi_to_uv(double eta, double zeta) {
  const double a = eta / std::sqrt(2.0), b = std::sqrt(1.5) * zeta;
  return {a + b, b - a};
}

inline std::array<double, 2> uv_to_jacobi(double u, double v) {
  return {(u - v) / std::sqrt(2.0), (u + v) / std::sqrt(6.0)};
}

template <class Amplitude>
std::vector<cplx> sample_phi3(const MomentumGrid2D& g, const Amplitude& phi) {
  g.validate();
  std::vector<cplx> a(std::size_t(g.n) * g.n);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) a[std::size_t(i) * g.n + j] = checked(phi(cplx(g.k(i)), cplx(g.k(j))), "sample_phi3");
  return a;
}

namespace detail {

inline double taper_weight(double k, double kmax) {
  const double x = std::abs(k) / kmax;
  if (x < 0.5) return 1.0;
  return 0.5 * (1.0 + std::cos(pi * (x - 0.5) / 0.5));
}

inline std::vector<cplx> fftw_2d(const std::vector<cplx>& in, int n, int sign) {
  std::vector<cplx> out(in.size());
  std::vector<cplx> buf(in);
  fftw_plan p = fftw_plan_dft_2d(n, n, reinterpret_cast<fftw_complex*>(buf.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  return out;
}

inline std::vector<cplx> fftw_1d(const std::vector<cplx>& in, int sign) {
  const int n = int(in.size());
  std::vector<cplx> out(in.size());
  std::vector<cplx> buf(in);
  fftw_plan p = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                                 reinterpret_cast<fftw_complex*>(out.data()), sign, FFTW_ESTIMATE);
  fftw_execute(p);
  fftw_destroy_plan(p);
  return out;
}

}  // namespace detail

// Complex inverse transform on the centered position grid x(m), row-major [m1][m2].
inline std::vector<cplx> inverse_ft_2d_complex(const std::vector<cplx>& a, const MomentumGrid2D& g, bool taper = false) {
  g.validate();
  const int n = g.n;
  if (a.size() != std::size_t(n) * n) throw precondition_violation("array does not match grid");
  std::vector<cplx> in(a);
  if (taper)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) in[std::size_t(i) * n + j] *= detail::taper_weight(g.k(i), g.k_max) * detail::taper_weight(g.k(j), g.k_max);
  // Shift so output index 0 is x = -n/2 dx: multiply by e^{-i pi i'} = (-1)^i.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if ((i + j) % 2) in[std::size_t(i) * n + j] = -in[std::size_t(i) * n + j];
  auto out = detail::fftw_2d(in, n, FFTW_BACKWARD);
  const double k0 = g.k(0);
  const double dk2 = g.dk() * g.dk();
  std::vector<cplx> ph(n);
  for (int m = 0; m < n; ++m) ph[m] = std::exp(I * k0 * g.x(m));
  for (int m1 = 0; m1 < n; ++m1)
    for (int m2 = 0; m2 < n; ++m2) out[std::size_t(m1) * n + m2] *= dk2 * ph[m1] * ph[m2];
  return out;
}

// Forward transform f(p) = (2 pi)^{-2} int d^2x e^{-i p.x} f(x), the exact
// discrete inverse of inverse_ft_2d_complex.
inline std::vector<cplx> forward_ft_2d(const std::vector<cplx>& f, const MomentumGrid2D& g) {
  const int n = g.n;
  if (f.size() != std::size_t(n) * n) throw precondition_violation("array does not match grid");
  const double k0 = g.k(0);
  std::vector<cplx> in(f);
  for (int m1 = 0; m1 < n; ++m1)
    for (int m2 = 0; m2 < n; ++m2) in[std::size_t(m1) * n + m2] *= std::exp(-I * k0 * (g.x(m1) + g.x(m2)));
  auto out = detail::fftw_2d(in, n, FFTW_FORWARD);
  const double norm = 1.0 / (double(n) * n * g.dk() * g.dk());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double s = ((i + j) % 2) ? -1.0 : 1.0;
      out[std::size_t(i) * n + j] *= s * norm;
    }
  return out;
}

// Real field over (u, v) with an aliasing guard on the periodic position box.
inline PositionField3 inverse_ft_2d(const std::vector<cplx>& a, const MomentumGrid2D& g, bool taper = false,
                                    double guard = 1e-3) {
  const auto c = inverse_ft_2d_complex(a, g, taper);
  const int n = g.n;
  PositionField3 f;
  f.u.resize(n);
  for (int m = 0; m < n; ++m) f.u[m] = g.x(m);
  f.v = f.u;
  f.values.resize(c.size());
  double mre = 0.0, mim = 0.0, edge = 0.0;
  for (int m1 = 0; m1 < n; ++m1)
    for (int m2 = 0; m2 < n; ++m2) {
      const cplx z = c[std::size_t(m1) * n + m2];
      f.values[std::size_t(m1) * n + m2] = z.real();
      mre = std::max(mre, std::abs(z.real()));
      mim = std::max(mim, std::abs(z.imag()));
      if (m1 == 0 || m2 == 0 || m1 == n - 1 || m2 == n - 1) edge = std::max(edge, std::abs(z));
    }
  f.imag_ratio = mre > 0.0 ? mim / mre : 0.0;
  if (mre > 0.0 && edge > guard * mre) throw insufficient_extent("field does not decay inside the position box");
  return f;
}

// 1-D transform f(x) = int dk e^{ikx} f(k) on the centered grid, after
// subtracting a/(k^2+1/4) + b/(k^2+1/4)^2 matched to the two outermost samples
// (transforms 2 pi e^{-|x|/2} and 4 pi (1+|x|/2) e^{-|x|/2}).
inline std::vector<cplx> inverse_ft_1d_tail_corrected(const std::vector<cplx>& a, const MomentumGrid2D& g) {
  g.validate();
  const int n = g.n;
  if (int(a.size()) != n) throw precondition_violation("array does not match grid");
  auto q = [](double k) { return 1.0 / (k * k + 0.25); };
  const double k1 = g.k(n - 1), k2 = g.k(n - 2);
  const cplx f1 = 0.5 * (a[n - 1] + a[0]), f2 = 0.5 * (a[n - 2] + a[1]);
  const double q1 = q(k1), q2 = q(k2);
  const double det = q1 * q2 * q2 - q2 * q1 * q1;
  const cplx ca = (f1 * q2 * q2 - f2 * q1 * q1) / det;
  const cplx cb = (q1 * f2 - q2 * f1) / det;
  std::vector<cplx> in(n);
  for (int i = 0; i < n; ++i) {
    const double qi = q(g.k(i));
    in[i] = (a[i] - ca * qi - cb * qi * qi) * ((i % 2) ? -1.0 : 1.0);
  }
  auto out = detail::fftw_1d(in, FFTW_BACKWARD);
  const double k0 = g.k(0);
  for (int m = 0; m < n; ++m) {
    const double x = g.x(m), ax = std::abs(x);
    out[m] = out[m] * g.dk() * std::exp(I * k0 * x) + ca * 2.0 * pi * std::exp(-0.5 * ax) +
             cb * 4.0 * pi * (1.0 + 0.5 * ax) * std::exp(-0.5 * ax);
  }
  return out;
}

// Exact 2-D inverse transform of a rational amplitude whose p1-poles lie at
// c and -p2 + c (c in {+-i/2, +-i}) and whose remaining p2-poles lie on
// k i/2 (|k| <= 4), by nested contour integration with trapezoidal circles.
class ResidueTransform2D {
 public:
  struct Options {
    int n_inner = 48;
    int n_outer = 48;
    double r_inner = 0.06;
    double r_outer = 0.16;
  };

  template <class Amplitude>
  ResidueTransform2D(const Amplitude& phi, Options o) : o_(o) {
    if (o.n_inner < 4 || o.n_outer < 4) throw precondition_violation("too few contour nodes");
    const int ni = o.n_inner, no = o.n_outer;
    ein_.resize(ni);
    eout_.resize(no);
    for (int k = 0; k < ni; ++k) ein_[k] = std::exp(2.0 * pi * I * double(k) / double(ni));
    for (int k = 0; k < no; ++k) eout_[k] = std::exp(2.0 * pi * I * double(k) / double(no));
    p2_.resize(kOut * no);
    for (int o2 = 0; o2 < kOut; ++o2)
      for (int n = 0; n < no; ++n) p2_[o2 * no + n] = outer_center(o2) + o.r_outer * eout_[n];
    fa_.resize(std::size_t(kIn) * kOut * no * ni);
    fb_.resize(fa_.size());
    for (int c = 0; c < kIn; ++c)
      for (int o2 = 0; o2 < kOut; ++o2)
        for (int n = 0; n < no; ++n) {
          const cplx p2 = p2_[o2 * no + n];
          for (int k = 0; k < ni; ++k) {
            const cplx d = inner_center(c) + o.r_inner * ein_[k];
            fa_[idx(c, o2, n, k)] = checked(phi(d, p2), "residue transform");
            fb_[idx(c, o2, n, k)] = checked(phi(-p2 + d, p2), "residue transform");
          }
        }
  }

  template <class Amplitude>
  explicit ResidueTransform2D(const Amplitude& phi) : ResidueTransform2D(phi, Options{}) {}

  // Inner residue sums for fixed u.
  struct Inner {
    double u;
    std::vector<cplx> ga, gb;  // [o2][n]
  };

  Inner inner(double u) const {
    const int ni = o_.n_inner, no = o_.n_outer;
    Inner r{u, std::vector<cplx>(kOut * no), std::vector<cplx>(kOut * no)};
    std::vector<cplx> e(kIn * ni);
    for (int c = 0; c < kIn; ++c)
      for (int k = 0; k < ni; ++k) {
        const cplx d = o_.r_inner * ein_[k];
        e[c * ni + k] = std::exp(I * (inner_center(c) + d) * u) * d / double(ni);
      }
    for (int o2 = 0; o2 < kOut; ++o2)
      for (int n = 0; n < no; ++n) {
        cplx aup = 0.0, adn = 0.0, bup = 0.0, bdn = 0.0;
        for (int c = 0; c < kIn; ++c) {
          cplx sa = 0.0, sb = 0.0;
          for (int k = 0; k < ni; ++k) {
            sa += fa_[idx(c, o2, n, k)] * e[c * ni + k];
            sb += fb_[idx(c, o2, n, k)] * e[c * ni + k];
          }
          if (inner_center(c).imag() > 0.0) {
            aup += sa;
            bup += sb;
          } else {
            adn += sa;
            bdn += sb;
          }
        }
        r.ga[o2 * no + n] = line_rule(aup, adn, u);
        r.gb[o2 * no + n] = line_rule(bup, bdn, u);
      }
    return r;
  }

  cplx evaluate(const Inner& in, double v) const {
    const int no = o_.n_outer;
    cplx total = 0.0;
    for (int part = 0; part < 2; ++part) {
      const double w = part == 0 ? v : v - in.u;
      const auto& g = part == 0 ? in.ga : in.gb;
      cplx up = 0.0, dn = 0.0;
      for (int o2 = 0; o2 < kOut; ++o2) {
        cplx s = 0.0;
        for (int n = 0; n < no; ++n) {
          const cplx p2 = p2_[o2 * no + n];
          s += g[o2 * no + n] * std::exp(I * p2 * w) * eout_[n];
        }
        s *= o_.r_outer / double(no);
        if (outer_center(o2).imag() > 0.01)
          up += s;
        else
          dn += s;
      }
      total += line_rule(up, dn, w);
    }
    return total;
  }

  cplx operator()(double u, double v) const { return evaluate(inner(u), v); }

  // Real field on a (u, v) product grid.
  PositionField3 field(const std::vector<double>& us, const std::vector<double>& vs) const {
    PositionField3 f{us, vs, std::vector<double>(us.size() * vs.size()), 0.0};
    double mre = 0.0, mim = 0.0;
    for (std::size_t i = 0; i < us.size(); ++i) {
      const auto in = inner(us[i]);
      for (std::size_t j = 0; j < vs.size(); ++j) {
        const cplx z = evaluate(in, vs[j]);
        f.values[i * vs.size() + j] = z.real();
        mre = std::max(mre, std::abs(z.real()));
        mim = std::max(mim, std::abs(z.imag()));
      }
    }
    f.imag_ratio = mre > 0.0 ? mim / mre : 0.0;
    return f;
  }

 private:
  static constexpr int kIn = 4;
  static constexpr int kOut = 9;
  static cplx inner_center(int c) {
    static const cplx cs[kIn] = {0.5 * I, 1.0 * I, -0.5 * I, -1.0 * I};
    return cs[c];
  }
  static cplx outer_center(int o2) { return 0.5 * I * double(o2 - 4); }
  std::size_t idx(int c, int o2, int n, int k) const {
    return ((std::size_t(c) * kOut + o2) * o_.n_outer + n) * o_.n_inner + k;
  }
  // Real-line integral of e^{ipw} f(p) from the upper/lower residue sums.
  static cplx line_rule(cplx up, cplx dn, double w) {
    if (w > 0.0) return 2.0 * pi * I * up;
    if (w < 0.0) return -2.0 * pi * I * dn;
    return pi * I * (up - dn);
  }

  Options o_;
  std::vector<cplx> ein_, eout_, p2_, fa_, fb_;
};

// Bilinear interpolation of a (u, v) field onto an (eta, zeta) grid at R = 0.
inline JacobiField to_jacobi(const PositionField3& f, const std::vector<double>& eta, const std::vector<double>& zeta) {
  if (f.u.size() < 2 || f.v.size() < 2) throw precondition_violation("field too small to interpolate");
  JacobiField j{eta, zeta, std::vector<double>(eta.size() * zeta.size()), false};
  auto locate = [&](const std::vector<double>& ax, double x, bool& cl) {
    if (x <= ax.front()) {
      if (x < ax.front()) cl = true;
      return std::pair<std::size_t, double>{0, 0.0};
    }
    if (x >= ax.back()) {
      if (x > ax.back()) cl = true;
      return std::pair<std::size_t, double>{ax.size() - 2, 1.0};
    }
    const auto it = std::upper_bound(ax.begin(), ax.end(), x);
    const std::size_t i = std::size_t(it - ax.begin()) - 1;
    return std::pair<std::size_t, double>{i, (x - ax[i]) / (ax[i + 1] - ax[i])};
  };
  for (std::size_t a = 0; a < eta.size(); ++a)
    for (std::size_t b = 0; b < zeta.size(); ++b) {
      const auto uv = jacobi_to_uv(eta[a], zeta[b]);
      const auto [iu, fu] = locate(f.u, uv[0], j.clamped);
      const auto [iv, fv] = locate(f.v, uv[1], j.clamped);
      j.values[a * zeta.size() + b] = (1 - fu) * (1 - fv) * f.at(iu, iv) + fu * (1 - fv) * f.at(iu + 1, iv) +
                                      (1 - fu) * fv * f.at(iu, iv + 1) + fu * fv * f.at(iu + 1, iv + 1);
    }
  return j;
}

// Direct evaluation of a (u, v) function on an (eta, zeta) grid at R = 0.
template <class F>
JacobiField sample_jacobi(const F& f, const std::vector<double>& eta, const std::vector<double>& zeta) {
  JacobiField j{eta, zeta, std::vector<double>(eta.size() * zeta.size()), false};
  for (std::size_t a = 0; a < eta.size(); ++a)
    for (std::size_t b = 0; b < zeta.size(); ++b) {
      const auto uv = jacobi_to_uv(eta[a], zeta[b]);
      j.values[a * zeta.size() + b] = f(uv[0], uv[1]);
    }
  return j;
}

inline std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return x;
}

}  // namespace cwqed
