#pragma once

#include <cmath>
#include <vector>

#include "cwqed/core.hpp"

namespace cwqed {

// Coefficients C_{j,l} (1 <= j,l <= degree) of
//   psi_d(k1,k2) = t0_power delta(k1) delta(k2)
//                + delta(k1+k2) sum C_{j,l} (k1 + i/2)^{-j} (k2 + i/2)^{-l}.
class CoeffMatrix {
 public:
  CoeffMatrix() = default;
  CoeffMatrix(int d, int degree) : d_(d), deg_(degree), a_((degree + 2) * (degree + 2)) {}

  int d() const { return d_; }
  int degree() const { return deg_; }
  cplx operator()(int j, int l) const {
    if (j < 1 || l < 1 || j > deg_ || l > deg_) return 0.0;
    return a_[j * (deg_ + 2) + l];
  }
  cplx& at(int j, int l) { return a_[j * (deg_ + 2) + l]; }
  const std::vector<cplx>& raw() const { return a_; }
  std::vector<cplx>& raw() { return a_; }

  cplx t0_power{1.0};

 private:
  int d_ = 0;
  int deg_ = 0;
  std::vector<cplx> a_;
};

// One-loss amplitude at atom d+1: delta weight r0 t0^{2d+1} plus coefficients
// of degree d+1 (the lost photon carries k1).
struct LossCoeffMatrix {
  CoeffMatrix coeffs;
  cplx delta_weight;
};

inline CoeffMatrix initial_coeffs(const PhysParams& prm) {
  const double b = prm.beta;
  CoeffMatrix c(1, 1);
  c.at(1, 1) = 2.0 * b * b / pi;
  c.t0_power = prm.t0() * prm.t0();
  return c;
}

inline cplx f_sum(const CoeffMatrix& c) {
  CompensatedSum<cplx> s;
  for (int j = 1; j <= c.degree(); ++j)
    for (int l = 1; l <= c.degree(); ++l) s.add(c(j, l) * f_integral(j + 1, l + 1));
  return s.value();
}

inline CoeffMatrix step(const CoeffMatrix& c, const PhysParams& prm) {
  const double b = prm.beta;
  const double t0 = prm.t0();
  const int n = c.degree() + 1;
  CoeffMatrix out(c.d() + 1, n);
  const cplx mib = -I * b;
  out.at(1, 1) = c(1, 1) + c.t0_power * (2.0 * b * b / pi) - (b * b / (2.0 * pi)) * f_sum(c);
  for (int j = 1; j <= n; ++j)
    for (int l = 1; l <= n; ++l) {
      if (j + l < 3) continue;
      out.at(j, l) = c(j, l) + mib * (c(j - 1, l) + c(j, l - 1)) + mib * mib * c(j - 1, l - 1);
    }
  out.t0_power = c.t0_power * t0 * t0;
  return out;
}

inline CoeffMatrix propagate(int d, const PhysParams& prm) {
  if (d < 1) throw precondition_violation("propagate needs d >= 1");
  CoeffMatrix c = initial_coeffs(prm);
  for (int i = 1; i < d; ++i) c = step(c, prm);
  return c;
}

inline LossCoeffMatrix loss_step(const CoeffMatrix& c, const PhysParams& prm) {
  const double b = prm.beta;
  const double t0 = prm.t0();
  const int n = c.degree() + 1;
  LossCoeffMatrix out{CoeffMatrix(c.d() + 1, n), prm.r0() * c.t0_power * t0};
  const double g = std::sqrt(b * (1.0 - b));
  out.coeffs.at(1, 1) = (std::pow(b, 1.5) * std::sqrt(1.0 - b) / (2.0 * pi)) * (4.0 * c.t0_power - f_sum(c));
  for (int j = 1; j <= n; ++j)
    for (int l = 1; l <= n; ++l) {
      if (j + l < 3) continue;
      out.coeffs.at(j, l) = -I * g * (c(j - 1, l) - I * b * c(j - 1, l - 1));
    }
  out.coeffs.t0_power = out.delta_weight;
  return out;
}

inline cplx phi2_momentum(cplx k, const CoeffMatrix& c) {
  const int n = c.degree();
  const cplx a = 1.0 / (k + 0.5 * I), bb = 1.0 / (-k + 0.5 * I);
  cplx sum = 0.0, aj = 1.0;
  for (int j = 1; j <= n; ++j) {
    aj *= a;
    cplx bl = 1.0;
    for (int l = 1; l <= n; ++l) {
      bl *= bb;
      sum += c(j, l) * aj * bl;
    }
  }
  return sum;
}

// Position-space transform phi2(x) = int dk e^{ikx} phi2(k) evaluated by the
// residue at k = i/2 (x >= 0), extended by evenness.
inline double phi2_position(double x, const CoeffMatrix& c) {
  x = std::abs(x);
  const int n = c.degree();
  const double ex = std::exp(-0.5 * x);
  CompensatedSum<cplx> total;
  std::vector<cplx> xm(n + 1);  // (ix)^m / m!
  xm[0] = 1.0;
  for (int m = 1; m <= n; ++m) xm[m] = xm[m - 1] * I * x / double(m);
  for (int l = 1; l <= n; ++l) {
    // Residue of (k+i/2)^{-j} (-k+i/2)^{-l} e^{ikx} at the order-l pole k = i/2.
    cplx acc = 0.0;
    for (int j = 1; j <= n; ++j) {
      const cplx cj = c(j, l);
      if (cj == 0.0) continue;
      cplx inner = 0.0;
      for (int nn = 0; nn <= l - 1; ++nn) {
        const double w = binomial(j + nn - 1, nn) * ((nn % 2) ? -1.0 : 1.0);
        inner += xm[l - 1 - nn] * w * ipow(-j - nn);
      }
      acc += cj * inner;
    }
    const double sgn = (l % 2) ? -1.0 : 1.0;
    total.add(2.0 * pi * I * sgn * acc);
  }
  return (total.value() * ex).real();
}

inline double psi2(double x1, double x2, const CoeffMatrix& c) {
  return c.t0_power.real() + phi2_position(x1 - x2, c);
}

}  // namespace cwqed
