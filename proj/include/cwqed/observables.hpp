#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "cwqed/core.hpp"
#include "cwqed/grid.hpp"
#include "cwqed/three_photon.hpp"
#include "cwqed/transforms.hpp"
#include "cwqed/two_photon.hpp"

namespace cwqed {

enum class Order { tree, tree_loop };

inline std::string to_string(Order o) { return o == Order::tree ? "tree" : "tree+loop"; }

// Position-space phi2 and phi3 for one parameter set at a given diagram order.
class ThreePhotonField {
 public:
  using Options = ResidueTransform2D::Options;

  // Contour nodes exceed the highest pole order (about M for tree, 2M for loops).
  static Options default_options(const PhysParams& prm, Order order) {
    Options o;
    const int poles = order == Order::tree_loop ? 2 * prm.num_atoms + 4 : prm.num_atoms + 2;
    o.n_inner = o.n_outer = std::max(48, (poles + 16 + 7) / 8 * 8);
    return o;
  }

  ThreePhotonField(const PhysParams& prm, Order order) : ThreePhotonField(prm, order, default_options(prm, order)) {}

  ThreePhotonField(const PhysParams& prm, Order order, Options opt)
      : prm_(prm), order_(order), coeffs_(prm.num_atoms >= 1 ? propagate(prm.num_atoms, prm) : CoeffMatrix()) {
    prm.validate();
    DiagramConfig cfg{prm, order == Order::tree_loop};
    const Phi3Evaluator ev(cfg);
    transform_ = std::make_shared<ResidueTransform2D>([&](cplx a, cplx b) { return ev(a, b); }, opt);
  }

  const PhysParams& params() const { return prm_; }
  Order order() const { return order_; }
  const CoeffMatrix& coeffs() const { return coeffs_; }
  const ResidueTransform2D& transform() const { return *transform_; }

  double t0M() const { return powi(prm_.t0(), prm_.num_atoms); }
  double phi2(double x) const { return phi2_position(x, coeffs_); }
  cplx phi3_complex(double u, double v) const { return (*transform_)(u, v); }
  double phi3(double u, double v) const { return phi3_complex(u, v).real(); }

 private:
  PhysParams prm_;
  Order order_;
  CoeffMatrix coeffs_;
  std::shared_ptr<ResidueTransform2D> transform_;
};

namespace detail {

inline void require_t0(const PhysParams& prm) {
  if (prm.t0() == 0.0) throw degenerate_normalization("t0 = 0: normalized correlators are undefined");
}

// G_c per P^3 from phi3 at (x1,x2,x3) and the three pair values of phi2.
inline double connected_from_parts(double t0M, double f3, double f12, double f13, double f23) {
  const double s2 = f12 + f13 + f23;
  return 2.0 * t0M * t0M * t0M * f3 + 2.0 * t0M * t0M * (f12 * f13 + f12 * f23 + f13 * f23) + 2.0 * t0M * f3 * s2 +
         f3 * f3;
}

}  // namespace detail

inline double g2(double x1, double x2, const PhysParams& prm) {
  prm.validate();
  detail::require_t0(prm);
  if (prm.beta == 0.0) return 1.0;
  const auto c = propagate(prm.num_atoms, prm);
  const double t2 = powi(prm.t0(), 2 * prm.num_atoms);
  const double p = t2 + phi2_position(x1 - x2, c);
  return p * p / (t2 * t2);
}

inline double psi3(double x1, double x2, double x3, const ThreePhotonField& f) {
  const double t = f.t0M();
  return t * t * t + t * (f.phi2(x1 - x2) + f.phi2(x1 - x3) + f.phi2(x2 - x3)) + f.phi3(x1 - x3, x2 - x3);
}

inline double g3(double x1, double x2, double x3, const ThreePhotonField& f) {
  detail::require_t0(f.params());
  const double p = psi3(x1, x2, x3, f);
  return p * p / powi(f.t0M(), 6);
}

inline double g2(double x1, double x2, const ThreePhotonField& f) {
  detail::require_t0(f.params());
  const double t2 = f.t0M() * f.t0M();
  const double p = t2 + f.phi2(x1 - x2);
  return p * p / (t2 * t2);
}

// 2 + g3 - sum g2
inline double g3c(double x1, double x2, double x3, const ThreePhotonField& f) {
  return 2.0 + g3(x1, x2, x3, f) - g2(x1, x2, f) - g2(x1, x3, f) - g2(x2, x3, f);
}

// Connected third-order correlation per P_in^3.
inline double G3c_connected(double x1, double x2, double x3, const ThreePhotonField& f) {
  return detail::connected_from_parts(f.t0M(), f.phi3(x1 - x3, x2 - x3), f.phi2(x1 - x2), f.phi2(x1 - x3),
                                      f.phi2(x2 - x3));
}

inline double cumulant3(double x1, double x2, double x3, double theta, const ThreePhotonField& f) {
  const double P = f.params().p_in;
  return std::pow(P, 1.5) / 4.0 * (std::exp(3.0 * I * theta) * f.phi3_complex(x1 - x3, x2 - x3)).real();
}

// Grids over (t1, t2, 0) reusing the inner residue sums per t1.
inline CorrelationGrid cumulant3_grid(const ThreePhotonField& f, const std::vector<double>& ts, double theta) {
  CorrelationGrid g(ts, ts, "cumulant3");
  const double P = f.params().p_in;
  const cplx e = std::exp(3.0 * I * theta);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto in = f.transform().inner(ts[i]);
    for (std::size_t j = 0; j < ts.size(); ++j) g.at(i, j) = std::pow(P, 1.5) / 4.0 * (e * f.transform().evaluate(in, ts[j])).real();
  }
  return g;
}

inline CorrelationGrid g3c_grid(const ThreePhotonField& f, const std::vector<double>& ts) {
  detail::require_t0(f.params());
  CorrelationGrid g(ts, ts, "g3c");
  const double t6 = powi(f.t0M(), 6);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto in = f.transform().inner(ts[i]);
    for (std::size_t j = 0; j < ts.size(); ++j) {
      const double f3 = f.transform().evaluate(in, ts[j]).real();
      g.at(i, j) = detail::connected_from_parts(f.t0M(), f3, f.phi2(ts[i] - ts[j]), f.phi2(ts[i]), f.phi2(ts[j])) / t6;
    }
  }
  return g;
}

struct CountRate {
  double S;
  double S_tilde;
};

namespace detail {

template <class F>
double adaptive_simpson(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                        int depth) {
  const double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

// Adaptive Simpson on [a,b] started from 8 panels, absolute tolerance tol.
template <class F>
double integrate_simpson(const F& f, double a, double b, double tol, int depth = 18) {
  const int panels = 8;
  double sum = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double x0 = a + (b - a) * k / panels, x1 = a + (b - a) * (k + 1) / panels;
    const double f0 = f(x0), f1 = f(x1), fm = f(0.5 * (x0 + x1));
    const double whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
    sum += adaptive_simpson(f, x0, x1, f0, fm, f1, whole, tol / panels, depth);
  }
  return sum;
}

}  // namespace detail

// S~ = int int |G_c(t1, t2, 0)| dt1 dt2 over [0, window]^2 (per P_in^3).
inline CountRate count_rate(const ThreePhotonField& f, double window = 3.0, double rel_tol = 1e-4) {
  if (!(window > 0.0)) throw precondition_violation("window must be positive");
  const auto& tr = f.transform();
  const double t0M = f.t0M();
  auto row = [&](double t1, double tol) {
    const auto in = tr.inner(t1);
    const double f13 = f.phi2(t1);
    auto h = [&](double t2) {
      const double f3 = tr.evaluate(in, t2).real();
      return std::abs(detail::connected_from_parts(t0M, f3, f.phi2(t1 - t2), f13, f.phi2(t2)));
    };
    return detail::integrate_simpson(h, 0.0, window, tol, 14);
  };
  // Scale estimate from a coarse pass fixes the absolute tolerance.
  double scale = 0.0;
  for (int i = 0; i <= 4; ++i) scale = std::max(scale, std::abs(row(window * i / 4.0, 1e-3)));
  const double atol = std::max(rel_tol * scale * window, 1e-300);
  std::map<double, double> memo;
  auto outer = [&](double t1) {
    auto it = memo.find(t1);
    if (it != memo.end()) return it->second;
    const double v = row(t1, atol / window);
    memo.emplace(t1, v);
    return v;
  };
  const double St = detail::integrate_simpson(outer, 0.0, window, atol, 12);
  const double P = f.params().p_in;
  return {P * P * P * St, St};
}

// Low-OD approximation of G_c(0,0,0) per P_in^3: 2 chi3 t0^{2M} (t0^M M - 3 beta M^2).
inline double g3c_origin_lowOD(const PhysParams& prm, double chi3_origin) {
  const int M = prm.num_atoms;
  const double t0 = prm.t0();
  return 2.0 * chi3_origin * powi(t0, 2 * M) * (powi(t0, M) * M - 3.0 * prm.beta * M * M);
}

// Single-atom entangled wavefunctions at coincidence.
inline double chi2_origin(double beta) {
  PhysParams p;
  p.beta = beta;
  p.num_atoms = 1;
  return phi2_position(0.0, propagate(1, p));
}

inline double chi3_origin(double beta) {
  PhysParams p;
  p.beta = beta;
  p.num_atoms = 1;
  return ThreePhotonField(p, Order::tree).phi3(0.0, 0.0);
}

inline double g3c_origin_lowOD(const PhysParams& prm) { return g3c_origin_lowOD(prm, chi3_origin(prm.beta)); }

struct PowerCorrection {
  double termA;
  double termB;
};

// The two O(beta P_in) corrections to g3 from the expanded denominator (A) and
// the four-photon numerator diagrams (B).
inline PowerCorrection power_correction_pair(const PhysParams& prm) {
  prm.validate();
  const int M = prm.num_atoms;
  const double b = prm.beta, t0 = prm.t0(), r0 = prm.r0(), P = prm.p_in;
  if (t0 == 0.0) throw degenerate_normalization("t0 = 0");
  const double g = std::sqrt(b * (1.0 - b));
  CompensatedSum<double> x;
  x.add(M * b * powi(t0, 2 * M - 2));
  for (int m = 0; m < M; ++m) {
    x.add(m * b * r0 * powi(t0, 2 * m - 1));
    x.add(g * powi(t0, 2 * m - 1));
  }
  const double X = x.value();
  const double n1 = P * powi(t0, 2 * M);
  const double A = -3.0 * n1 * n1 * P * P * powi(t0, 2 * M) * 32.0 * b * X / (n1 * n1 * n1);
  const double B = P * P * P * P * 96.0 * b * powi(t0, 6 * M) * X / (n1 * n1 * n1);
  return {A, B};
}

}  // namespace cwqed
