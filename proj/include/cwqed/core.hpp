#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cwqed {

using cplx = std::complex<double>;
inline constexpr double pi = std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct range_error : error {
  using error::error;
};
struct unsupported_parameters : error {
  using error::error;
};
struct requires_offset : error {
  using error::error;
};
struct degenerate_normalization : error {
  using error::error;
};
struct precondition_violation : error {
  using error::error;
};

// Natural units: gamma_tot = v_g = hbar = 1. Momenta in units of gamma_tot,
// positions and times in 1/gamma_tot.
struct PhysParams {
  double beta = 0.05;
  double gamma_tot = 1.0;
  int num_atoms = 1;
  double p_in = 0.0;
  double theta = 0.0;

  double od() const { return 4.0 * beta * num_atoms; }
  double t0() const { return 1.0 - 2.0 * beta; }
  double r0() const { return -2.0 * std::sqrt(beta * (1.0 - beta)); }

  void validate() const {
    if (!(beta >= 0.0 && beta <= 1.0)) throw precondition_violation("beta must lie in [0,1]");
    if (gamma_tot != 1.0) throw precondition_violation("gamma_tot is fixed to 1");
    if (num_atoms < 1) throw precondition_violation("num_atoms must be >= 1");
    if (!(p_in >= 0.0)) throw precondition_violation("p_in must be >= 0");
  }
};

inline bool finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

inline cplx checked(cplx z, const char* where) {
  if (!finite(z)) throw range_error(std::string("non-finite value in ") + where);
  return z;
}

// Neumaier compensated summation.
template <class T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  T sum_{};
  T comp_{};
};

template <class T>
class CompensatedSum<std::complex<T>> {
 public:
  void add(std::complex<T> x) {
    re_.add(x.real());
    im_.add(x.imag());
  }
  std::complex<T> value() const { return {re_.value(), im_.value()}; }

 private:
  CompensatedSum<T> re_, im_;
};

// Binomial coefficient by ratio accumulation, log-gamma above n = 60.
inline double binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  if (k > n - k) k = n - k;
  if (n > 60) {
    return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
  }
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

inline double factorial(int n) {
  if (n < 0) throw range_error("negative factorial");
  if (n > 170) throw range_error("factorial overflow");
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// i^n for integer n.
inline cplx ipow(int n) {
  switch (((n % 4) + 4) % 4) {
    case 0: return {1, 0};
    case 1: return {0, 1};
    case 2: return {-1, 0};
    default: return {0, -1};
  }
}

inline cplx powi(cplx z, int n) {
  if (n < 0) return 1.0 / powi(z, -n);
  cplx r{1, 0};
  while (n) {
    if (n & 1) r *= z;
    z *= z;
    n >>= 1;
  }
  return r;
}

inline double powi(double x, int n) {
  if (n < 0) return 1.0 / powi(x, -n);
  double r = 1.0;
  while (n) {
    if (n & 1) r *= x;
    x *= x;
    n >>= 1;
  }
  return r;
}

// t_k = 1 - i beta / (k + i/2)
inline cplx transmission(double k, double beta) { return 1.0 - I * beta / (k + 0.5 * I); }

template <class C>
inline C transmission_c(C k, double beta) {
  return C(1.0) - C(0.0, beta) / (k + C(0.0, 0.5));
}

// r_k = -sqrt(beta (1 - beta)) i / (k + i/2)
inline cplx reflection(double k, double beta) {
  return -std::sqrt(beta * (1.0 - beta)) * I / (k + 0.5 * I);
}

// F(j,l) = 2 pi i^{-j-l} prod_{k=1}^{l-1} (j+k-1) / (l-1)!
inline cplx f_integral(int j, int l) {
  if (j < 1 || l < 1) throw precondition_violation("f_integral needs j,l >= 1");
  if (j + l > 1000) throw range_error("f_integral order beyond 1000");
  double prod = 1.0;
  for (int k = 1; k <= l - 1; ++k) prod = prod * (j + k - 1) / k;
  return 2.0 * pi * ipow(-j - l) * prod;
}

// 2F1(a,b;c;z) for a terminating series: a or b a non-positive integer whose
// magnitude is strictly below |c| whenever c is a non-positive integer.
template <class C = cplx>
inline C gauss2f1_terminating(int a, int b, int c, C z) {
  int n;
  if (a <= 0 && b <= 0)
    n = std::min(-a, -b);
  else if (a <= 0)
    n = -a;
  else if (b <= 0)
    n = -b;
  else
    throw unsupported_parameters("2F1 series does not terminate");
  if (c <= 0 && n >= -c + 1) throw unsupported_parameters("2F1 denominator Pochhammer vanishes");
  CompensatedSum<C> sum;
  C term(1.0);
  for (int k = 0; k <= n; ++k) {
    sum.add(term);
    if (k == n) break;
    term = term * (double(a + k) * double(b + k) / (double(c + k) * double(k + 1))) * z;
  }
  return sum.value();
}

// B(z;a,b) = int_0^z t^{a-1}(1-t)^{b-1} dt for integer a,b >= 1.
template <class C = cplx>
inline C incomplete_beta(C z, int a, int b) {
  if (a < 1 || b < 1) throw unsupported_parameters("incomplete_beta needs integer a,b >= 1");
  CompensatedSum<C> sum;
  C zp(1.0);
  for (int k = 0; k < a; ++k) zp *= z;
  double sgn = 1.0;
  for (int k = 0; k < b; ++k) {
    sum.add(sgn * binomial(b - 1, k) * zp / double(a + k));
    zp *= z;
    sgn = -sgn;
  }
  return sum.value();
}

}  // namespace cwqed
