#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "cwqed/core.hpp"

namespace cwqed {

// Single-photon even-channel phase (k - i/2)/(k + i/2).
inline cplx s1_coefficient(cplx k) { return (k - 0.5 * I) / (k + 0.5 * I); }

// Connected two-photon coefficient of delta(p1+p2-k1-k2).
inline cplx s2c(cplx p1, cplx p2, cplx k1, cplx k2) {
  return (I / (2.0 * pi)) * (p1 + p2 + I) /
         ((p1 + 0.5 * I) * (p2 + 0.5 * I) * (k1 + 0.5 * I) * (k2 + 0.5 * I));
}

inline cplx s2c_coefficient(cplx p1, cplx k1, cplx k2) { return s2c(p1, k1 + k2 - p1, k1, k2); }

// Connected three-photon coefficient of delta(sum p - sum k), summed over all
// 36 pairs of permutations of {k} and {p}. Overall prefactor -i/(12 pi^2).
inline cplx s3c(const std::array<cplx, 3>& p, const std::array<cplx, 3>& k) {
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  const cplx kden = (k[0] + 0.5 * I) * (k[1] + 0.5 * I) * (k[2] + 0.5 * I);
  cplx sum = 0.0;
  for (const auto& sp : perms) {
    for (const auto& sk : perms) {
      const cplx a = p[sp[0]], b = p[sp[1]], c = k[sk[0]];
      sum += 1.0 / ((a + b - c + 0.5 * I) * (a + 0.5 * I));
    }
  }
  return -I / (12.0 * pi * pi) * sum / kden;
}

inline cplx s3c_coefficient(cplx p1, cplx p2, cplx k1, cplx k2, cplx k3) {
  return s3c({p1, p2, k1 + k2 + k3 - p1 - p2}, {k1, k2, k3});
}

enum class TwoPhotonBranch { lossless, one_loss };

// Single-atom two-photon S-matrix: disconnected product terms plus a weighted
// connected part.
struct SingleAtomTwoPhoton {
  TwoPhotonBranch branch;
  double connected_weight;
  // Disconnected part is 1/2 (A_p1 t_p2 + swap); A = t for lossless, r for one-loss.
  double disconnected_weight;
  bool first_factor_is_reflection;
};

inline SingleAtomTwoPhoton single_atom_two_photon(TwoPhotonBranch branch, const PhysParams& prm) {
  prm.validate();
  const double b = prm.beta;
  if (branch == TwoPhotonBranch::lossless) return {branch, b * b, 0.5, false};
  return {branch, std::pow(b, 1.5) * std::sqrt(1.0 - b), 0.5, true};
}

inline cplx single_atom_two_photon_connected(const SingleAtomTwoPhoton& s, cplx p1, cplx p2, cplx k1, cplx k2) {
  return s.connected_weight * s2c(p1, p2, k1, k2);
}

// Real-space kernel for one atom in the ordered sector y1 > ... > yn, as a sum
// over permutations P with P_j >= j-1.
struct DeltaTerm {
  double coefficient;
  std::vector<std::pair<int, int>> pairs;  // delta(y[first] - xi[second])
};

struct KernelValue {
  double smooth = 0.0;
  std::vector<DeltaTerm> deltas;
};

inline std::vector<std::vector<int>> legitimate_permutations(int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i + 1;
  std::vector<std::vector<int>> out;
  do {
    bool ok = true;
    for (int j = 2; j <= n; ++j)
      if (p[j - 1] < j - 1) ok = false;
    if (ok) out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

inline KernelValue real_space_kernel(int n, const std::vector<double>& y, const std::vector<double>& xi) {
  if (n != 2 && n != 3) throw unsupported_parameters("real_space_kernel supports n = 2, 3");
  if ((int)y.size() != n || (int)xi.size() != n) throw precondition_violation("coordinate count mismatch");
  for (int j = 1; j < n; ++j)
    if (!(y[j - 1] > y[j])) throw precondition_violation("outgoing positions must be strictly ordered");
  KernelValue out;
  for (int j = 0; j < n; ++j) {
    if (xi[j] < y[j]) return out;
    if (j + 1 < n && y[j] < xi[j + 1]) return out;
  }
  const double norm = 1.0 / factorial(n);
  for (const auto& P : legitimate_permutations(n)) {
    for (int mask = 0; mask < (1 << n); ++mask) {
      double coef = norm;
      DeltaTerm dt;
      for (int j = 0; j < n; ++j) {
        const int yi = P[j] - 1;
        if (mask & (1 << j)) {
          dt.pairs.emplace_back(yi, j);
        } else {
          const double d = y[yi] - xi[j];
          coef *= (xi[j] > y[yi]) ? -std::exp(0.5 * d) : 0.0;
        }
      }
      if (coef == 0.0) continue;
      if (dt.pairs.empty()) {
        out.smooth += coef;
      } else {
        dt.coefficient = coef;
        out.deltas.push_back(std::move(dt));
      }
    }
  }
  return out;
}

}  // namespace cwqed
