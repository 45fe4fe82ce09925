#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <bit>
#include <cstdint>
#include <vector>

#include "cwqed/core.hpp"
#include "cwqed/grid.hpp"

namespace cwqed {

struct too_large : error {
  using error::error;
};
struct not_converged : error {
  double residual;
  not_converged(const std::string& what, double r) : error(what), residual(r) {}
};

using SparseOp = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using DensityVector = Eigen::VectorXcd;

// Product basis of M two-level atoms restricted to at most n_max excitations.
class SpinChainSpace {
 public:
  SpinChainSpace(int M, int n_max) : M_(M), n_max_(n_max) {
    if (M < 1 || M > 12) throw too_large("SpinChainSpace supports 1 <= M <= 12");
    if (n_max < 0 || n_max > M) throw precondition_violation("cutoff must lie in [0, M]");
    index_.assign(std::size_t(1) << M, -1);
    for (int k = 0; k <= n_max; ++k)
      for (std::uint32_t s = 0; s < (1u << M); ++s)
        if (std::popcount(s) == k) {
          index_[s] = int(states_.size());
          states_.push_back(s);
        }
  }
  int atoms() const { return M_; }
  int cutoff() const { return n_max_; }
  int dim() const { return int(states_.size()); }
  std::uint32_t state(int i) const { return states_[i]; }
  int index(std::uint32_t s) const { return index_[s]; }

  // sigma_j^- within the truncated space.
  SparseOp lowering(int j) const {
    std::vector<Eigen::Triplet<cplx>> tr;
    for (int i = 0; i < dim(); ++i) {
      const auto s = states_[i];
      if (s & (1u << j)) tr.emplace_back(index_[s & ~(1u << j)], i, 1.0);
    }
    SparseOp op(dim(), dim());
    op.setFromTriplets(tr.begin(), tr.end());
    return op;
  }

 private:
  int M_, n_max_;
  std::vector<std::uint32_t> states_;
  std::vector<int> index_;
};

namespace detail {

// kron(A, B) for row-major vectorization vec(rho)[i d + j] = rho(i, j).
inline SparseOp kron(const SparseOp& a, const SparseOp& b) {
  std::vector<Eigen::Triplet<cplx>> tr;
  tr.reserve(std::size_t(a.nonZeros()) * b.nonZeros());
  for (int i = 0; i < a.outerSize(); ++i)
    for (SparseOp::InnerIterator ia(a, i); ia; ++ia)
      for (int k = 0; k < b.outerSize(); ++k)
        for (SparseOp::InnerIterator ib(b, k); ib; ++ib)
          tr.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(), ia.value() * ib.value());
  SparseOp out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(tr.begin(), tr.end());
  return out;
}

inline SparseOp identity(int d) {
  SparseOp id(d, d);
  id.setIdentity();
  return id;
}

}  // namespace detail

// Cascaded master equation generator and output operator.
struct MasterEquation {
  PhysParams params;
  SpinChainSpace space;
  SparseOp hamiltonian;
  SparseOp output;        // O = sqrt(P) 1 - i sqrt(beta) sum sigma_j^-
  SparseOp liouvillian;   // acts on row-major vec(rho)

  int dim() const { return space.dim(); }
};

inline MasterEquation build_liouvillian(const PhysParams& prm, int n_max) {
  prm.validate();
  const int M = prm.num_atoms;
  SpinChainSpace space(M, std::min(n_max, M));
  const int d = space.dim();
  if (double(d) * d > 4.0e6) throw too_large("Liouvillian dimension exceeds 4e6");
  const double b = prm.beta;
  std::vector<SparseOp> sm(M);
  for (int j = 0; j < M; ++j) sm[j] = space.lowering(j);
  SparseOp J(d, d);
  for (const auto& s : sm) J += s;
  SparseOp H(d, d);
  const double drive = std::sqrt(prm.p_in * b);
  for (const auto& s : sm) H += drive * (s + SparseOp(s.adjoint()));
  for (int j = 0; j < M; ++j)
    for (int l = 0; l < j; ++l)
      H += (0.5 * I * b) * (SparseOp(SparseOp(sm[l].adjoint()) * sm[j]) - SparseOp(SparseOp(sm[j].adjoint()) * sm[l]));
  SparseOp decay(d, d);
  for (const auto& s : sm) decay += (1.0 - b) * SparseOp(SparseOp(s.adjoint()) * s);
  decay += b * SparseOp(SparseOp(J.adjoint()) * J);
  const SparseOp heff = H - (0.5 * I) * decay;
  const SparseOp id = detail::identity(d);
  SparseOp L = (-I) * detail::kron(heff, id) + I * detail::kron(id, SparseOp(heff.conjugate()));
  for (const auto& s : sm) L += (1.0 - b) * detail::kron(s, SparseOp(s.conjugate()));
  L += b * detail::kron(J, SparseOp(J.conjugate()));
  L.makeCompressed();
  SparseOp O = std::sqrt(prm.p_in) * id - (I * std::sqrt(b)) * J;
  return MasterEquation{prm, std::move(space), std::move(H), std::move(O), std::move(L)};
}

inline cplx trace(const DensityVector& r, int d) {
  cplx s = 0.0;
  for (int i = 0; i < d; ++i) s += r[std::size_t(i) * d + i];
  return s;
}

// Fixed-step fourth-order Runge-Kutta propagation of d rho/dt = L rho.
// Largest RK4 step.
inline constexpr double kMaxStep = 0.05;

class Propagator {
 public:
  Propagator(const SparseOp& L, double max_step) : L_(L), h_(max_step) {}
  void evolve(DensityVector& r, double t) const {
    if (t <= 0.0) return;
    const int n = std::max(1, int(std::ceil(t / h_ - 1e-12)));
    const double h = t / n;
    DensityVector k1, k2, k3, k4;
    for (int s = 0; s < n; ++s) {
      k1 = L_ * r;
      k2 = L_ * (r + (0.5 * h) * k1);
      k3 = L_ * (r + (0.5 * h) * k2);
      k4 = L_ * (r + h * k3);
      r += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  double max_step() const { return h_; }

 private:
  const SparseOp& L_;
  double h_;
};

inline double operator_norm1(const SparseOp& L) {
  std::vector<double> col(L.cols(), 0.0);
  for (int i = 0; i < L.outerSize(); ++i)
    for (SparseOp::InnerIterator it(L, i); it; ++it) col[it.col()] += std::abs(it.value());
  double m = 0.0;
  for (double c : col) m = std::max(m, c);
  return m;
}

inline void hermitize(DensityVector& r, int d) {
  for (int i = 0; i < d; ++i)
    for (int j = i; j < d; ++j) {
      const cplx a = 0.5 * (r[std::size_t(i) * d + j] + std::conj(r[std::size_t(j) * d + i]));
      r[std::size_t(i) * d + j] = a;
      r[std::size_t(j) * d + i] = std::conj(a);
    }
  r /= trace(r, d);
}

// Steady state: direct sparse solve with a trace constraint row for
// dim^2 <= 4096, otherwise time evolution from the ground state with
// residual monitoring.
inline DensityVector steady_state(const MasterEquation& me, double tol = 1e-10) {
  const int d = me.dim();
  const auto& L = me.liouvillian;
  const double lnorm = operator_norm1(L);
  DensityVector r;
  if (std::size_t(d) * d <= 4096) {
    const Eigen::SparseMatrix<cplx> A(L);
    std::vector<Eigen::Triplet<cplx>> tr;
    for (int k = 0; k < A.outerSize(); ++k)
      for (Eigen::SparseMatrix<cplx>::InnerIterator it(A, k); it; ++it)
        if (it.row() != 0) tr.emplace_back(it.row(), it.col(), it.value());
    for (int i = 0; i < d; ++i) tr.emplace_back(0, i * d + i, 1.0);
    Eigen::SparseMatrix<cplx> B(A.rows(), A.cols());
    B.setFromTriplets(tr.begin(), tr.end());
    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(B);
    if (lu.info() != Eigen::Success) throw not_converged("sparse LU factorization failed", -1.0);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(A.rows());
    rhs[0] = 1.0;
    r = lu.solve(rhs);
  } else {
    r = DensityVector::Zero(std::size_t(d) * d);
    r[0] = 1.0;
    Propagator prop(L, kMaxStep);
    double t = 0.0, res = 1.0;
    while (t < 2000.0) {
      prop.evolve(r, 10.0);
      t += 10.0;
      res = (L * r).norm() / r.norm();
      if (res < tol * lnorm) break;
    }
    if (!(res < tol * lnorm)) throw not_converged("steady state did not converge", res);
  }
  hermitize(r, d);
  const double res = (L * r).norm() / r.norm();
  if (!(res < tol * lnorm)) throw not_converged("steady state residual too large", res);
  return r;
}

inline cplx expectation(const SparseOp& op, const DensityVector& r, int d) {
  cplx s = 0.0;
  for (int i = 0; i < op.outerSize(); ++i)
    for (SparseOp::InnerIterator it(op, i); it; ++it) s += it.value() * r[std::size_t(it.col()) * d + it.row()];
  return s;
}

// Superoperators acting on vec(rho).
inline SparseOp left_op(const SparseOp& a, int d) { return detail::kron(a, detail::identity(d)); }
inline SparseOp right_adjoint_op(const SparseOp& a, int d) {
  return detail::kron(detail::identity(d), SparseOp(a.conjugate()));
}

// Tr[S U(t2-t1) S U(t1) S rho] on the product grid (t_i, t_j), using only
// sorted pairs and filling the transpose. The grid must start at 0 and be uniform.
inline CorrelationGrid qrt_three_point(const MasterEquation& me, const DensityVector& rho, const SparseOp& S,
                                       const std::vector<double>& times, int substeps = 2) {
  const int d = me.dim();
  const int n = int(times.size());
  if (n < 2 || times[0] != 0.0) throw precondition_violation("time grid must start at 0");
  const double dt = times[1] - times[0];
  for (int i = 1; i < n; ++i)
    if (std::abs(times[i] - times[i - 1] - dt) > 1e-12 * (1.0 + std::abs(times[i])))
      throw precondition_violation("time grid must be uniform");
  Propagator prop(me.liouvillian, std::min(dt / substeps, kMaxStep));
  CorrelationGrid g(times, times);
  DensityVector a = S * rho;
  const cplx tr0 = trace(a, d);
  for (int i = 0; i < n; ++i) {
    if (i > 0) prop.evolve(a, dt);
    if (std::abs(trace(a, d) - tr0) > 1e-9 * (1.0 + std::abs(tr0))) throw not_converged("trace drift in propagation", std::abs(trace(a, d) - tr0));
    DensityVector bvec = S * a;
    for (int j = i; j < n; ++j) {
      if (j > i) prop.evolve(bvec, dt);
      const double v = trace(S * bvec, d).real();
      g.at(i, j) = v;
      g.at(j, i) = v;
    }
  }
  return g;
}

// Normally ordered central intensity superoperator O rho O^dag - nbar rho.
inline SparseOp intensity_fluctuation(const MasterEquation& me, double nbar) {
  const int d = me.dim();
  SparseOp S = detail::kron(me.output, SparseOp(me.output.conjugate()));
  S -= nbar * detail::kron(detail::identity(d), detail::identity(d));
  return S;
}

// Normally ordered central quadrature superoperator
// (e^{i theta} O rho + e^{-i theta} rho O^dag)/2 - mu rho.
inline SparseOp quadrature_fluctuation(const MasterEquation& me, double theta, double mu) {
  const int d = me.dim();
  const cplx e = std::exp(I * theta);
  SparseOp S = (0.5 * e) * left_op(me.output, d) + (0.5 * std::conj(e)) * right_adjoint_op(me.output, d);
  S -= mu * detail::kron(detail::identity(d), detail::identity(d));
  return S;
}

inline double output_power(const MasterEquation& me, const DensityVector& rho) {
  const SparseOp n = SparseOp(me.output.adjoint()) * me.output;
  return expectation(n, rho, me.dim()).real();
}

// G^(3)(t1, t2, 0) with raw (non-central) intensity insertions.
inline CorrelationGrid qrt_correlator3(const MasterEquation& me, const DensityVector& rho, const std::vector<double>& times) {
  const SparseOp S = detail::kron(me.output, SparseOp(me.output.conjugate()));
  auto g = qrt_three_point(me, rho, S, times);
  g.observable = "G3";
  return g;
}

// G^(2)(t) = Tr[N U(t) N rho].
inline std::vector<double> qrt_correlator2(const MasterEquation& me, const DensityVector& rho, const std::vector<double>& times,
                                           int substeps = 2) {
  const int d = me.dim();
  const SparseOp S = detail::kron(me.output, SparseOp(me.output.conjugate()));
  std::vector<double> out(times.size());
  DensityVector a = S * rho;
  const Propagator prop(me.liouvillian, kMaxStep / substeps);
  double t = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < t) throw precondition_violation("times must be sorted");
    const double step = times[i] - t;
    prop.evolve(a, step);
    t = times[i];
    out[i] = trace(S * a, d).real();
  }
  return out;
}

// Connected third-order intensity correlation g_c^(3)(t1, t2, 0).
inline CorrelationGrid qrt_g3c(const MasterEquation& me, const DensityVector& rho, const std::vector<double>& times) {
  const double nbar = output_power(me, rho);
  if (!(nbar > 0.0)) throw degenerate_normalization("zero output power");
  auto g = qrt_three_point(me, rho, intensity_fluctuation(me, nbar), times);
  for (auto& v : g.values) v /= nbar * nbar * nbar;
  g.observable = "g3c";
  return g;
}

// Normally ordered third central moment of the quadrature X_theta.
inline CorrelationGrid qrt_cumulant3(const MasterEquation& me, const DensityVector& rho, const std::vector<double>& times,
                                     double theta) {
  const double mu = (std::exp(I * theta) * expectation(me.output, rho, me.dim())).real();
  auto g = qrt_three_point(me, rho, quadrature_fluctuation(me, theta, mu), times);
  g.observable = "cumulant3";
  return g;
}

}  // namespace cwqed
