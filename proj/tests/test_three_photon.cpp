#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>
#include <gtest/gtest.h>

#include <functional>
#include <memory>
#include <random>

#include "cwqed/three_photon.hpp"

using namespace cwqed;

namespace {

double rel(cplx a, cplx b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

DiagramConfig config(double beta, int M, bool loops = false) {
  DiagramConfig c;
  c.params.beta = beta;
  c.params.num_atoms = M;
  c.include_loops = loops;
  return c;
}

cplx integrate_real_line(const std::function<cplx(double)>& f, double tol = 1e-12) {
  static std::unique_ptr<gsl_integration_workspace, void (*)(gsl_integration_workspace*)> w(
      gsl_integration_workspace_alloc(4000), gsl_integration_workspace_free);
  gsl_set_error_handler_off();
  double out[2];
  for (int part = 0; part < 2; ++part) {
    auto g = [&](double x) { return part ? f(x).imag() : f(x).real(); };
    gsl_function gf{[](double x, void* v) { return (*static_cast<decltype(g)*>(v))(x); }, &g};
    double err;
    gsl_integration_qagi(&gf, 1e-300, tol, 4000, w.get(), &out[part], &err);
  }
  return {out[0], out[1]};
}

cplx t4v_naive(cplx p1, cplx p2, const DiagramConfig& cfg) {
  const int M = cfg.params.num_atoms;
  const double b = cfg.params.beta, t0 = cfg.params.t0();
  auto t = [&](cplx k) { return transmission_c(k, b); };
  const std::array<cplx, 3> p{p1, p2, -p1 - p2};
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  cplx total = 0.0;
  for (const auto& s : perms) {
    const cplx a = p[s[0]], c = p[s[1]], d = p[s[2]], q2 = -a;
    for (int j = 0; j <= M - 2; ++j)
      for (int m = 0; m <= M - j - 2; ++m)
        total += powi(t(a), M - j - 1) * powi(t(c) * t(d), M - j - m - 2) * b * b * s2c(c, d, q2, 0.0) *
                 powi(t(q2), m) * b * b * s2c(a, q2, 0.0, 0.0) * powi(t0, 3 * j + m + 1);
  }
  return total;
}

}  // namespace

TEST(T3v, SingleAtomIsVertex) {
  const auto cfg = config(0.3, 1);
  for (auto [a, b] : {std::pair{0.2, -0.7}, std::pair{1.5, 0.4}}) {
    const cplx expected = 0.027 * s3c({a, b, -a - b}, {0.0, 0.0, 0.0});
    EXPECT_LT(rel(t3v(a, b, cfg), expected), 1e-14);
  }
}

TEST(T3v, OriginCollapsesGeometricSum) {
  for (int M : {1, 4, 30}) {
    const auto cfg = config(0.05, M);
    const double t0 = cfg.params.t0();
    const cplx expected = double(M) * powi(t0, 3 * (M - 1)) * powi(0.05, 3) * s3c({0.0, 0.0, 0.0}, {0.0, 0.0, 0.0});
    EXPECT_LT(rel(t3v(0.0, 0.0, cfg), expected), 1e-13) << M;
  }
}

TEST(T3v, LinearInAtomNumberAtSmallDepth) {
  const double b = 1e-4;
  const cplx one = t3v(0.3, 0.1, config(b, 1));
  for (int M : {2, 5, 10}) EXPECT_NEAR(std::abs(t3v(0.3, 0.1, config(b, M)) / one) / M, 1.0, 1e-2);
}

TEST(T4v, SingleAtomVanishes) { EXPECT_EQ(t4v(0.3, 0.8, config(0.2, 1)), cplx(0.0)); }

TEST(T4v, TwoAtomsSingleTerm) {
  const auto cfg = config(0.2, 2);
  const double b = 0.2, t0 = cfg.params.t0();
  const cplx p1 = 0.4, p2 = -1.1, p3 = -p1 - p2;
  const cplx expected = transmission_c(p1, b) * powi(b, 4) * s2c(p2, p3, -p1, 0.0) * s2c(p1, -p1, 0.0, 0.0) * t0;
  EXPECT_LT(rel(t4v_single(p1, p2, p3, cfg), expected), 1e-14);
}

TEST(T4v, ClosedSumMatchesNaiveSum) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> pd(-3.0, 3.0);
  for (double b : {0.05, 0.3}) {
    for (int M = 1; M <= 10; ++M) {
      const auto cfg = config(b, M);
      for (int i = 0; i < 4; ++i) {
        const double a = pd(rng), c = pd(rng);
        EXPECT_LT(rel(t4v(a, c, cfg), t4v_naive(a, c, cfg)), 1e-12) << "beta=" << b << " M=" << M;
      }
    }
  }
}

TEST(FundamentalIntegral, Examples) {
  EXPECT_LT(rel(fundamental_integral(1, 1, 1, 0, 0.0), cplx(-2.0 * pi)), 1e-15);
  const cplx p1 = 0.37;
  EXPECT_LT(rel(fundamental_integral(4, 1, 1, 0, p1), -2.0 * pi * I / (-p1 + I)), 1e-15);
  EXPECT_THROW(fundamental_integral(2, 1, 1, 1, 0.3), unsupported_parameters);
  EXPECT_THROW(fundamental_integral(3, 1, 1, 2, 0.3), unsupported_parameters);
  EXPECT_THROW(fundamental_integral(5, 1, 1, 1, 0.3), unsupported_parameters);
  EXPECT_THROW(fundamental_integral(1, 0, 1, 1, 0.3), unsupported_parameters);
}

TEST(FundamentalIntegral, QuadratureOracle) {
  auto lp = [](double l, int a) { return powi(cplx(l, 0.5), -a); };
  auto lm = [](double l, int b) { return powi(cplx(-l, 0.5), -b); };
  for (int a = 1; a <= 5; ++a)
    for (int b = 1; b <= 5; ++b) {
      const cplx q1 = integrate_real_line([&](double l) { return lp(l, a) * lm(l, b); });
      EXPECT_LT(rel(fundamental_integral(1, a, b, 0, 0.0), q1), 1e-8) << "v1 " << a << b;
      for (double P : {-1.3, 0.45, 2.2}) {
        for (int c = 2; c <= 5; ++c) {
          const cplx q2 = integrate_real_line([&](double l) { return lp(l, a) * lm(l, b) * powi(cplx(l + P, 0.5), -c); });
          EXPECT_LT(rel(fundamental_integral(2, a, b, c, P), q2), 1e-8) << "v2 " << a << b << c << " P=" << P;
        }
        const cplx q3 = integrate_real_line([&](double l) { return lp(l, a) * lm(l, b) / cplx(l + P, 0.5); });
        EXPECT_LT(rel(fundamental_integral(3, a, b, 1, P), q3), 1e-8) << "v3 " << a << b << " P=" << P;
        const cplx q4 = integrate_real_line([&](double l) { return lp(l, a) * powi(cplx(-l - P, 0.5), -b); });
        EXPECT_LT(rel(fundamental_integral(4, a, b, 0, P), q4), 1e-8) << "v4 " << a << b << " p1=" << P;
      }
    }
}

TEST(LoopDiagram, EmptyBelowMinimumAtoms) {
  const auto c1 = config(0.05, 1), c2 = config(0.05, 2);
  for (int d = 1; d <= 6; ++d) EXPECT_EQ(loop_diagram(Diagram(d), 0.3, 0.5, c1), cplx(0.0));
  for (int d = 3; d <= 6; ++d) {
    EXPECT_EQ(loop_diagram(Diagram(d), 0.3, 0.5, c2), cplx(0.0));
    EXPECT_EQ(loop_integrand(Diagram(d), 0.3, 0.5, 0.2, c2), cplx(0.0));
  }
}

TEST(LoopDiagram, MatchesLoopMomentumQuadrature) {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> pd(-2.0, 2.0);
  for (int M : {2, 3, 4}) {
    const auto cfg = config(0.05, M);
    for (int i = 0; i < 3; ++i) {
      const double p1 = pd(rng), p2 = pd(rng);
      for (int d = 1; d <= 6; ++d) {
        if (M < 3 && d > 2) continue;
        const Diagram D = Diagram(d);
        const cplx q = integrate_real_line([&](double l) { return loop_integrand(D, p1, p2, l, cfg); }, 1e-12);
        EXPECT_LT(rel(loop_diagram(D, p1, p2, cfg), q), 1e-6) << "C" << d << " M=" << M << " p=(" << p1 << "," << p2 << ")";
      }
    }
  }
}

TEST(LoopDiagram, C1RemovableSingularity) {
  const auto cfg = config(0.05, 4);
  EXPECT_THROW(loop_diagram(Diagram::C1, 0.0, 0.4, cfg), requires_offset);
  const double eps = 1e-4;
  const cplx lo = loop_diagram(Diagram::C1, -eps, 0.4, cfg), hi = loop_diagram(Diagram::C1, eps, 0.4, cfg);
  EXPECT_LT(std::abs(hi - lo), 10.0 * eps * std::abs(hi));
}

TEST(Phi3, Reductions) {
  EXPECT_EQ(phi3_momentum(0.3, 0.2, config(0.0, 5, true)), cplx(0.0));
  const auto cfg = config(0.4, 1, true);
  const cplx expected = powi(0.4, 3) * s3c({0.3, 0.2, -0.5}, {0.0, 0.0, 0.0});
  EXPECT_LT(rel(phi3_momentum(0.3, 0.2, cfg), expected), 1e-14);
}

TEST(Phi3, ConjugationSymmetry) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> pd(-3.0, 3.0);
  for (int M : {2, 5, 9}) {
    const Phi3Evaluator ev(config(0.05, M, true));
    for (int i = 0; i < 5; ++i) {
      const double a = pd(rng), b = pd(rng);
      EXPECT_LT(rel(ev(-a, -b), std::conj(ev(a, b))), 1e-10) << M;
    }
  }
}

TEST(Phi3, PermutationClosure) {
  std::mt19937 rng(6);
  std::uniform_real_distribution<double> pd(-3.0, 3.0);
  for (int M : {3, 6}) {
    const Phi3Evaluator ev(config(0.05, M, true));
    for (int i = 0; i < 4; ++i) {
      const double a = pd(rng), b = pd(rng);
      const cplx ref = ev(a, b);
      for (const auto& [x, y] : momentum_permutations(a, b)) EXPECT_LT(rel(ev(x, y), ref), 1e-12) << M;
    }
  }
}

TEST(Phi3, LoopSuppressedRelativeToTree) {
  const double b = 0.01;
  for (int M : {10, 50}) {
    const Phi3Evaluator ev(config(b, M, true));
    double mt = 0.0, ml = 0.0;
    for (double a = -2.95; a < 3.0; a += 0.5)
      for (double c = -2.9; c < 3.0; c += 0.5) {
        mt = std::max(mt, std::abs(ev.tree(a, c)));
        ml = std::max(ml, std::abs(ev.loop(a, c)));
      }
    EXPECT_GT(ml, 0.0);
    EXPECT_LT(ml / mt, 10.0 * b) << M;
  }
}
