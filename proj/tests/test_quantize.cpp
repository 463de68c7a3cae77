#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "kamq/errors.hpp"
#include "kamq/quantize.hpp"

using namespace kamq;

namespace {

NormalFormState torus_state(const Eigen::VectorXd& omega) {
  PhaseGeometry g{static_cast<int>(omega.size()), 0};
  return make_state(g, 0.0, 0.0, omega, Eigen::MatrixXd(0, 0), Series(g, 0, 2), Series(g, 0, 2));
}

NormalFormState resonant_state(double eps, const Eigen::Matrix2d& M) {
  PhaseGeometry g{1, 1};
  return make_state(g, eps, 0.0, Eigen::VectorXd::Ones(1), M, Series(g, 0, 2), Series(g, 0, 2));
}

const SpectrumEntry* find(const SpectrumPrediction& sp, std::vector<int> ny, std::vector<int> nu,
                          std::vector<int> nv) {
  for (const auto& e : sp.entries)
    if (e.qn.n_y == ny && e.qn.n_u == nu && e.qn.n_v == nv) return &e;
  return nullptr;
}

}  // namespace

TEST(Quantize, ZeroEpsilonTorusLevel) {
  auto sp = predict_spectrum(torus_state(Eigen::Vector2d(1.0, std::sqrt(2.0))), 0.1, {0, 0}, {});
  const auto* e = find(sp, {2, 1}, {}, {});
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->E, 0.1 * (2.0 + std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(e->E, 0.34142, 1e-5);
  for (const auto& x : sp.entries)
    EXPECT_EQ(x.E, 0.0 + 1.0 * (0.1 * (x.qn.n_y[0] + 0.0)) + std::sqrt(2.0) * (0.1 * (x.qn.n_y[1] + 0.0)));
  EXPECT_TRUE(std::is_sorted(sp.entries.begin(), sp.entries.end(),
                             [](const auto& a, const auto& b) { return a.E < b.E; }));
}

TEST(Quantize, MaslovShift) {
  auto sp = predict_spectrum(torus_state(Eigen::VectorXd::Constant(1, 2.0)), 0.1, {2}, {});
  EXPECT_NEAR(sp.entries.front().E, 0.1 * 2.0 * 0.5, 1e-15);
}

TEST(Quantize, ResonantGroundContribution) {
  const double eps = 0.02;
  auto sp = predict_spectrum(resonant_state(eps, Eigen::Matrix2d::Identity()), 0.1, {0}, {});
  const auto* e = find(sp, {0}, {0}, {0});
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->E, eps / 2, 1e-15);
}

TEST(Quantize, ClusterSpacing) {
  const double eps = 0.02, lam = 1.5, lamt = 0.7;
  Eigen::Matrix2d M = Eigen::Vector2d(lam, lamt).asDiagonal();
  auto sp = predict_spectrum(resonant_state(eps, M), 0.1, {0}, {});
  // Adjacent resonant quantum numbers at fixed n_y.
  double min_gap = 1e300;
  std::vector<double> in_cluster;
  for (const auto& e : sp.entries) {
    if (e.qn.n_y[0] != 2) continue;
    in_cluster.push_back(e.E);
    if (const auto* up = find(sp, {2}, {e.qn.n_u[0] + 1}, e.qn.n_v)) min_gap = std::min(min_gap, up->E - e.E);
    if (const auto* up = find(sp, {2}, e.qn.n_u, {e.qn.n_v[0] + 1})) min_gap = std::min(min_gap, up->E - e.E);
  }
  std::sort(in_cluster.begin(), in_cluster.end());
  EXPECT_NEAR(min_gap, 0.5 * eps * std::min(lam, lamt), 1e-14);
  // Cluster diameter bound.
  const double diam = in_cluster.back() - in_cluster.front();
  EXPECT_LE(diam, 0.5 * eps * (lam + lamt) * (4 + 1) + 1e-14);
}

TEST(Quantize, OscillatorStandardFrequencies) {
  const double eps = 0.01, h = 0.05;
  Eigen::Matrix2d M = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  PredictOptions opt;
  opt.scaling = ResonantScaling::OscillatorStandard;
  auto sp = predict_spectrum(resonant_state(eps, M), h, {0}, opt);
  ASSERT_EQ(sp.nu.size(), 1);
  EXPECT_NEAR(sp.nu[0], eps * std::sqrt(2.0), 1e-16);
  const auto* e = find(sp, {1}, {3}, {0});
  ASSERT_NE(e, nullptr);
  EXPECT_NEAR(e->E, h * 1.0 + h * eps * std::sqrt(2.0) * 3.5, 1e-15);
  EXPECT_EQ(find(sp, {1}, {3}, {1}), nullptr);
}

// Orthogonal conjugation of U and V leaves the lambda lists unchanged.
TEST(Quantize, LambdasConjugationInvariant) {
  PhaseGeometry g{1, 2};
  Eigen::Matrix2d U{{2.0, 0.3}, {0.3, 1.0}}, W{{1.5, -0.2}, {-0.2, 0.5}};
  const double c = std::cos(0.7), s = std::sin(0.7);
  Eigen::Matrix2d Q{{c, -s}, {s, c}};
  auto build = [&](const Eigen::Matrix2d& A, const Eigen::Matrix2d& B) {
    Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
    M.topLeftCorner(2, 2) = A;
    M.bottomRightCorner(2, 2) = B;
    return make_state(g, 0.01, 0.0, Eigen::VectorXd::Ones(1), M, Series(g, 0, 2), Series(g, 0, 2));
  };
  PredictOptions opt;
  opt.nres_max = 1;
  auto a = predict_spectrum(build(U, W), 0.1, {0}, opt);
  auto b = predict_spectrum(build(Q * U * Q.transpose(), Q.transpose() * W * Q), 0.1, {0}, opt);
  EXPECT_LT((a.lambdas - b.lambdas).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((a.lambdas_tilde - b.lambdas_tilde).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Quantize, EnergyWindow) {
  PredictOptions opt;
  opt.E_lo = 0.15;
  opt.E_hi = 0.35;
  auto sp = predict_spectrum(torus_state(Eigen::VectorXd::Ones(1)), 0.1, {0}, opt);
  ASSERT_EQ(sp.entries.size(), 2u);
  EXPECT_EQ(sp.entries[0].qn.n_y[0], 2);
}

TEST(Quantize, NonSymmetricRejected) {
  auto st = resonant_state(0.01, Eigen::Matrix2d::Identity());
  st.Mp(0, 1) = 0.5;
  EXPECT_THROW(predict_spectrum(st, 0.1, {0}, {}), ConfigError);
}

TEST(Quantize, RemainderBoundExamples) {
  RemainderConstants k;
  EXPECT_EQ(remainder_bound(0.01, 0.0, 2.0, k), 0.0);
  const double r = remainder_bound(0.01, 1.0, 2.0, k) / remainder_bound(0.02, 1.0, 2.0, k);
  EXPECT_NEAR(std::log(r), -50.0, 1e-10);
  EXPECT_THROW(remainder_bound(0.1, 1.0, 1.0, k), ConfigError);
  EXPECT_THROW(remainder_bound(0.0, 1.0, 2.0, k), ConfigError);
}

TEST(Quantize, RemainderMonotoneInH) {
  RemainderConstants k{0.5, 2.0, -1.0};
  double prev = 0.0;
  for (double h = 0.01; h < 1.0; h *= 1.3) {
    const double v = remainder_bound(h, 0.1, 2.5, k);
    EXPECT_GE(v, prev);
    prev = v;
  }
  EXPECT_LT(remainder_bound(1e-3, 0.1, 2.5, k), 1e-10);
}

// Stirling gives the minimizer up to a bounded factor.
TEST(Quantize, OptimalOrderMatchesStirling) {
  for (double alpha : {1.5, 2.0, 3.0})
    for (double delta : {1e-3, 3e-3, 1e-2}) {
      const int nb = optimal_n_bruteforce(1.0, delta, alpha);
      const double ns = optimal_n_stirling(1.0, delta, alpha);
      if (ns > 200) continue;
      ASSERT_GT(nb, 0);
      EXPECT_GT(nb / ns, 0.3) << alpha << " " << delta;
      EXPECT_LT(nb / ns, 3.0) << alpha << " " << delta;
    }
}

// Independent brute force over the same objective.
TEST(Quantize, OptimalOrderBruteForceOracle) {
  const double C = 2.0, delta = 0.01, alpha = 2.0;
  int best = 0;
  double bv = 1e300;
  for (int n = 0; n <= 200; ++n) {
    const double v = (n + 1) * std::log(C) + (alpha - 1) * std::lgamma(n + 1.0) + n * std::log(delta);
    if (v < bv) {
      bv = v;
      best = n;
    }
  }
  EXPECT_EQ(optimal_n_bruteforce(C, delta, alpha), best);
}

// An interval of length 2 L h holds floor(2L) or floor(2L) + 1 lattice points.
TEST(Quantize, ActionIndexSetSinglePoint) {
  for (double L : {1.0, 2.5, 3.0}) {
    auto s = action_index_set({Eigen::VectorXd::Constant(1, 0.537)}, 0.1, L, {0});
    const std::size_t n = s.m.size();
    const auto fl = static_cast<std::size_t>(std::floor(2 * L));
    EXPECT_TRUE(n == fl || n == fl + 1) << L << " " << n;
    for (const auto& m : s.m) EXPECT_LE(std::abs(0.537 - 0.1 * m[0]), L * 0.1 + 1e-12);
  }
  // A lattice hit gives the symmetric window of 2 floor(L) + 1 points.
  auto s = action_index_set({Eigen::VectorXd::Constant(1, 0.5)}, 0.125, 2.0, {0});
  EXPECT_EQ(s.m.size(), 5u);
}

TEST(Quantize, ActionIndexSetScalesWithH) {
  std::vector<Eigen::VectorXd> seg;
  for (int i = 0; i <= 2000; ++i) seg.push_back(Eigen::VectorXd::Constant(1, 1.0 + i / 2000.0));
  auto a = action_index_set(seg, 1e-3, 1.0, {0});
  auto b = action_index_set(seg, 5e-4, 1.0, {0});
  EXPECT_NEAR(double(b.m.size()) / a.m.size(), 2.0, 0.2);
  EXPECT_NEAR(double(a.m.size()), 1.0 / 1e-3, 0.1 / 1e-3);
}

TEST(Quantize, ActionIndexSetEdgeCases) {
  auto e = action_index_set({}, 0.1, 1.0, {0});
  EXPECT_TRUE(e.empty_input);
  EXPECT_TRUE(e.m.empty());
  auto z = action_index_set({Eigen::VectorXd::Constant(1, 0.5371)}, 0.1, 0.0, {0});
  EXPECT_TRUE(z.m.empty());
}

TEST(Quantize, SpectrumCsvColumns) {
  auto sp = predict_spectrum(resonant_state(0.01, Eigen::Matrix2d::Identity()), 0.1, {0}, {});
  const std::string csv = spectrum_to_csv(sp);
  const std::string head = csv.substr(0, csv.find('\n'));
  EXPECT_NE(head.find("E"), std::string::npos);
  EXPECT_NE(head.find("cluster_id"), std::string::npos);
  EXPECT_NE(head.find("remainder_bound"), std::string::npos);
  EXPECT_EQ(parse_scaling(to_string(ResonantScaling::OscillatorStandard)), ResonantScaling::OscillatorStandard);
}
