#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kamq/errors.hpp"
#include "kamq/scarring.hpp"

using namespace kamq;

namespace {

QuasiEigenvalueTable table_of(std::vector<double> mus, double h = 0.01) {
  QuasiEigenvalueTable t;
  t.h = h;
  t.maslov = {0};
  for (std::size_t i = 0; i < mus.size(); ++i)
    t.entries.push_back({{static_cast<int>(i)}, Eigen::VectorXd::Constant(1, h * double(i)), mus[i]});
  return t;
}

}  // namespace

TEST(Scarring, K0FromState) {
  PhaseGeometry g{1, 1};
  auto st = make_state(g, 0.01, 0.3, Eigen::VectorXd::Constant(1, 0.7), Eigen::Vector2d(1.0, 4.0).asDiagonal(),
                       Series(g, 0, 2), Series(g, 0, 2));
  auto K = k0_from_state(st);
  const Eigen::VectorXd I = Eigen::VectorXd::Constant(1, 2.0);
  EXPECT_NEAR(K(I, 0.05), 0.3 + 1.4, 1e-15);
  auto Kg = k0_from_state(st, true, 0.1);
  EXPECT_NEAR(Kg(I, 0.05) - K(I, 0.05), 0.5 * 0.1 * 0.05 * 2.0, 1e-15);
  EXPECT_NEAR(Kg(I, -0.05) - K(I, -0.05), 0.5 * 0.1 * 0.05 * 2.0, 1e-15);
}

TEST(Scarring, QuasiTableEnumeration) {
  K0Fn K = [](const Eigen::VectorXd& I, double) { return I.sum(); };
  auto t = build_quasi_table(K, 0.1, 0.0, {0, 2}, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(0.24, 0.24));
  // m1 in {0, 1, 2}; m2 + 1/2 in [0, 2.4] gives m2 in {0, 1}.
  ASSERT_EQ(t.entries.size(), 6u);
  for (std::size_t i = 1; i < t.entries.size(); ++i) EXPECT_LT(t.entries[i - 1].m, t.entries[i].m);
  for (const auto& e : t.entries) {
    EXPECT_NEAR(e.I[1], 0.1 * (e.m[1] + 0.5), 1e-15);
    EXPECT_NEAR(e.mu, e.I.sum(), 1e-15);
  }
}

TEST(Scarring, DiffeoOneDimension) {
  K0Fn K = [](const Eigen::VectorXd& I, double e) { return 0.5 * I[0] * I[0] + e * std::cos(I[0]); };
  auto r = local_diffeo_check(K, 1, Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 2.0),
                              {0.0, 0.01}, 9, 2000);
  EXPECT_TRUE(r.ok);
  EXPECT_NEAR(r.min_singular, 1.0 - 0.01 * std::sin(1.0), 1e-6);
}

// eta = (I1 + eps I2^2, I2^2) with Jacobian [[1, 2 eps I2], [0, 2 I2]].
TEST(Scarring, DiffeoTwoDimensions) {
  K0Fn K = [](const Eigen::VectorXd& I, double e) { return I[0] + e * I[1] * I[1]; };
  const Eigen::Vector2d lo(1.0, 1.0), hi(2.0, 2.0);
  auto r = local_diffeo_check(K, 2, lo, hi, {0.0, 0.05, 0.1}, 5, 3000, 3);
  EXPECT_TRUE(r.ok);
  double oracle = 1e300;
  for (int i = 0; i < 5; ++i)
    for (double e : {0.0, 0.05, 0.1}) {
      const double I2 = 1.0 + i / 4.0;
      Eigen::Matrix2d J{{1.0, 2 * e * I2}, {0.0, 2 * I2}};
      oracle = std::min(oracle, Eigen::JacobiSVD<Eigen::Matrix2d>(J).singularValues().minCoeff());
    }
  EXPECT_NEAR(r.min_singular, oracle, 1e-5);
  EXPECT_GT(r.G1, 0.0);
  EXPECT_LE(r.G1, r.G2);
}

// Fresh pairs satisfy the Lipschitz bounds up to sampling slack.
TEST(Scarring, DiffeoConstantsHoldOnFreshPairs) {
  K0Fn K = [](const Eigen::VectorXd& I, double e) { return I[0] + e * I[1] * I[1]; };
  const Eigen::Vector2d lo(1.0, 1.0), hi(2.0, 2.0);
  const double e = 0.05;
  auto r = local_diffeo_check(K, 2, lo, hi, {e}, 5, 10000, 4);
  auto eta = [&](const Eigen::Vector2d& I) { return Eigen::Vector2d(I[0] + e * I[1] * I[1], I[1] * I[1]); };
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(1.0, 2.0);
  for (int i = 0; i < 2000; ++i) {
    Eigen::Vector2d a(u(rng), u(rng)), b(u(rng), u(rng));
    const double dI = (a - b).norm(), de = (eta(a) - eta(b)).norm();
    EXPECT_GE(dI, 0.9 * r.G1 * de);
    EXPECT_LE(dI, 1.1 * r.G2 * de);
  }
}

TEST(Scarring, SeparationLinearAtZeroEps) {
  const Eigen::Vector2d w(1.0, std::numbers::phi - 1.0);
  K0Fn K = [&](const Eigen::VectorXd& I, double) { return w.dot(I); };
  const double h = 0.05;
  auto t = build_quasi_table(K, h, 0.0, {0, 0}, Eigen::Vector2d(1.0, 1.0), Eigen::Vector2d(1.5, 1.5));
  auto D = ApproximationFunction::power_log(2.0, 2.0, 0.0);
  auto r = separation_check(t, 1.0, D);
  EXPECT_TRUE(r.violations.empty());
  EXPECT_GT(r.pairs_checked, 0u);
  // Independent bound h gamma / Delta(|m - m'|) with gamma = 0.3.
  for (std::size_t a = 0; a < t.entries.size(); ++a)
    for (std::size_t b = a + 1; b < t.entries.size(); ++b) {
      const int k1 = t.entries[a].m[0] - t.entries[b].m[0], k2 = t.entries[a].m[1] - t.entries[b].m[1];
      EXPECT_GE(std::abs(t.entries[a].mu - t.entries[b].mu), h * 0.3 / D(std::abs(k1) + std::abs(k2)));
    }
}

TEST(Scarring, SeparationEdgeCases) {
  auto D = ApproximationFunction::power_log(2.0, 2.0, 0.0);
  auto one = separation_check(table_of({0.5}), 1.0, D);
  EXPECT_TRUE(one.violations.empty());
  EXPECT_EQ(one.pairs_checked, 0u);
  EXPECT_TRUE(std::isinf(one.C2));
  auto dup = separation_check(table_of({0.5, 0.5, 0.7}), 1.0, D);
  ASSERT_EQ(dup.violations.size(), 1u);
  EXPECT_EQ(dup.violations[0].a, 0u);
  EXPECT_EQ(dup.violations[0].b, 1u);
}

TEST(Scarring, CensusWithDisjointWindows) {
  const double h = 0.01, dexp = 1.0;
  auto t = table_of({0.1, 0.2, 0.3, 0.4}, h);
  std::vector<double> eigs{0.1, 0.2001, 0.35, 0.4};
  auto c = window_census(t, dexp, eigs, 4.0, 1.0);
  for (const auto& w : c.windows) EXPECT_LE(w.count, 1);
  EXPECT_EQ(c.windows[2].count, 0);
  EXPECT_EQ(c.fraction, 1.0);
  EXPECT_NEAR(c.bound, 0.5, 1e-15);
  EXPECT_TRUE(c.pass);
}

TEST(Scarring, CensusFractionGrowsWithLambda) {
  const double h = 0.01;
  auto t = table_of({0.1, 0.2, 0.3, 0.4}, h);
  std::vector<double> eigs{0.1, 0.1, 0.1, 0.2, 0.3, 0.3};
  double prev = -1.0;
  for (double lam : {1.5, 2.0, 4.0, 100.0}) {
    auto c = window_census(t, 1.0, eigs, lam, 1.0);
    EXPECT_GE(c.fraction, prev);
    prev = c.fraction;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Scarring, CensusOverlapThrows) {
  auto t = table_of({0.1, 0.1001}, 0.01);
  EXPECT_THROW(window_census(t, 1.0, {0.1}, 4.0, 1.0), InvariantError);
  QuasiEigenvalueTable empty;
  empty.h = 0.01;
  EXPECT_TRUE(window_census(empty, 1.0, {0.1}, 4.0, 1.0).empty);
}

TEST(Scarring, MassOnPureStates) {
  OracleBasis b{1, 0, 5, 1};
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(b.size()));
  v[b.index({2}, {})] = 1.0;
  const double h = 0.1;
  EXPECT_NEAR(mass_on_torus(v, b, h, Eigen::VectorXd::Constant(1, 0.2), 0.05).mass, 1.0, 1e-15);
  EXPECT_EQ(mass_on_torus(v, b, h, Eigen::VectorXd::Constant(1, 0.4), 0.05).mass, 0.0);
  EXPECT_TRUE(mass_on_torus(v, b, h, Eigen::VectorXd::Constant(1, 0.25), 0.01).empty_window);
}

TEST(Scarring, MassPartitionSumsToOne) {
  OracleBasis b{1, 1, 4, 3};
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  Eigen::VectorXcd v(static_cast<Eigen::Index>(b.size()));
  for (auto& c : v) c = cplx(n(rng), n(rng));
  v.normalize();
  const double h = 0.1;
  double total = 0.0;
  for (int m = -4; m <= 4; ++m) total += mass_on_torus(v, b, h, Eigen::VectorXd::Constant(1, h * m), 0.04).mass;
  EXPECT_NEAR(total, 1.0, 1e-14);
}

TEST(Scarring, ZeroEpsilonEigenstatesLiveOnTheirTorus) {
  SymbolSpec s;
  s.d = 1;
  s.h0 = {{1.0, {1}}};
  const double h = 0.05;
  auto op = build_operator(s, h, 0.0, 6, 1);
  auto dg = diagonalize(op, true);
  for (Eigen::Index c = 0; c < dg.values.size(); ++c) {
    const int n = dg.labels[static_cast<std::size_t>(c)].torus[0];
    EXPECT_NEAR(mass_on_torus(dg.vectors.col(c), op.basis, h, Eigen::VectorXd::Constant(1, h * n), h / 2).mass,
                1.0, 1e-14);
  }
}

TEST(Scarring, WeylCountForTorus) {
  const double h = 0.001;
  std::vector<double> eigs;
  for (int n = -3000; n <= 3000; ++n) eigs.push_back(h * n);
  auto w = weyl_check(eigs, 0.5, 1.5, 2 * std::numbers::pi * 1.0, h, 1);
  EXPECT_NEAR(w.expected, 1000.0, 1e-9);
  EXPECT_LE(std::abs(w.counted - 1000), 1);
  EXPECT_LT(w.rel_error, 2e-3);
}

TEST(Scarring, EpsSweepAndGoodSet) {
  K0Fn K = [](const Eigen::VectorXd& I, double e) { return I[0] + e * I[0] * I[0]; };
  auto D = ApproximationFunction::power_log(2.0, 2.0, 0.0);
  std::vector<std::vector<int>> ms;
  for (int m = 10; m < 20; ++m) ms.push_back({m});
  auto sw = eps_sweep(K, ms, {0}, 0.05, 1.5, {0.0, 0.01, 0.02}, 1.0, D);
  ASSERT_EQ(sw.overlaps.size(), 3u);
  EXPECT_EQ(sw.overlaps[0], 0);
  EXPECT_GE(sw.fraction, 0.0);
  EXPECT_LE(sw.fraction, 1.0);
  EXPECT_GT(sw.scale, 0.0);
  auto gs = good_set_proxy(K, {0}, Eigen::VectorXd::Constant(1, 0.5), Eigen::VectorXd::Constant(1, 1.0),
                           {0.05, 0.02}, 1.5, {0.0, 0.01, 0.05});
  EXPECT_EQ(gs.good.size(), 3u);
  EXPECT_TRUE(gs.pass);
}
