#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kamq/errors.hpp"
#include "kamq/oracle.hpp"

using namespace kamq;

namespace {

SymbolSpec torus_spec(std::vector<TorusTerm> h0) {
  SymbolSpec s;
  s.d = 1;
  s.h0 = std::move(h0);
  return s;
}

std::vector<double> sorted(const Eigen::VectorXd& v) {
  std::vector<double> out(v.data(), v.data() + v.size());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

TEST(Oracle, BasisIndexing) {
  OracleBasis b{2, 1, 2, 3};
  EXPECT_EQ(b.torus_size(), 25u);
  EXPECT_EQ(b.osc_size(), 3u);
  EXPECT_EQ(b.size(), 75u);
  for (std::size_t i = 0; i < b.size(); ++i)
    EXPECT_EQ(b.index(b.torus_mode(i), b.hermite_levels(i)), static_cast<long long>(i));
  EXPECT_EQ(b.index({3, 0}, {0}), -1);
  EXPECT_EQ(b.index({0, 0}, {3}), -1);
}

TEST(Oracle, TorusOperatorIsDiagonal) {
  const double w = 0.7, h = 0.05;
  auto op = build_operator(torus_spec({{w, {1}}}), h, 0.0, 6, 1);
  ASSERT_EQ(op.matrix.rows(), 13);
  EXPECT_EQ((op.matrix - Eigen::MatrixXcd(op.matrix.diagonal().asDiagonal())).norm(), 0.0);
  auto dg = diagonalize(op, true);
  for (int i = 0; i < 13; ++i) EXPECT_NEAR(dg.values[i], w * h * (i - 6), 1e-15);
  for (std::size_t i = 0; i < dg.labels.size(); ++i) {
    EXPECT_NEAR(dg.values[static_cast<Eigen::Index>(i)], w * h * dg.labels[i].torus[0], 1e-15);
    EXPECT_NEAR(dg.labels[i].weight, 1.0, 1e-12);
  }
}

TEST(Oracle, OscillatorLadder) {
  SymbolSpec s;
  s.d = 1;
  s.d0 = 1;
  s.S0 = Eigen::Matrix2d::Identity();
  const double h = 0.03;
  auto op = build_operator(s, h, 0.0, 0, 30);
  auto dg = diagonalize(op, true);
  for (int m = 0; m < 30; ++m) EXPECT_NEAR(dg.values[m], h * (m + 0.5), 1e-12);
  for (std::size_t i = 0; i < dg.labels.size(); ++i)
    EXPECT_EQ(dg.labels[i].hermite[0], static_cast<int>(i));
}

// Second order perturbation theory for (hD)^2/2 + eps cos x with h = 1:
// E_n = n^2/2 + eps^2 / (4 n^2 - 1); n = +-1 couple through n = 0 with eps^2 / 2.
TEST(Oracle, CosinePerturbationTheory) {
  SymbolSpec s = torus_spec({{0.5, {2}}});
  s.couplings.push_back({1.0, {1}, false, {}});
  const double eps = 0.01;
  auto dg = diagonalize(build_operator(s, 1.0, eps, 12, 1));
  auto pt = [&](int n) { return 0.5 * n * n + eps * eps / (4.0 * n * n - 1.0); };
  std::vector<double> expect;
  for (int n = -12; n <= 12; ++n)
    if (std::abs(n) != 1) expect.push_back(pt(n));
  expect.push_back(pt(1) - eps * eps / 2);
  expect.push_back(pt(1) + eps * eps / 2);
  std::sort(expect.begin(), expect.end());
  // Edge modes feel the cutoff.
  for (int i = 0; i < 15; ++i) EXPECT_NEAR(dg.values[i], expect[i], 1e-7) << i;
}

TEST(Oracle, TwoLevelExample) {
  // Torus modes -1, 0, 1 with H0 = hn and a sin x coupling; the operator stays Hermitian.
  SymbolSpec s = torus_spec({{1.0, {1}}});
  s.couplings.push_back({1.0, {1}, true, {}});
  auto op = build_operator(s, 1.0, 0.2, 1, 1);
  EXPECT_FALSE(op.real);
  EXPECT_LT((op.matrix - op.matrix.adjoint()).norm(), 1e-15);
  EXPECT_NEAR(std::abs(op.matrix(1, 0)), 0.1, 1e-15);
  // Independent 3x3 eigen solve.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op.matrix);
  auto dg = diagonalize(op);
  EXPECT_LT((dg.values - es.eigenvalues()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Oracle, TraceInvariance) {
  SymbolSpec s;
  s.d = 1;
  s.d0 = 1;
  s.h0 = {{1.0, {1}}};
  s.S0 = Eigen::Matrix2d::Identity();
  s.S = Eigen::Matrix2d{{1.0, 0.3}, {0.3, 2.0}};
  s.couplings.push_back({0.5, {1}, false, {2, 0}});
  s.couplings.push_back({0.2, {2}, true, {1, 0}});
  auto op = build_operator(s, 0.1, 0.05, 4, 8);
  auto dg = diagonalize(op);
  EXPECT_NEAR(dg.values.sum(), op.matrix.trace().real(), 1e-11);
  EXPECT_LE(dg.max_residual, 1e-10);
}

// Op(u p) equals (UP + PU)/2 away from the top Hermite level.
TEST(Oracle, WeylSymmetrization) {
  const int Nh = 12;
  const double h = 0.2;
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(Nh, Nh);
  for (int m = 1; m < Nh; ++m) a(m - 1, m) = std::sqrt(double(m));
  const Eigen::MatrixXcd ad = a.adjoint();
  const Eigen::MatrixXcd U = std::sqrt(h / 2) * (a + ad);
  const Eigen::MatrixXcd P = cplx(0.0, std::sqrt(h / 2)) * (ad - a);
  const Eigen::MatrixXcd sym = 0.5 * (U * P + P * U);

  SymbolSpec s;
  s.d = 1;
  s.d0 = 1;
  s.couplings.push_back({1.0, {0}, false, {1, 1}});
  auto op = build_operator(s, h, 1.0, 0, Nh);
  const int n = Nh - 1;
  EXPECT_LT((op.matrix.topLeftCorner(n, n) - sym.topLeftCorner(n, n)).norm(), 1e-14);

  SymbolSpec q;
  q.d = 1;
  q.d0 = 1;
  q.S = Eigen::Matrix2d{{0.0, 1.0}, {1.0, 0.0}};
  auto opq = build_operator(q, h, 1.0, 0, Nh);
  EXPECT_LT((opq.matrix - op.matrix).norm(), 1e-14);

  const Eigen::MatrixXcd UU = U * U, PP = P * P;
  SymbolSpec uu;
  uu.d = 1;
  uu.d0 = 1;
  uu.S = Eigen::Matrix2d{{2.0, 0.0}, {0.0, 0.0}};
  auto opu = build_operator(uu, h, 1.0, 0, Nh);
  EXPECT_LT((opu.matrix.topLeftCorner(n, n) - UU.topLeftCorner(n, n)).norm(), 1e-14);
  uu.S = Eigen::Matrix2d{{0.0, 0.0}, {0.0, 2.0}};
  auto opp = build_operator(uu, h, 1.0, 0, Nh);
  EXPECT_LT((opp.matrix.topLeftCorner(n, n) - PP.topLeftCorner(n, n)).norm(), 1e-14);
}

TEST(Oracle, CoverageErrors) {
  SymbolSpec s = torus_spec({{1.0, {1}}});
  s.couplings.push_back({1.0, {5}, false, {}});
  EXPECT_THROW(build_operator(s, 0.1, 0.1, 4, 1), CoverageError);
  auto op = build_operator(torus_spec({{1.0, {1}}}), 0.1, 0.0, 30, 1);
  EXPECT_THROW(diagonalize(op, false, 32), CoverageError);
}

TEST(Oracle, MatchSpectrumExact) {
  std::vector<double> e{0.0, 0.01, 1.0, 1.01, 1.02, 2.0};
  auto r = match_spectrum(e, e, 0.1);
  EXPECT_EQ(r.clusters.size(), 3u);
  EXPECT_EQ(r.max_center_error, 0.0);
  EXPECT_EQ(r.max_width_error, 0.0);
  EXPECT_FALSE(r.count_mismatch);
}

TEST(Oracle, MatchSpectrumUniformShift) {
  std::vector<double> e{0.0, 0.01, 1.0, 1.01, 1.02, 2.0}, p;
  for (double v : e) p.push_back(v + 0.003);
  auto r = match_spectrum(e, p, 0.1);
  EXPECT_NEAR(r.max_center_error, 0.003, 1e-15);
  EXPECT_NEAR(r.max_width_error, 0.0, 1e-15);
  p.pop_back();
  EXPECT_TRUE(match_spectrum(e, p, 0.1).count_mismatch);
}

TEST(Oracle, ClusterByGap) {
  auto c = cluster_by_gap({3.0, 1.0, 1.05, 2.9}, 0.2);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0].width, 0.05, 1e-15);
  EXPECT_NEAR(c[1].center, 2.95, 1e-15);
}

// At eps = 0 the torus prediction and the oracle agree to rounding.
TEST(Oracle, CompareLabeledAtZeroEpsilon) {
  const double h = 0.05;
  auto op = build_operator(torus_spec({{1.0, {1}}}), h, 0.0, 8, 1);
  auto dg = diagonalize(op, true);
  PhaseGeometry g{1, 0};
  auto st = make_state(g, 0.0, 0.0, Eigen::VectorXd::Ones(1), Eigen::MatrixXd(0, 0), Series(g, 0, 2),
                       Series(g, 0, 2));
  PredictOptions po;
  po.ny_max = 8;
  auto sp = predict_spectrum(st, h, {0}, po);
  auto rows = compare_labeled(sp, dg, op.basis, 2);
  EXPECT_EQ(rows.size(), 7u);
  for (const auto& r : rows) EXPECT_LT(r.abs_diff, 1e-12);
  const std::string csv = comparison_to_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "E_pred,E_oracle,abs_diff,cluster_id");
}

TEST(Oracle, MatchFromPredictionNeedsSpacing) {
  PhaseGeometry g{1, 0};
  auto st = make_state(g, 0.0, 0.0, Eigen::VectorXd::Ones(1), Eigen::MatrixXd(0, 0), Series(g, 0, 2),
                       Series(g, 0, 2));
  auto sp = predict_spectrum(st, 0.1, {0}, {});
  EXPECT_THROW(match_spectrum({0.0}, sp, 0.5), ConfigError);
}

TEST(Oracle, EigenvaluesSortedAndReal) {
  SymbolSpec s = torus_spec({{0.5, {2}}});
  s.couplings.push_back({1.0, {1}, false, {}});
  s.couplings.push_back({0.3, {2}, true, {}});
  auto dg = diagonalize(build_operator(s, 0.2, 0.5, 10, 1), true);
  auto v = sorted(dg.values);
  for (int i = 0; i < dg.values.size(); ++i) EXPECT_EQ(dg.values[i], v[static_cast<std::size_t>(i)]);
  EXPECT_LE(dg.max_residual, 1e-10);
}
