#include "kamq/scarring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kamq/errors.hpp"
#include "kamq/parallel.hpp"

namespace kamq {

namespace {

double binom(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// j-th eps-derivative by a central difference of order j.
double eps_derivative(const K0Fn& K0, const Eigen::VectorXd& I, double eps, int j) {
  if (j == 0) return K0(I, eps);
  const double s = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (j + 2)) * std::max(1.0, std::abs(eps));
  double acc = 0.0;
  for (int i = 0; i <= j; ++i) {
    const double sign = (i % 2) ? -1.0 : 1.0;
    acc += sign * binom(j, i) * K0(I, eps + (0.5 * j - i) * s);
  }
  return acc / std::pow(s, j);
}

Eigen::VectorXd eta(const K0Fn& K0, int d, const Eigen::VectorXd& I, double eps) {
  Eigen::VectorXd e(d);
  for (int j = 0; j < d; ++j) e[j] = eps_derivative(K0, I, eps, j);
  return e;
}

Eigen::MatrixXd eta_jacobian(const K0Fn& K0, int d, const Eigen::VectorXd& I, double eps) {
  Eigen::MatrixXd J(d, d);
  for (int c = 0; c < d; ++c) {
    const double s = 1e-5 * std::max(1.0, std::abs(I[c]));
    Eigen::VectorXd a = I, b = I;
    a[c] += s;
    b[c] -= s;
    J.col(c) = (eta(K0, d, a, eps) - eta(K0, d, b, eps)) / (2.0 * s);
  }
  return J;
}

// Number of pairs of windows of half-width hw that overlap.
int overlapping_pairs(std::vector<double> mu, double hw) {
  std::sort(mu.begin(), mu.end());
  int n = 0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    for (std::size_t j = i + 1; j < mu.size() && mu[j] - mu[i] <= 2.0 * hw; ++j) ++n;
  return n;
}

}  // namespace

K0Fn k0_from_state(const NormalFormState& state, bool oscillator_ground, double h) {
  const int d0 = state.geometry.d0;
  Eigen::VectorXd rates;
  if (oscillator_ground && d0 > 0) {
    const Eigen::MatrixXd U = state.Mp.topLeftCorner(d0, d0), V = state.Mp.bottomRightCorner(d0, d0);
    Eigen::EigenSolver<Eigen::MatrixXd> es(U * V, false);
    rates = es.eigenvalues().real().cwiseMax(0.0).cwiseSqrt();
  }
  return [state, rates, h](const Eigen::VectorXd& I, double eps) {
    double v = state.e0, pw = 1.0;
    Eigen::VectorXd w = state.omega0;
    for (std::size_t s = 0; s < state.epsN_coeffs.size(); ++s) {
      pw *= eps;
      v += state.epsN_coeffs[s] * pw;
      w += state.omega_coeffs[s] * pw;
    }
    v += w.dot(I);
    if (!state.Rterms.empty()) {
      const PhaseGeometry& g = state.geometry;
      std::vector<double> x(g.d, 0.0), y(I.data(), I.data() + I.size()), z(g.nz(), 0.0);
      v += evaluate(state.Rterms, x, y, z).real();
    }
    if (rates.size() > 0) v += 0.5 * h * std::abs(eps) * rates.sum();
    return v;
  };
}

QuasiEigenvalueTable build_quasi_table(const K0Fn& K0, double h, double epsilon, const std::vector<int>& maslov,
                                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  if (!(h > 0.0)) throw ConfigError("build_quasi_table: h must be positive");
  const int d = static_cast<int>(lo.size());
  if (hi.size() != d) throw ConfigError("build_quasi_table: box bounds differ in length");
  std::vector<int> th = maslov.empty() ? std::vector<int>(d, 0) : maslov;
  if (static_cast<int>(th.size()) != d) throw ConfigError("build_quasi_table: Maslov length differs from d");
  QuasiEigenvalueTable t;
  t.h = h;
  t.epsilon = epsilon;
  t.maslov = th;
  std::vector<long long> a(d), b(d);
  for (int i = 0; i < d; ++i) {
    a[i] = static_cast<long long>(std::ceil(lo[i] / h - th[i] / 4.0));
    b[i] = static_cast<long long>(std::floor(hi[i] / h - th[i] / 4.0));
    if (b[i] < a[i]) return t;
  }
  std::vector<long long> m(a);
  for (;;) {
    QuasiEntry e;
    e.m.assign(m.rbegin(), m.rend());
    e.I.resize(d);
    for (int i = 0; i < d; ++i) e.I[i] = h * (e.m[i] + th[i] / 4.0);
    e.mu = K0(e.I, epsilon);
    t.entries.push_back(std::move(e));
    // Last component fastest, so entries come out lexicographic in m.
    int i = 0;
    while (i < d && ++m[i] > b[d - 1 - i]) {
      m[i] = a[d - 1 - i];
      ++i;
    }
    if (i == d) break;
  }
  return t;
}

DiffeoReport local_diffeo_check(const K0Fn& K0, int d, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const std::vector<double>& eps_grid, int grid_n, int pairs, std::uint64_t seed) {
  if (d < 1 || lo.size() != d || hi.size() != d) throw ConfigError("local_diffeo_check: box must have d components");
  if (eps_grid.empty() || grid_n < 2) throw ConfigError("local_diffeo_check: empty grid");
  DiffeoReport r;
  r.min_singular = std::numeric_limits<double>::infinity();
  r.G1 = std::numeric_limits<double>::infinity();
  r.G2 = 0.0;
  for (double eps : eps_grid) {
    std::vector<int> idx(d, 0);
    for (;;) {
      Eigen::VectorXd I(d);
      for (int i = 0; i < d; ++i) I[i] = lo[i] + (hi[i] - lo[i]) * idx[i] / (grid_n - 1);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(eta_jacobian(K0, d, I, eps));
      const double sm = svd.singularValues().minCoeff();
      if (sm < r.min_singular) {
        r.min_singular = sm;
        r.argmin_I = I;
        r.argmin_eps = eps;
      }
      int i = 0;
      while (i < d && ++idx[i] == grid_n) {
        idx[i] = 0;
        ++i;
      }
      if (i == d) break;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (int p = 0; p < pairs; ++p) {
      Eigen::VectorXd a(d), b(d);
      for (int i = 0; i < d; ++i) {
        a[i] = lo[i] + (hi[i] - lo[i]) * U(rng);
        b[i] = lo[i] + (hi[i] - lo[i]) * U(rng);
      }
      const double dI = (a - b).norm();
      const double de = (eta(K0, d, a, eps) - eta(K0, d, b, eps)).norm();
      if (dI == 0.0 || de == 0.0) continue;
      r.G1 = std::min(r.G1, dI / de);
      r.G2 = std::max(r.G2, dI / de);
    }
  }
  r.ok = r.min_singular > 0.0 && std::isfinite(r.min_singular);
  return r;
}

SeparationReport separation_check(const QuasiEigenvalueTable& table, double C1, const ApproximationFunction& delta,
                                  std::optional<double> C2_required) {
  const double h = table.h;
  SeparationReport r;
  r.radius = h * delta.inverse(C1 / std::sqrt(h));
  r.C2 = std::numeric_limits<double>::infinity();
  const double h32 = std::pow(h, 1.5);
  const double need = C2_required ? *C2_required * h32 : 0.0;
  const auto& E = table.entries;
  for (std::size_t a = 0; a < E.size(); ++a) {
    for (std::size_t b = a + 1; b < E.size(); ++b) {
      const double dI = (E[a].I - E[b].I).norm();
      if (dI > r.radius * (1.0 + 1e-12)) continue;
      ++r.pairs_checked;
      const double dmu = std::abs(E[a].mu - E[b].mu);
      r.C2 = std::min(r.C2, dmu / h32);
      if (dmu <= need) r.violations.push_back({a, b, dI, dmu});
    }
  }
  return r;
}

CensusReport window_census(const QuasiEigenvalueTable& table, double delta_exp, const std::vector<double>& eigs,
                           double lambda, double R) {
  if (!(lambda > 1.0)) throw ConfigError("window_census: lambda must exceed 1");
  if (!(R > 0.0)) throw ConfigError("window_census: R must be positive");
  CensusReport c;
  c.bound = 1.0 - 2.0 / lambda;
  if (table.entries.empty()) {
    c.empty = true;
    return c;
  }
  const double hw = std::pow(table.h, delta_exp) / 3.0;
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < table.entries.size(); ++i) order.push_back({table.entries[i].mu, i});
  std::sort(order.begin(), order.end());
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i].first - order[i - 1].first <= 2.0 * hw)
      throw InvariantError("energy windows overlap near E = " + std::to_string(order[i].first));

  std::vector<double> ev(eigs);
  std::sort(ev.begin(), ev.end());
  c.windows.resize(table.entries.size());
  parallel_for(table.entries.size(), [&](std::size_t i) {
    const auto& e = table.entries[i];
    auto lo = std::lower_bound(ev.begin(), ev.end(), e.mu - hw);
    auto hi = std::upper_bound(ev.begin(), ev.end(), e.mu + hw);
    c.windows[i] = {e.m, e.mu, hw, static_cast<int>(hi - lo)};
  });
  for (std::size_t i = 0; i < c.windows.size(); ++i)
    if (c.windows[i].count < lambda * R) c.Mtilde.push_back(i);
  c.fraction = static_cast<double>(c.Mtilde.size()) / static_cast<double>(c.windows.size());
  c.pass = c.fraction >= c.bound;
  return c;
}

TorusMass mass_on_torus(const Eigen::VectorXcd& v, const OracleBasis& basis, double h, const Eigen::VectorXd& I,
                        double window) {
  TorusMass out;
  if (static_cast<std::size_t>(v.size()) != basis.size()) throw ConfigError("mass_on_torus: vector size differs");
  const double total = v.squaredNorm();
  const std::size_t osc = basis.osc_size();
  bool any = false;
  double m = 0.0;
  for (std::size_t t = 0; t < basis.torus_size(); ++t) {
    const auto n = basis.torus_mode(t * osc);
    double d2 = 0.0;
    for (int i = 0; i < basis.d; ++i) d2 += (h * n[i] - I[i]) * (h * n[i] - I[i]);
    if (std::sqrt(d2) > window) continue;
    any = true;
    m += v.segment(static_cast<Eigen::Index>(t * osc), static_cast<Eigen::Index>(osc)).squaredNorm();
  }
  out.empty_window = !any;
  out.mass = total > 0.0 ? m / total : 0.0;
  return out;
}

EpsSweep eps_sweep(const K0Fn& K0, const std::vector<std::vector<int>>& ms, const std::vector<int>& maslov,
                   double h, double delta_exp, const std::vector<double>& eps_grid, double C1,
                   const ApproximationFunction& delta) {
  EpsSweep s;
  s.eps = eps_grid;
  s.overlaps.assign(eps_grid.size(), 0);
  const double hw = std::pow(h, delta_exp) / 3.0;
  parallel_for(eps_grid.size(), [&](std::size_t i) {
    std::vector<double> mu;
    for (const auto& m : ms) {
      Eigen::VectorXd I(m.size());
      for (std::size_t j = 0; j < m.size(); ++j) I[j] = h * (m[j] + (maslov.empty() ? 0 : maslov[j]) / 4.0);
      mu.push_back(K0(I, eps_grid[i]));
    }
    s.overlaps[i] = overlapping_pairs(std::move(mu), hw);
  });
  int bad = 0;
  for (int o : s.overlaps) bad += o > 0;
  s.fraction = eps_grid.empty() ? 0.0 : static_cast<double>(bad) / static_cast<double>(eps_grid.size());
  s.scale = std::pow(h, delta_exp - 1.75) / delta.inverse(C1 / std::sqrt(h));
  return s;
}

GoodSetProxy good_set_proxy(const K0Fn& K0, const std::vector<int>& maslov, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, const std::vector<double>& hs, double delta_exp,
                            const std::vector<double>& eps_samples) {
  GoodSetProxy g;
  g.eps = eps_samples;
  g.good.assign(eps_samples.size(), 0);
  parallel_for(eps_samples.size(), [&](std::size_t i) {
    for (double h : hs) {
      const auto t = build_quasi_table(K0, h, eps_samples[i], maslov, lo, hi);
      std::vector<double> mu;
      for (const auto& e : t.entries) mu.push_back(e.mu);
      if (overlapping_pairs(std::move(mu), std::pow(h, delta_exp) / 3.0) == 0) {
        g.good[i] = 1;
        break;
      }
    }
  });
  int n = 0;
  for (char c : g.good) n += c;
  g.fraction = eps_samples.empty() ? 0.0 : static_cast<double>(n) / static_cast<double>(eps_samples.size());
  g.pass = g.fraction >= 0.9;
  return g;
}

WeylCount weyl_check(const std::vector<double>& eigs, double a, double b, double volume, double h, int d) {
  WeylCount w;
  for (double e : eigs) w.counted += (e >= a && e <= b);
  w.expected = volume / std::pow(2.0 * M_PI * h, d);
  w.rel_error = w.expected > 0.0 ? std::abs(w.counted - w.expected) / w.expected : 0.0;
  return w;
}

}  // namespace kamq
