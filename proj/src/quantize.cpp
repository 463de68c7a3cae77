#include "kamq/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "kamq/errors.hpp"

namespace kamq {

namespace {

// Odometer over [0, hi]^n; returns false after the last tuple.
bool next_tuple(std::vector<int>& v, int hi) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (++v[i] <= hi) return true;
    v[i] = 0;
  }
  return false;
}

Eigen::VectorXd sym_eigenvalues(const Eigen::MatrixXd& A) {
  if (A.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

// eig(U V) for symmetric U, V with one of them positive definite.
std::optional<Eigen::VectorXd> product_eigenvalues(const Eigen::MatrixXd& U, const Eigen::MatrixXd& V) {
  if (U.rows() == 0) return Eigen::VectorXd();
  Eigen::LLT<Eigen::MatrixXd> lu(U);
  if (lu.info() == Eigen::Success) {
    const Eigen::MatrixXd L = lu.matrixL();
    return sym_eigenvalues(L.transpose() * V * L);
  }
  Eigen::LLT<Eigen::MatrixXd> lv(V);
  if (lv.info() == Eigen::Success) {
    const Eigen::MatrixXd L = lv.matrixL();
    return sym_eigenvalues(L.transpose() * U * L);
  }
  Eigen::LLT<Eigen::MatrixXd> lun(-U);
  if (lun.info() == Eigen::Success) {
    const Eigen::MatrixXd L = lun.matrixL();
    return Eigen::VectorXd(-sym_eigenvalues(L.transpose() * V * L));
  }
  return std::nullopt;
}

}  // namespace

ResonantScaling parse_scaling(const std::string& s) {
  if (s == "paper" || s == "paper_literal") return ResonantScaling::PaperLiteral;
  if (s == "oscillator" || s == "oscillator_standard") return ResonantScaling::OscillatorStandard;
  throw ConfigError("unknown resonant scaling '" + s + "'");
}

std::string to_string(ResonantScaling s) {
  return s == ResonantScaling::PaperLiteral ? "paper_literal" : "oscillator_standard";
}

double remainder_bound(double h, double epsilon, double alpha, const RemainderConstants& k) {
  if (!(alpha > 1.0)) throw ConfigError("remainder_bound: alpha must exceed 1");
  if (!(h > 0.0)) throw ConfigError("remainder_bound: h must be positive");
  if (epsilon == 0.0) return 0.0;
  return k.C * std::abs(epsilon) * std::exp(-k.c * std::pow(h, k.sign / (alpha - 1.0)));
}

SpectrumPrediction predict_spectrum(const NormalFormState& state, double h, const std::vector<int>& maslov,
                                    const PredictOptions& opt) {
  const PhaseGeometry& g = state.geometry;
  const int d = g.d, d0 = g.d0;
  if (!(h > 0.0)) throw ConfigError("predict_spectrum: h must be positive");
  std::vector<int> th = maslov.empty() ? std::vector<int>(d, 0) : maslov;
  if (static_cast<int>(th.size()) != d) throw ConfigError("predict_spectrum: Maslov vector length differs from d");
  const Eigen::MatrixXd& Mp = state.Mp;
  if (Mp.rows() != 2 * d0 || Mp.cols() != 2 * d0) throw ConfigError("predict_spectrum: M_p must be 2 d0 x 2 d0");
  const double mscale = Mp.size() ? std::max(1.0, Mp.cwiseAbs().maxCoeff()) : 1.0;
  if (Mp.size() && (Mp - Mp.transpose()).cwiseAbs().maxCoeff() > 1e-12 * mscale)
    throw ConfigError("predict_spectrum: M_p is not symmetric");

  SpectrumPrediction sp;
  sp.epsilon = state.epsilon;
  sp.h = h;
  sp.scaling = opt.scaling;
  sp.remainder_bound = remainder_bound(h, state.epsilon, opt.alpha, opt.remainder);
  const Eigen::MatrixXd U = Mp.topLeftCorner(d0, d0), V = Mp.bottomRightCorner(d0, d0);
  sp.lambdas = sym_eigenvalues(U);
  sp.lambdas_tilde = sym_eigenvalues(V);
  if (opt.scaling == ResonantScaling::OscillatorStandard && d0 > 0) {
    auto ev = product_eigenvalues(U, V);
    if (!ev) throw ConfigError("predict_spectrum: U and V are both indefinite");
    if (ev->minCoeff() <= 0.0) throw ConfigError("predict_spectrum: resonant block is not elliptic");
    sp.nu = std::abs(state.epsilon) * ev->cwiseSqrt();
  }

  const bool osc = opt.scaling == ResonantScaling::OscillatorStandard;
  std::vector<int> ny(d, 0);
  int cluster = 0;
  do {
    double Ey = state.e;
    Eigen::VectorXd I(d);
    for (int j = 0; j < d; ++j) {
      I[j] = h * (ny[j] + th[j] / 4.0);
      Ey += state.omega[j] * I[j];
    }
    if (opt.include_action_remainder && !state.Rterms.empty()) {
      std::vector<double> x(d, 0.0), y(I.data(), I.data() + d), z(g.nz(), 0.0);
      Ey += evaluate(state.Rterms, x, y, z).real();
    }
    std::vector<int> nu(d0, 0);
    do {
      std::vector<int> nv(d0, 0);
      do {
        double Er = 0.0;
        if (osc) {
          for (int j = 0; j < d0; ++j) Er += h * sp.nu[j] * (nu[j] + 0.5);
        } else {
          for (int j = 0; j < d0; ++j)
            Er += sp.lambdas[j] * (nu[j] + 0.5) + sp.lambdas_tilde[j] * (nv[j] + 0.5);
          Er *= 0.5 * state.epsilon;
        }
        const double E = Ey + Er;
        if ((!opt.E_lo || E >= *opt.E_lo) && (!opt.E_hi || E <= *opt.E_hi))
          sp.entries.push_back({QuantumNumbers{ny, nu, nv, th}, E, cluster});
      } while (!osc && next_tuple(nv, opt.nres_max));
    } while (next_tuple(nu, opt.nres_max));
    ++cluster;
  } while (next_tuple(ny, opt.ny_max));

  std::stable_sort(sp.entries.begin(), sp.entries.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
    return a.E < b.E || (a.E == b.E && a.qn < b.qn);
  });
  return sp;
}

int optimal_n_bruteforce(double C, double delta, double alpha, int nmax) {
  if (!(C > 0.0 && delta > 0.0 && alpha > 1.0)) throw ConfigError("optimal_n_bruteforce: bad parameters");
  int best = 0;
  double bv = std::numeric_limits<double>::infinity();
  for (int n = 0; n <= nmax; ++n) {
    const double f = (n + 1) * std::log(C) + (alpha - 1.0) * std::lgamma(n + 1.0) + n * std::log(delta);
    if (f < bv) {
      bv = f;
      best = n;
    }
  }
  return best;
}

double optimal_n_stirling(double C, double delta, double alpha) {
  if (!(C > 0.0 && delta > 0.0 && alpha > 1.0)) throw ConfigError("optimal_n_stirling: bad parameters");
  return std::pow(C * delta, -1.0 / (alpha - 1.0));
}

ActionIndexSet action_index_set(const std::vector<Eigen::VectorXd>& Egamma, double h, double L,
                                const std::vector<int>& maslov) {
  ActionIndexSet out;
  if (Egamma.empty()) {
    out.empty_input = true;
    return out;
  }
  if (!(h > 0.0) || L < 0.0) throw ConfigError("action_index_set: need h > 0 and L >= 0");
  const int d = static_cast<int>(Egamma.front().size());
  std::vector<int> th = maslov.empty() ? std::vector<int>(d, 0) : maslov;
  if (static_cast<int>(th.size()) != d) throw ConfigError("action_index_set: Maslov length differs from d");
  std::vector<long long> lo(d), hi(d);
  for (int i = 0; i < d; ++i) {
    double a = Egamma.front()[i], b = a;
    for (const auto& e : Egamma) {
      a = std::min(a, e[i]);
      b = std::max(b, e[i]);
    }
    lo[i] = static_cast<long long>(std::floor((a - L * h) / h - th[i] / 4.0)) - 1;
    hi[i] = static_cast<long long>(std::ceil((b + L * h) / h - th[i] / 4.0)) + 1;
  }
  std::vector<long long> m(lo);
  const double r2 = (L * h) * (L * h);
  for (;;) {
    Eigen::VectorXd I(d);
    for (int i = 0; i < d; ++i) I[i] = h * (m[i] + th[i] / 4.0);
    for (const auto& e : Egamma) {
      if ((e - I).squaredNorm() <= r2 * (1.0 + 1e-14)) {
        out.m.emplace_back(m.begin(), m.end());
        break;
      }
    }
    int i = 0;
    while (i < d && ++m[i] > hi[i]) {
      m[i] = lo[i];
      ++i;
    }
    if (i == d) break;
  }
  return out;
}

std::string spectrum_to_csv(const SpectrumPrediction& sp) {
  std::string s;
  if (!sp.entries.empty()) {
    const auto& q = sp.entries.front().qn;
    for (std::size_t i = 0; i < q.n_y.size(); ++i) s += "n_y" + std::to_string(i + 1) + ",";
    for (std::size_t i = 0; i < q.n_u.size(); ++i) s += "n_u" + std::to_string(i + 1) + ",";
    for (std::size_t i = 0; i < q.n_v.size(); ++i) s += "n_v" + std::to_string(i + 1) + ",";
  }
  s += "E,cluster_id,remainder_bound\n";
  char buf[128];
  for (const auto& e : sp.entries) {
    for (int v : e.qn.n_y) s += std::to_string(v) + ",";
    for (int v : e.qn.n_u) s += std::to_string(v) + ",";
    for (int v : e.qn.n_v) s += std::to_string(v) + ",";
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g\n", e.E, e.cluster_id, sp.remainder_bound);
    s += buf;
  }
  return s;
}

}  // namespace kamq
