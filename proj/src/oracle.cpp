#include "kamq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <random>

#include "kamq/errors.hpp"
#include "kamq/parallel.hpp"

namespace kamq {

using cplx = std::complex<double>;

namespace {

struct Shift {
  int delta;
  cplx coef;
};

// Weyl quantization of u^a p^b on one Hermite level m, a + b <= 2, u = sqrt(h/2)(A + A*).
std::vector<Shift> weyl_single(int a, int b, int m, double h) {
  const double s = std::sqrt(h / 2.0);
  const double up1 = std::sqrt(m + 1.0), dn1 = std::sqrt(static_cast<double>(m));
  const double up2 = std::sqrt((m + 1.0) * (m + 2.0)), dn2 = std::sqrt(m * (m - 1.0));
  const cplx I(0.0, 1.0);
  if (a == 0 && b == 0) return {{0, 1.0}};
  if (a == 1 && b == 0) return {{-1, s * dn1}, {1, s * up1}};
  if (a == 0 && b == 1) return {{1, I * s * up1}, {-1, -I * s * dn1}};
  const double hh = h / 2.0;
  if (a == 2 && b == 0) return {{-2, hh * dn2}, {0, hh * (2.0 * m + 1.0)}, {2, hh * up2}};
  if (a == 0 && b == 2) return {{-2, -hh * dn2}, {0, hh * (2.0 * m + 1.0)}, {2, -hh * up2}};
  if (a == 1 && b == 1) return {{2, I * hh * up2}, {-2, -I * hh * dn2}};
  throw ConfigError("oscillator monomial of degree above 2");
}

struct Monomial {
  cplx coef;
  std::vector<int> zpow;  // 2 d0, or empty
};

struct Term {
  std::vector<int> k;  // torus shift, empty for diagonal
  cplx coef;           // multiplies the shifted plane wave
  Monomial mono;
};

std::vector<Monomial> quadratic_monomials(const Eigen::MatrixXd& S, int d0, double scale) {
  std::vector<Monomial> out;
  if (S.size() == 0 || scale == 0.0) return out;
  if (S.rows() != 2 * d0 || S.cols() != 2 * d0) throw ConfigError("oscillator matrix must be 2 d0 x 2 d0");
  for (int a = 0; a < 2 * d0; ++a) {
    for (int b = a; b < 2 * d0; ++b) {
      const double c = a == b ? 0.5 * S(a, a) : 0.5 * (S(a, b) + S(b, a));
      if (c == 0.0) continue;
      std::vector<int> z(2 * d0, 0);
      ++z[a];
      ++z[b];
      out.push_back({scale * c, z});
    }
  }
  return out;
}

}  // namespace

std::size_t OracleBasis::torus_size() const {
  std::size_t n = 1;
  for (int i = 0; i < d; ++i) n *= static_cast<std::size_t>(2 * Nt + 1);
  return n;
}

std::size_t OracleBasis::osc_size() const {
  std::size_t n = 1;
  for (int i = 0; i < d0; ++i) n *= static_cast<std::size_t>(Nh);
  return n;
}

std::vector<int> OracleBasis::torus_mode(std::size_t idx) const {
  std::size_t t = idx / osc_size();
  std::vector<int> n(d);
  for (int i = 0; i < d; ++i) {
    n[i] = static_cast<int>(t % (2 * Nt + 1)) - Nt;
    t /= (2 * Nt + 1);
  }
  return n;
}

std::vector<int> OracleBasis::hermite_levels(std::size_t idx) const {
  std::size_t o = idx % osc_size();
  std::vector<int> m(d0);
  for (int j = 0; j < d0; ++j) {
    m[j] = static_cast<int>(o % Nh);
    o /= Nh;
  }
  return m;
}

long long OracleBasis::index(const std::vector<int>& n, const std::vector<int>& m) const {
  long long t = 0, stride = 1;
  for (int i = 0; i < d; ++i) {
    if (std::abs(n[i]) > Nt) return -1;
    t += (n[i] + Nt) * stride;
    stride *= 2 * Nt + 1;
  }
  long long o = 0;
  stride = 1;
  for (int j = 0; j < d0; ++j) {
    if (m[j] < 0 || m[j] >= Nh) return -1;
    o += m[j] * stride;
    stride *= Nh;
  }
  return t * static_cast<long long>(osc_size()) + o;
}

ModelOperator build_operator(const SymbolSpec& spec, double h, double epsilon, int Nt, int Nh) {
  if (!(h > 0.0)) throw ConfigError("build_operator: h must be positive");
  if (spec.d < 1 || spec.d0 < 0) throw ConfigError("build_operator: bad dimensions");
  if (Nt < 0 || Nh < 1) throw ConfigError("build_operator: need Nt >= 0 and Nh >= 1");
  const int d = spec.d, d0 = spec.d0;

  ModelOperator op;
  op.basis = OracleBasis{d, d0, Nt, Nh};
  op.h = h;
  op.epsilon = epsilon;
  op.provenance = spec.provenance;

  for (const auto& t : spec.h0)
    if (static_cast<int>(t.powers.size()) != d) throw ConfigError("torus term has wrong length");

  std::vector<Term> terms;
  for (const auto& m : quadratic_monomials(spec.S0, d0, 1.0)) terms.push_back({{}, 1.0, m});
  for (const auto& m : quadratic_monomials(spec.S, d0, epsilon)) terms.push_back({{}, 1.0, m});
  for (const auto& c : spec.couplings) {
    if (static_cast<int>(c.k.size()) != d) throw ConfigError("coupling wave vector has wrong length");
    if (!c.zpow.empty()) {
      if (static_cast<int>(c.zpow.size()) != 2 * d0) throw ConfigError("coupling z powers have wrong length");
      int tot = 0;
      for (int v : c.zpow) {
        if (v < 0) throw ConfigError("negative z power");
        tot += v;
      }
      if (tot > 2) throw ConfigError("coupling z degree above 2");
    }
    for (int ki : c.k)
      if (std::abs(ki) > Nt)
        throw CoverageError("coupling mode |k_i| = " + std::to_string(std::abs(ki)) + " exceeds Nt = " +
                            std::to_string(Nt));
    const cplx a = epsilon * c.amp;
    if (a == 0.0) continue;
    Monomial mono{1.0, c.zpow};
    std::vector<int> mk(d);
    for (int i = 0; i < d; ++i) mk[i] = -c.k[i];
    const bool zero = std::all_of(c.k.begin(), c.k.end(), [](int v) { return v == 0; });
    if (zero) {
      if (!c.sine) terms.push_back({{}, a, mono});
      continue;
    }
    // cos = (e+ + e-)/2, sin = (e+ - e-)/(2i).
    if (c.sine) {
      terms.push_back({c.k, a / cplx(0.0, 2.0), mono});
      terms.push_back({mk, -a / cplx(0.0, 2.0), mono});
    } else {
      terms.push_back({c.k, a / 2.0, mono});
      terms.push_back({mk, a / 2.0, mono});
    }
  }

  const OracleBasis& B = op.basis;
  const std::size_t N = B.size();
  op.matrix = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));

  parallel_for(N, [&](std::size_t col) {
    const std::vector<int> n = B.torus_mode(col);
    const std::vector<int> m = B.hermite_levels(col);
    auto C = op.matrix.col(static_cast<Eigen::Index>(col));
    double diag = 0.0;
    for (const auto& t : spec.h0) {
      double v = t.coef;
      for (int i = 0; i < d; ++i) v *= std::pow(h * n[i], t.powers[i]);
      diag += v;
    }
    C[static_cast<Eigen::Index>(col)] += diag;

    for (const auto& t : terms) {
      std::vector<int> nt = n;
      if (!t.k.empty())
        for (int i = 0; i < d; ++i) nt[i] += t.k[i];
      // Tensor product of per-dof shifts.
      std::vector<std::pair<std::vector<int>, cplx>> states{{m, t.coef * t.mono.coef}};
      if (!t.mono.zpow.empty()) {
        for (int j = 0; j < d0; ++j) {
          const int a = t.mono.zpow[j], b = t.mono.zpow[d0 + j];
          if (a == 0 && b == 0) continue;
          std::vector<std::pair<std::vector<int>, cplx>> next;
          for (const auto& [st, cf] : states) {
            for (const auto& s : weyl_single(a, b, st[j], h)) {
              if (s.coef == 0.0) continue;
              auto ns = st;
              ns[j] += s.delta;
              next.push_back({ns, cf * s.coef});
            }
          }
          states.swap(next);
        }
      }
      for (const auto& [st, cf] : states) {
        const long long row = B.index(nt, st);
        if (row >= 0) C[row] += cf;
      }
    }
  });

  const double scale = std::max(1.0, op.matrix.cwiseAbs().maxCoeff());
  if ((op.matrix - op.matrix.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvariantError("assembled operator is not Hermitian");
  op.real = op.matrix.imag().cwiseAbs().maxCoeff() == 0.0;
  return op;
}

Diagonalization diagonalize(const ModelOperator& op, bool vectors, std::size_t cap, std::uint64_t seed) {
  const std::size_t N = static_cast<std::size_t>(op.matrix.rows());
  if (N > cap)
    throw CoverageError("oracle dimension " + std::to_string(N) + " exceeds cap " + std::to_string(cap));
  Diagonalization out;
  if (N == 0) return out;
  const auto mode = vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly;
  if (op.real) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op.matrix.real(), mode);
    if (es.info() != Eigen::Success) throw InvariantError("eigensolver failed");
    out.values = es.eigenvalues();
    if (vectors) out.vectors = es.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(op.matrix, mode);
    if (es.info() != Eigen::Success) throw InvariantError("eigensolver failed");
    out.values = es.eigenvalues();
    if (vectors) out.vectors = es.eigenvectors();
  }
  if (!vectors) return out;

  out.labels.resize(N);
  for (std::size_t c = 0; c < N; ++c) {
    Eigen::Index best = 0;
    const double w = out.vectors.col(static_cast<Eigen::Index>(c)).cwiseAbs2().maxCoeff(&best);
    out.labels[c] = {op.basis.torus_mode(static_cast<std::size_t>(best)),
                     op.basis.hermite_levels(static_cast<std::size_t>(best)), w};
  }

  const double norm = std::max(out.values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, N - 1);
  for (int t = 0; t < 10; ++t) {
    const auto c = static_cast<Eigen::Index>(pick(rng));
    const Eigen::VectorXcd v = out.vectors.col(c);
    const double r = (op.matrix * v - out.values[c] * v).norm() / norm;
    out.max_residual = std::max(out.max_residual, r);
  }
  if (out.max_residual > 1e-10) throw InvariantError("eigenpair residual above tolerance");
  return out;
}

std::vector<Cluster> cluster_by_gap(std::vector<double> values, double threshold) {
  std::sort(values.begin(), values.end());
  std::vector<Cluster> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i == 0 || values[i] - values[i - 1] > threshold) out.emplace_back();
    out.back().members.push_back(values[i]);
  }
  for (auto& c : out) {
    double s = 0.0;
    for (double v : c.members) s += v;
    c.center = s / static_cast<double>(c.members.size());
    c.width = c.members.back() - c.members.front();
  }
  return out;
}

ClusterReport match_spectrum(const std::vector<double>& eigs, const std::vector<double>& predicted,
                             double threshold) {
  if (!(threshold >= 0.0)) throw ConfigError("match_spectrum: negative threshold");
  ClusterReport r;
  r.clusters = cluster_by_gap(eigs, threshold);
  r.predicted = cluster_by_gap(predicted, threshold);
  struct Cand {
    double dist;
    int i, j;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < static_cast<int>(r.clusters.size()); ++i)
    for (int j = 0; j < static_cast<int>(r.predicted.size()); ++j)
      cands.push_back({std::abs(r.clusters[i].center - r.predicted[j].center), i, j});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.dist < b.dist; });
  std::vector<char> used_o(r.clusters.size(), 0), used_p(r.predicted.size(), 0);
  for (const auto& c : cands) {
    if (used_o[c.i] || used_p[c.j]) continue;
    used_o[c.i] = used_p[c.j] = 1;
    r.matched.emplace_back(c.i, c.j);
  }
  std::sort(r.matched.begin(), r.matched.end());
  for (auto [i, j] : r.matched) {
    const auto& o = r.clusters[i];
    const auto& p = r.predicted[j];
    r.max_center_error = std::max(r.max_center_error, std::abs(o.center - p.center));
    r.max_width_error = std::max(r.max_width_error, std::abs(o.width - p.width));
    if (o.members.size() != p.members.size()) r.count_mismatch = true;
  }
  if (r.matched.size() != r.predicted.size() || r.matched.size() != r.clusters.size()) r.count_mismatch = true;
  return r;
}

ClusterReport match_spectrum(const std::vector<double>& eigs, const SpectrumPrediction& prediction,
                             double gap_factor) {
  double scale = 0.0;
  if (prediction.scaling == ResonantScaling::OscillatorStandard && prediction.nu.size() > 0)
    scale = prediction.h * prediction.nu.minCoeff();
  else if (prediction.lambdas.size() > 0)
    scale = 0.5 * std::abs(prediction.epsilon) *
            std::min(prediction.lambdas.cwiseAbs().minCoeff(), prediction.lambdas_tilde.cwiseAbs().minCoeff());
  if (!(scale > 0.0)) throw ConfigError("match_spectrum: prediction has no resonant spacing; pass a threshold");
  std::vector<double> pe;
  pe.reserve(prediction.entries.size());
  for (const auto& e : prediction.entries) pe.push_back(e.E);
  return match_spectrum(eigs, pe, gap_factor * scale);
}

std::vector<ComparisonRow> compare_labeled(const SpectrumPrediction& pred, const Diagonalization& diag,
                                           const OracleBasis& basis, int margin, double keep_fraction) {
  if (diag.labels.empty()) throw ConfigError("compare_labeled: eigenvectors were not computed");
  std::map<std::pair<std::vector<int>, std::vector<int>>, const SpectrumEntry*> by_label;
  for (const auto& e : pred.entries) {
    if (std::any_of(e.qn.n_v.begin(), e.qn.n_v.end(), [](int v) { return v != 0; })) continue;
    by_label.emplace(std::make_pair(e.qn.n_y, e.qn.n_u), &e);
  }
  const double hcut = keep_fraction * basis.Nh;
  std::vector<ComparisonRow> rows;
  for (std::size_t c = 0; c < diag.labels.size(); ++c) {
    const auto& L = diag.labels[c];
    bool interior = true;
    for (int v : L.torus) interior = interior && std::abs(v) <= basis.Nt - margin;
    for (int v : L.hermite) interior = interior && v < hcut;
    if (!interior) continue;
    auto it = by_label.find({L.torus, L.hermite});
    if (it == by_label.end()) continue;
    const double Eo = diag.values[static_cast<Eigen::Index>(c)];
    rows.push_back({it->second->E, Eo, std::abs(it->second->E - Eo), it->second->cluster_id});
  }
  std::sort(rows.begin(), rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return a.E_pred < b.E_pred || (a.E_pred == b.E_pred && a.E_oracle < b.E_oracle);
  });
  return rows;
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::string s = "E_pred,E_oracle,abs_diff,cluster_id\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d\n", r.E_pred, r.E_oracle, r.abs_diff, r.cluster_id);
    s += buf;
  }
  return s;
}

}  // namespace kamq
