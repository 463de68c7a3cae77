#include "kamq/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "kamq/errors.hpp"

namespace kamq {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

long long int_det(const IntMatrix& A) {
  if (A.rows() == 0) return 1;
  return std::llround(A.cast<double>().determinant());
}

// Row-reduces G (l x d0) by unimodular row operations to [B; 0]; returns diag(B) and U with U G = [B; 0].
std::vector<long long> hermite_rows(IntMatrix G, IntMatrix& U) {
  const int l = static_cast<int>(G.rows()), d0 = static_cast<int>(G.cols());
  U = IntMatrix::Identity(l, l);
  std::vector<long long> diag;
  for (int c = 0; c < d0; ++c) {
    for (;;) {
      int piv = -1;
      for (int r = c; r < l; ++r)
        if (G(r, c) != 0 && (piv < 0 || std::llabs(G(r, c)) < std::llabs(G(piv, c)))) piv = r;
      if (piv < 0) throw ConfigError("resonance generators are linearly dependent");
      G.row(c).swap(G.row(piv));
      U.row(c).swap(U.row(piv));
      bool clean = true;
      for (int r = c + 1; r < l; ++r) {
        if (G(r, c) == 0) continue;
        const long long q = G(r, c) / G(c, c);
        G.row(r) -= q * G.row(c);
        U.row(r) -= q * U.row(c);
        if (G(r, c) != 0) clean = false;
      }
      if (clean) break;
    }
    diag.push_back(G(c, c));
  }
  return diag;
}

IntMatrix int_inverse(const IntMatrix& A) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd inv = A.cast<double>().inverse();
  IntMatrix R(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) R(i, j) = std::llround(inv(i, j));
  if (A * R != IntMatrix::Identity(n, n)) throw InvariantError("integer inverse of K0 failed");
  return R;
}

std::vector<int> module_k(const ResonanceModule& mod, const MultiIndex& m) {
  std::vector<int> out(mod.l, 0);
  for (int i = 0; i < mod.l; ++i) {
    long long s = 0;
    for (int j = 0; j < mod.l; ++j) s += mod.K0_inverse(i, j) * kcomp(m, j);
    out[i] = static_cast<int>(s);
  }
  return out;
}

bool combination_next(std::vector<int>& c, int n) {
  const int k = static_cast<int>(c.size());
  for (int i = k - 1; i >= 0; --i) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (int j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

// Fourier data of an angle-only series: (l, c).
std::vector<std::pair<Eigen::VectorXd, cplx>> angle_modes(const Series& h) {
  const PhaseGeometry& g = h.geometry();
  std::vector<std::pair<Eigen::VectorXd, cplx>> out;
  for (const auto& [m, c] : h.terms()) {
    if (degree(m, g) != 0) throw ConfigError("critical_points: series must depend on angles only");
    Eigen::VectorXd l(g.d);
    for (int i = 0; i < g.d; ++i) l[i] = kcomp(m, i);
    out.emplace_back(l, c);
  }
  return out;
}

void eval_angles(const std::vector<std::pair<Eigen::VectorXd, cplx>>& modes, const Eigen::VectorXd& phi,
                 double& val, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const int n = static_cast<int>(phi.size());
  val = 0.0;
  grad = Eigen::VectorXd::Zero(n);
  hess = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [l, c] : modes) {
    const cplx e = c * std::exp(cplx(0.0, l.dot(phi)));
    val += e.real();
    grad += (cplx(0.0, 1.0) * e).real() * l;
    hess -= e.real() * (l * l.transpose());
  }
}

double torus_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (int i = 0; i < a.size(); ++i) {
    double t = std::fmod(std::abs(a[i] - b[i]), kTwoPi);
    t = std::min(t, kTwoPi - t);
    s = std::max(s, t);
  }
  return s;
}

}  // namespace

ResonanceModule unimodular_completion(const std::vector<std::vector<int>>& generators, int l) {
  if (l < 1) throw ConfigError("unimodular_completion: l must be positive");
  const int d0 = static_cast<int>(generators.size());
  if (d0 >= l) throw ConfigError("unimodular_completion: need d0 < l");
  ResonanceModule mod;
  mod.l = l;
  mod.d0 = d0;
  mod.generators = IntMatrix(l, d0);
  for (int c = 0; c < d0; ++c) {
    if (static_cast<int>(generators[c].size()) != l) throw ConfigError("generator length differs from l");
    for (int r = 0; r < l; ++r) mod.generators(r, c) = generators[c][r];
  }
  const int d = l - d0;

  IntMatrix U;
  const auto diag = hermite_rows(mod.generators, U);
  for (long long v : diag) {
    if (std::llabs(v) != 1) {
      std::ostringstream os;
      os << "generators do not span a direct summand of Z^" << l << " (invariant factor " << std::llabs(v)
         << ")";
      throw ConfigError(os.str());
    }
  }

  // Prefer unit vectors for the completion; fall back to the Hermite transform.
  IntMatrix K(l, l);
  K.rightCols(d0) = mod.generators;
  bool found = false;
  std::vector<int> pick(d);
  for (int i = 0; i < d; ++i) pick[i] = i;
  do {
    K.leftCols(d).setZero();
    for (int i = 0; i < d; ++i) K(pick[i], i) = 1;
    if (std::llabs(int_det(K)) == 1) {
      found = true;
      break;
    }
  } while (combination_next(pick, l));
  if (!found) {
    const IntMatrix Uinv = int_inverse(U);
    K.leftCols(d) = Uinv.rightCols(d);
  }
  if (int_det(K) < 0) K.col(0) = -K.col(0);
  if (int_det(K) != 1) throw InvariantError("unimodular completion failed");
  mod.K0 = K;
  mod.completion = K.leftCols(d);
  mod.K0_inverse = int_inverse(K);
  return mod;
}

Series to_module_coordinates(const Series& P, const ResonanceModule& mod, int degmax) {
  const PhaseGeometry& g = P.geometry();
  if (g.d != mod.l || g.d0 != 0) throw ConfigError("to_module_coordinates: geometry must be (l, 0)");
  const int l = mod.l;
  int kmax = 0;
  for (const auto& [m, c] : P.terms()) {
    for (int v : module_k(mod, m)) kmax = std::max(kmax, std::abs(v));
  }
  // Powers of y_i = sum_m K0(i, m) Y_m.
  std::vector<std::vector<Series>> pw(l);
  int maxpow = 0;
  for (const auto& [m, c] : P.terms()) maxpow = std::max(maxpow, y_degree(m, g));
  for (int i = 0; i < l; ++i) {
    std::vector<double> w(l);
    for (int j = 0; j < l; ++j) w[j] = static_cast<double>(mod.K0(i, j));
    Series lin = linear_y(g, w, degmax);
    pw[i].push_back(constant_series(g, 1.0, 0, degmax));
    for (int p = 1; p <= maxpow; ++p) pw[i].push_back(multiply(pw[i].back(), lin, {0, degmax}));
  }
  Series out(g, kmax, degmax);
  const std::vector<int> none;
  for (const auto& [m, c] : P.terms()) {
    Series poly = constant_series(g, c, 0, degmax);
    for (int i = 0; i < l; ++i) {
      const int j = jcomp(m, g, i);
      if (j > 0) poly = multiply(poly, pw[i][j], {0, degmax});
    }
    const std::vector<int> kp = module_k(mod, m);
    for (const auto& [pm, pc] : poly.terms()) {
      std::vector<int> jj(l);
      for (int i = 0; i < l; ++i) jj[i] = jcomp(pm, g, i);
      out.add_term(make_index(g, kp, jj, none), pc);
    }
  }
  out.prune();
  return out;
}

Series resonant_part(const Series& P0, const ResonanceModule& mod) {
  const PhaseGeometry& g = P0.geometry();
  if (g.d != mod.l || g.d0 != 0) throw ConfigError("resonant_part: geometry must be (l, 0)");
  Series out(g, P0.kmax(), P0.degmax());
  for (const auto& [m, c] : P0.terms()) {
    const auto kp = module_k(mod, m);
    if (std::all_of(kp.begin(), kp.begin() + mod.d(), [](int v) { return v == 0; })) out.add_term(m, c);
  }
  return out;
}

Series resonant_average(const Series& P0, const ResonanceModule& mod) {
  const PhaseGeometry& g = P0.geometry();
  if (g.d != mod.l || g.d0 != 0) throw ConfigError("resonant_average: geometry must be (l, 0)");
  if (mod.d0 < 1) throw ConfigError("resonant_average: module is trivial");
  const PhaseGeometry gp{mod.d0, 0};
  std::vector<std::pair<std::vector<int>, cplx>> kept;
  int kmax = 0;
  for (const auto& [m, c] : P0.terms()) {
    if (y_degree(m, g) != 0) continue;
    const auto kp = module_k(mod, m);
    if (!std::all_of(kp.begin(), kp.begin() + mod.d(), [](int v) { return v == 0; })) continue;
    std::vector<int> lv(kp.begin() + mod.d(), kp.end());
    for (int v : lv) kmax = std::max(kmax, std::abs(v));
    kept.emplace_back(std::move(lv), c);
  }
  Series out(gp, kmax, 0);
  const std::vector<int> zeros(mod.d0, 0), none;
  for (const auto& [lv, c] : kept) out.add_term(make_index(gp, lv, zeros, none), c);
  out.prune();
  return out;
}

CriticalPointSearch critical_points(const Series& h0, int d0, int grid) {
  if (h0.geometry().d != d0 || h0.geometry().d0 != 0)
    throw ConfigError("critical_points: series geometry must be (d0, 0)");
  if (grid < 2) throw ConfigError("critical_points: grid too small");
  const auto modes = angle_modes(h0);
  double scale = 0.0;
  for (const auto& [l, c] : modes)
    if (l.squaredNorm() > 0) scale += std::abs(c) * std::max(1.0, l.squaredNorm());

  CriticalPointSearch res;
  std::size_t nseeds = 1;
  for (int i = 0; i < d0; ++i) nseeds *= static_cast<std::size_t>(grid);
  auto seed_at = [&](std::size_t s) {
    Eigen::VectorXd phi(d0);
    for (int i = 0; i < d0; ++i) {
      phi[i] = kTwoPi * double(s % grid) / grid;
      s /= grid;
    }
    return phi;
  };

  if (scale == 0.0) {
    res.degenerate_family = true;
    for (std::size_t s = 0; s < nseeds; ++s) {
      CriticalPoint cp;
      cp.phi = seed_at(s);
      double v;
      Eigen::VectorXd gr;
      eval_angles(modes, cp.phi, v, gr, cp.hessian);
      cp.value = v;
      res.points.push_back(cp);
    }
    return res;
  }

  const double gtol = 1e-13 * scale;
  for (std::size_t s = 0; s < nseeds; ++s) {
    Eigen::VectorXd phi = seed_at(s);
    double v;
    Eigen::VectorXd gr;
    Eigen::MatrixXd H;
    bool ok = false;
    for (int it = 0; it < 60; ++it) {
      eval_angles(modes, phi, v, gr, H);
      if (gr.norm() <= gtol) {
        ok = true;
        break;
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
      if (!lu.isInvertible()) break;
      Eigen::VectorXd step = lu.solve(-gr);
      const double cap = kTwoPi / grid;
      if (step.norm() > cap) step *= cap / step.norm();
      phi += step;
    }
    if (!ok) {
      ++res.newton_failures;
      continue;
    }
    for (int i = 0; i < d0; ++i) {
      phi[i] = std::fmod(phi[i], kTwoPi);
      if (phi[i] < 0) phi[i] += kTwoPi;
      if (phi[i] > kTwoPi - 1e-12) phi[i] = 0.0;
    }
    bool dup = false;
    for (const auto& p : res.points)
      if (torus_distance(p.phi, phi) < 1e-6) dup = true;
    if (dup) continue;
    CriticalPoint cp;
    cp.phi = phi;
    cp.hessian = H;
    cp.value = v;
    cp.nondegenerate = std::abs(H.determinant()) > 1e-10 * std::pow(scale, d0);
    res.points.push_back(cp);
  }
  std::sort(res.points.begin(), res.points.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    return std::lexicographical_compare(a.phi.data(), a.phi.data() + a.phi.size(), b.phi.data(),
                                        b.phi.data() + b.phi.size());
  });
  return res;
}

ReducedHamiltonian reduce(const TaylorData& H0, const Series& P0, const ResonanceModule& mod,
                          const Eigen::VectorXd& y0, const ReduceOptions& opt) {
  const int l = mod.l, d0 = mod.d0, d = mod.d();
  const PhaseGeometry gl{l, 0};
  if (H0.gradient.size() != l || H0.hessian.rows() != l || H0.hessian.cols() != l)
    throw ConfigError("reduce: Taylor data dimension differs from l");
  if (y0.size() != l) throw ConfigError("reduce: y0 dimension differs from l");
  if (!(P0.geometry() == gl)) throw ConfigError("reduce: P0 geometry must be (l, 0)");
  if (!H0.third.empty() && static_cast<int>(H0.third.size()) != l * l * l)
    throw ConfigError("reduce: third-derivative tensor needs l^3 entries");
  if (opt.epsilon < 0.0) throw ConfigError("reduce: epsilon must be non-negative");

  const Eigen::VectorXd& w = H0.gradient;
  const double wscale = std::max(1.0, w.cwiseAbs().maxCoeff());
  for (int c = 0; c < d0; ++c) {
    const double r = mod.generators.col(c).cast<double>().dot(w);
    if (std::abs(r) > opt.resonance_tol * wscale) {
      std::ostringstream os;
      os << "y0 is off the resonant surface: <tau_" << c + 1 << ", omega(y0)> = " << r;
      throw ConfigError(os.str());
    }
  }

  ReducedHamiltonian out;
  out.geometry = PhaseGeometry{d, d0};
  out.epsilon = opt.epsilon;
  out.energy_offset = H0.value;
  auto& diag = out.diagnostics;

  const Eigen::MatrixXd A = 0.5 * (H0.hessian + H0.hessian.transpose());
  const double ascale = std::max(1.0, A.cwiseAbs().maxCoeff());
  diag.hessian_det = A.determinant();
  if (std::abs(diag.hessian_det) <= 1e-12 * std::pow(ascale, l)) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    std::ostringstream os;
    os << "H0 Hessian is degenerate (singular values min " << svd.singularValues().minCoeff() << ", max "
       << svd.singularValues().maxCoeff() << ")";
    throw ConfigError(os.str());
  }
  const Eigen::MatrixXd K0 = mod.K0.cast<double>();
  const Eigen::MatrixXd Gam = K0.transpose() * A * K0;
  const Eigen::MatrixXd G22 = Gam.bottomRightCorner(d0, d0);
  diag.gamma11_norm = Gam.topLeftCorner(d, d).norm();
  diag.gamma12_norm = Gam.topRightCorner(d, d0).norm();
  diag.gamma22_det = d0 ? G22.determinant() : 1.0;
  if (d0 && std::abs(diag.gamma22_det) <= 1e-12 * std::pow(std::max(1.0, G22.cwiseAbs().maxCoeff()), d0)) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G22);
    std::ostringstream os;
    os << "H0 is not g-nondegenerate: Gamma22 singular values min " << svd.singularValues().minCoeff();
    throw ConfigError(os.str());
  }
  const Eigen::VectorXd wt = K0.transpose() * w;
  out.omega = wt.head(d);

  // Hamiltonian in (theta, Y) with Y measured from y0.
  int kc = opt.kmax;
  const Series Pbar = to_module_coordinates(P0, mod, opt.degmax);
  kc = std::min(127, std::max(kc, Pbar.kmax()));
  const Truncation tr{kc, opt.degmax};
  Series Hq(gl, kc, opt.degmax);
  const std::vector<int> zk(l, 0), none;
  for (int i = 0; i < d; ++i) {
    std::vector<int> j(l, 0);
    j[i] = 1;
    Hq.add_term(make_index(gl, zk, j, none), out.omega[i]);
  }
  for (int a = 0; a < l; ++a)
    for (int b = a; b < l; ++b) {
      std::vector<int> j(l, 0);
      ++j[a];
      ++j[b];
      Hq.add_term(make_index(gl, zk, j, none), a == b ? 0.5 * Gam(a, a) : Gam(a, b));
    }
  if (!H0.third.empty() && opt.degmax >= 3) {
    // T'_{mnp} = sum T_{abc} K_am K_bn K_cp; monomial coefficient gathers the 1/6 and multiplicity.
    std::vector<double> Tp(l * l * l, 0.0);
    for (int m = 0; m < l; ++m)
      for (int n = 0; n < l; ++n)
        for (int p = 0; p < l; ++p) {
          double s = 0.0;
          for (int a = 0; a < l; ++a)
            for (int b = 0; b < l; ++b)
              for (int c = 0; c < l; ++c) s += H0.third[(a * l + b) * l + c] * K0(a, m) * K0(b, n) * K0(c, p);
          Tp[(m * l + n) * l + p] = s;
        }
    for (int m = 0; m < l; ++m)
      for (int n = 0; n < l; ++n)
        for (int p = 0; p < l; ++p) {
          std::vector<int> j(l, 0);
          ++j[m];
          ++j[n];
          ++j[p];
          Hq.add_term(make_index(gl, zk, j, none), Tp[(m * l + n) * l + p] / 6.0);
        }
  }

  // Averaging generator over the non-resonant angles.
  const double eps = opt.epsilon;
  Series F(gl, kc, opt.degmax);
  double min_div = std::numeric_limits<double>::infinity();
  if (eps != 0.0) {
    for (const auto& [m, c] : Pbar.terms()) {
      bool nonres = false;
      double kappa = 0.0;
      int k1 = 0;
      for (int i = 0; i < d; ++i) {
        nonres |= kcomp(m, i) != 0;
        kappa += kcomp(m, i) * out.omega[i];
        k1 += std::abs(kcomp(m, i));
      }
      if (!nonres) continue;
      min_div = std::min(min_div, std::abs(kappa));
      const double thr = opt.delta ? opt.gamma / (*opt.delta)(double(k1)) : 1e-14 * wscale;
      if (!(std::abs(kappa) >= thr)) {
        std::ostringstream os;
        os << "averaging divisor too small at k' = (";
        for (int i = 0; i < l; ++i) os << (i ? "," : "") << kcomp(m, i);
        os << "): |<k,omega>| = " << std::abs(kappa) << " < " << thr;
        throw DivisorError(os.str());
      }
      F.add_term(m, -eps * c / cplx(0.0, kappa));
    }
  }
  diag.min_divisor = std::isfinite(min_div) ? min_div : 0.0;
  Series Htheta = Hq.retruncated(tr) + cplx(eps) * Pbar.retruncated(tr);
  if (!F.empty()) {
    LieOptions lo;
    lo.truncation = tr;
    Htheta = lie_transform(Htheta, F, 1.0, opt.averaging_order, lo);
  }

  // Critical point of h0 and its Hessian.
  out.phi0 = Eigen::VectorXd::Zero(d0);
  out.V0 = Eigen::MatrixXd::Zero(d0, d0);
  if (d0) {
    const Series h0 = resonant_average(P0, mod);
    if (!h0.empty()) {
      diag.critical = critical_points(h0, d0, opt.critical_grid);
      std::vector<const CriticalPoint*> nd;
      for (const auto& p : diag.critical.points)
        if (p.nondegenerate) nd.push_back(&p);
      if (nd.empty()) throw ConfigError("h0 has no nondegenerate critical point");
      const CriticalPoint* pick = nullptr;
      if (opt.critical_index) {
        if (*opt.critical_index < 0 || *opt.critical_index >= static_cast<int>(nd.size()))
          throw ConfigError("critical_index out of range");
        pick = nd[*opt.critical_index];
      } else {
        pick = *std::min_element(nd.begin(), nd.end(),
                                 [](const CriticalPoint* a, const CriticalPoint* b) { return a->value < b->value; });
      }
      out.phi0 = pick->phi;
      out.V0 = pick->hessian;
    }
  }
  diag.V0_det = d0 ? out.V0.determinant() : 1.0;
  const double s = std::pow(eps, opt.action_scaling_exponent);
  out.U0 = eps > 0.0 ? std::pow(eps, 2.0 * opt.action_scaling_exponent - 1.0) * G22 : G22;
  out.M = Eigen::MatrixXd::Zero(2 * d0, 2 * d0);
  out.M.topLeftCorner(d0, d0) = out.U0;
  out.M.bottomRightCorner(d0, d0) = out.V0;

  // Into (x, y, u, v): Y'' = s u, phi'' = phi0 + v with e^{i<kb, v>} Taylor-expanded.
  const PhaseGeometry gr{d, d0};
  Series Hr(gr, kc, opt.degmax);
  for (const auto& [m, c] : Htheta.terms()) {
    std::vector<int> ka(d), ja(d), kb(d0), jb(d0);
    int deg0 = 0;
    for (int i = 0; i < d; ++i) {
      ka[i] = kcomp(m, i);
      ja[i] = jcomp(m, gl, i);
      deg0 += ja[i];
    }
    double phase = 0.0;
    int ub = 0;
    for (int i = 0; i < d0; ++i) {
      kb[i] = kcomp(m, d + i);
      jb[i] = jcomp(m, gl, d + i);
      ub += jb[i];
      phase += kb[i] * out.phi0[i];
    }
    deg0 += ub;
    if (deg0 > opt.degmax) continue;
    const cplx base = c * std::pow(s, ub) * std::exp(cplx(0.0, phase));
    if (base == cplx{}) continue;
    // Enumerate v-powers n with |n| <= degmax - deg0.
    const int budget = opt.degmax - deg0;
    std::vector<int> n(d0, 0);
    for (;;) {
      int tot = 0;
      cplx f = base;
      for (int i = 0; i < d0; ++i) {
        tot += n[i];
        f *= std::pow(cplx(0.0, double(kb[i])), n[i]) / std::tgamma(n[i] + 1.0);
      }
      if (tot <= budget && f != cplx{}) {
        std::vector<int> q(2 * d0);
        for (int i = 0; i < d0; ++i) {
          q[i] = jb[i];
          q[d0 + i] = n[i];
        }
        Hr.add_term(make_index(gr, ka, ja, q), f);
      }
      int i = 0;
      while (i < d0) {
        if (++n[i] <= budget) break;
        n[i] = 0;
        ++i;
      }
      if (i == d0) break;
    }
  }
  Hr.prune();
  diag.truncation = Htheta.log();
  diag.truncation.merge(Hr.log());

  // Split: constant, linear-y, quadratic-z go to the normal form; k=0 linear-z and k != 0 to P1.
  out.omega1 = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2 * d0, 2 * d0);
  out.Rterm = Series(gr, kc, opt.degmax);
  out.P1 = Series(gr, kc, opt.degmax);
  for (const auto& [m, c] : Hr.terms()) {
    if (!k_is_zero(m, gr)) {
      out.P1.add_term(m, c);
      continue;
    }
    const int jy = y_degree(m, gr), qz = z_degree(m, gr);
    if (jy == 0 && qz == 0) {
      out.epsilonN0 += c.real();
    } else if (jy == 1 && qz == 0) {
      for (int i = 0; i < d; ++i)
        if (jcomp(m, gr, i)) out.omega1[i] += c.real();
    } else if (jy == 0 && qz == 1) {
      out.P1.add_term(m, c);
    } else if (jy == 0 && qz == 2) {
      std::vector<int> idx;
      for (int a = 0; a < 2 * d0; ++a)
        for (int t = 0; t < qcomp(m, gr, a); ++t) idx.push_back(a);
      if (idx[0] == idx[1]) {
        Q(idx[0], idx[0]) += 2.0 * c.real();
      } else {
        Q(idx[0], idx[1]) += c.real();
        Q(idx[1], idx[0]) += c.real();
      }
    } else {
      out.Rterm.add_term(m, c);
    }
  }
  out.M1 = eps > 0.0 ? Eigen::MatrixXd(Q / eps) : out.M;
  return out;
}

}  // namespace kamq
