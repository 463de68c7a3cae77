#include "kamq/kam.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>
#include <unsupported/Eigen/KroneckerProduct>

#include "kamq/errors.hpp"

namespace kamq {

namespace {

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

// Every k with |k|_inf <= K whose first nonzero entry is positive.
std::vector<std::vector<int>> half_lattice(int d, int K) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(d, -K);
  for (;;) {
    int first = 0;
    for (int v : k)
      if (v != 0) {
        first = v;
        break;
      }
    if (first > 0) out.push_back(k);
    int i = d - 1;
    while (i >= 0 && ++k[i] > K) k[i--] = -K;
    if (i < 0) break;
  }
  return out;
}

std::string k_string(const std::vector<int>& k) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < k.size(); ++i) os << (i ? "," : "") << k[i];
  os << ")";
  return os.str();
}

struct ModeData {
  cplx a{};
  CVec b, c;
  CMat P;
};

// Projects a series onto the normal-form slots; returns the rest.
struct Split {
  double e = 0.0;
  Eigen::VectorXd lin_y;
  Eigen::MatrixXd quad_z;  // S with (1/2) z^T S z
  Series rterms, pert;
};

Split split_normal_form(const Series& H, bool keep_quadratic) {
  const PhaseGeometry& g = H.geometry();
  Split s;
  s.lin_y = Eigen::VectorXd::Zero(g.d);
  s.quad_z = Eigen::MatrixXd::Zero(g.nz(), g.nz());
  s.rterms = Series(g, H.kmax(), H.degmax());
  s.pert = Series(g, H.kmax(), H.degmax());
  for (const auto& [m, c] : H.terms()) {
    if (!k_is_zero(m, g)) {
      s.pert.add_term(m, c);
      continue;
    }
    const int jy = y_degree(m, g), qz = z_degree(m, g);
    if (jy == 0 && qz == 0) {
      s.e += c.real();
    } else if (jy == 1 && qz == 0) {
      for (int i = 0; i < g.d; ++i)
        if (jcomp(m, g, i)) s.lin_y[i] += c.real();
    } else if (jy == 0 && qz == 1) {
      s.pert.add_term(m, c);
    } else if (jy == 0 && qz == 2 && keep_quadratic) {
      int a = -1, b = -1;
      for (int t = 0; t < g.nz(); ++t)
        for (int r = 0; r < qcomp(m, g, t); ++r) (a < 0 ? a : b) = t;
      if (a == b) {
        s.quad_z(a, a) += 2.0 * c.real();
      } else {
        s.quad_z(a, b) += c.real();
        s.quad_z(b, a) += c.real();
      }
    } else {
      s.rterms.add_term(m, c);
    }
  }
  return s;
}

std::vector<int> k_vector(const MultiIndex& m, const PhaseGeometry& g) {
  std::vector<int> k(g.d);
  for (int i = 0; i < g.d; ++i) k[i] = kcomp(m, i);
  return k;
}

}  // namespace

Eigen::MatrixXd symplectic_J(int d0) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * d0, 2 * d0);
  J.topRightCorner(d0, d0) = Eigen::MatrixXd::Identity(d0, d0);
  J.bottomLeftCorner(d0, d0) = -Eigen::MatrixXd::Identity(d0, d0);
  return J;
}

std::complex<double> det_A1(double kappa, const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 1.0;
  const CMat A = cplx(0.0, -kappa) * CMat::Identity(n, n) + (M * symplectic_J(n / 2)).cast<cplx>();
  return A.determinant();
}

std::complex<double> det_A2(double kappa, const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  if (n == 0) return 1.0;
  const Eigen::MatrixXd MJ = M * symplectic_J(n / 2);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd S = Eigen::kroneckerProduct(MJ, I) + Eigen::kroneckerProduct(I, MJ);
  const CMat A = cplx(0.0, -kappa) * CMat::Identity(n * n, n * n) + S.cast<cplx>();
  return A.determinant();
}

DivisorCheck check_divisors(const Eigen::VectorXd& omega, const Eigen::MatrixXd& M, int Kplus, double gamma,
                            const ApproximationFunction& delta) {
  if (Kplus < 1) throw ConfigError("check_divisors: Kplus must be >= 1");
  const int d = static_cast<int>(omega.size());
  const int d0 = static_cast<int>(M.rows()) / 2;
  DivisorCheck out;
  out.min_kw = out.min_detA1 = out.min_detA2 = std::numeric_limits<double>::infinity();
  for (const auto& k : half_lattice(d, Kplus)) {
    DivisorReport r;
    r.k = k;
    int k1 = 0;
    for (int i = 0; i < d; ++i) {
      r.kw += k[i] * omega[i];
      k1 += std::abs(k[i]);
    }
    const double base = gamma / delta(double(k1));
    r.threshold_kw = base;
    r.pass = std::abs(r.kw) >= base;
    if (d0 > 0) {
      r.detA1 = det_A1(r.kw, M);
      r.detA2 = det_A2(r.kw, M);
      r.threshold_A1 = std::pow(base, 2 * d0);
      r.threshold_A2 = std::pow(base, 4 * d0 * d0);
      r.pass = r.pass && std::abs(r.detA1) >= r.threshold_A1 && std::abs(r.detA2) >= r.threshold_A2;
      out.min_detA1 = std::min(out.min_detA1, std::abs(r.detA1));
      out.min_detA2 = std::min(out.min_detA2, std::abs(r.detA2));
    }
    out.min_kw = std::min(out.min_kw, std::abs(r.kw));
    out.member = out.member && r.pass;
    out.reports.push_back(std::move(r));
  }
  if (d0 == 0) out.min_detA1 = out.min_detA2 = 1.0;
  return out;
}

Series integrable_series(const PhaseGeometry& g, const IntegrablePart& N, int kmax, int degmax) {
  Series s(g, kmax, std::max(degmax, 2));
  const std::vector<int> zk(g.d, 0), zj(g.d, 0), zq(g.nz(), 0);
  s.add_term(make_index(g, zk, zj, zq), N.e);
  for (int i = 0; i < g.d; ++i) {
    std::vector<int> j(g.d, 0);
    j[i] = 1;
    s.add_term(make_index(g, zk, j, zq), N.omega[i]);
  }
  for (int a = 0; a < g.nz(); ++a)
    for (int b = a; b < g.nz(); ++b) {
      std::vector<int> q(g.nz(), 0);
      ++q[a];
      ++q[b];
      s.add_term(make_index(g, zk, zj, q), a == b ? 0.5 * N.M(a, a) : 0.5 * (N.M(a, b) + N.M(b, a)));
    }
  s.prune();
  return s.retruncated({kmax, degmax});
}

HomologicalSolution solve_homological_physical(const IntegrablePart& N, const Series& R, int Kplus,
                                               double gamma, const ApproximationFunction& delta,
                                               const GevreyWeights& w) {
  const PhaseGeometry& g = R.geometry();
  const int d = g.d, d0 = g.d0, nz = g.nz();
  if (N.omega.size() != d || N.M.rows() != nz || N.M.cols() != nz)
    throw ConfigError("solve_homological: integrable part does not match the geometry");
  HomologicalSolution sol;
  sol.F = Series(g, Kplus, 2);
  sol.killed = Series(g, R.kmax(), R.degmax());
  sol.averaged = Series(g, R.kmax(), R.degmax());
  sol.F001 = Eigen::VectorXd::Zero(nz);
  sol.divisors = check_divisors(N.omega, N.M, Kplus, gamma, delta);

  std::map<std::vector<int>, ModeData> modes;
  CVec r001 = CVec::Zero(nz);
  for (const auto& [m, c] : R.terms()) {
    if (!is_ansatz_shape(m, g) || k_sup(m, g) > Kplus)
      throw ConfigError("solve_homological: R is not of cutoff shape");
    const int jy = y_degree(m, g), qz = z_degree(m, g);
    if (k_is_zero(m, g)) {
      if (jy == 0 && qz == 1) {
        for (int a = 0; a < nz; ++a)
          if (qcomp(m, g, a)) r001[a] += c;
        sol.killed.add_term(m, c);
      } else {
        sol.averaged.add_term(m, c);
      }
      continue;
    }
    sol.killed.add_term(m, c);
    auto [it, fresh] = modes.try_emplace(k_vector(m, g));
    ModeData& md = it->second;
    if (fresh) {
      md.b = CVec::Zero(d);
      md.c = CVec::Zero(nz);
      md.P = CMat::Zero(nz, nz);
    }
    if (jy == 0 && qz == 0) {
      md.a += c;
    } else if (jy == 1) {
      for (int i = 0; i < d; ++i)
        if (jcomp(m, g, i)) md.b[i] += c;
    } else if (qz == 1) {
      for (int a = 0; a < nz; ++a)
        if (qcomp(m, g, a)) md.c[a] += c;
    } else {
      int a = -1, b = -1;
      for (int t = 0; t < nz; ++t)
        for (int r = 0; r < qcomp(m, g, t); ++r) (a < 0 ? a : b) = t;
      if (a == b) {
        md.P(a, a) += c;
      } else {
        md.P(a, b) += 0.5 * c;
        md.P(b, a) += 0.5 * c;
      }
    }
  }

  const Eigen::MatrixXd MJ = N.M * symplectic_J(d0);
  const std::vector<int> zj(d, 0), zq(nz, 0);
  for (const auto& [k, md] : modes) {
    double kappa = 0.0;
    int k1 = 0;
    for (int i = 0; i < d; ++i) {
      kappa += k[i] * N.omega[i];
      k1 += std::abs(k[i]);
    }
    const double base = gamma / delta(double(k1));
    const cplx ik(0.0, kappa);
    auto fail = [&](const std::string& what, double value, double thr) {
      std::ostringstream os;
      os << "divisor condition fails at k = " << k_string(k) << ": " << what << " = " << value << " < " << thr;
      throw DivisorError(os.str());
    };
    if (!(std::abs(kappa) >= base) || kappa == 0.0) fail("|<k,omega>|", std::abs(kappa), base);
    if (md.a != cplx{}) sol.F.add_term(make_index(g, k, zj, zq), -md.a / ik);
    for (int i = 0; i < d; ++i) {
      if (md.b[i] == cplx{}) continue;
      std::vector<int> j(d, 0);
      j[i] = 1;
      sol.F.add_term(make_index(g, k, j, zq), -md.b[i] / ik);
    }
    if (nz == 0) continue;
    if (!md.c.isZero(0.0)) {
      const CMat A = ik * CMat::Identity(nz, nz) + MJ.cast<cplx>();
      const double thr = std::pow(base, 2 * d0);
      const double det = std::abs(A.determinant());
      if (!(det >= thr) || det == 0.0) fail("|det A1|", det, thr);
      const CVec x = A.partialPivLu().solve(-md.c);
      for (int a = 0; a < nz; ++a) {
        std::vector<int> q(nz, 0);
        q[a] = 1;
        sol.F.add_term(make_index(g, k, zj, q), x[a]);
      }
    }
    if (!md.P.isZero(0.0)) {
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nz, nz);
      const Eigen::MatrixXd S = Eigen::kroneckerProduct(MJ, I) + Eigen::kroneckerProduct(I, MJ);
      const CMat A = ik * CMat::Identity(nz * nz, nz * nz) + S.cast<cplx>();
      const double thr = std::pow(base, 4 * d0 * d0);
      const double det = std::abs(A.determinant());
      if (!(det >= thr) || det == 0.0) fail("|det A2|", det, thr);
      const CVec rhs = -Eigen::Map<const CVec>(md.P.data(), nz * nz);
      const CVec x = A.partialPivLu().solve(rhs);
      CMat G = Eigen::Map<const CMat>(x.data(), nz, nz);
      G = 0.5 * (G + G.transpose()).eval();
      for (int a = 0; a < nz; ++a)
        for (int b = a; b < nz; ++b) {
          std::vector<int> q(nz, 0);
          ++q[a];
          ++q[b];
          sol.F.add_term(make_index(g, k, zj, q), a == b ? G(a, a) : 2.0 * G(a, b));
        }
    }
  }

  if (nz > 0 && !r001.isZero(0.0)) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(N.M);
    if (!lu.isInvertible()) throw DivisorError("solve_homological: M is singular, cannot solve for F001");
    const Eigen::VectorXd rr = r001.real();
    sol.F001 = lu.solve(-rr);
    const Eigen::VectorXd gz = -symplectic_J(d0) * sol.F001;
    const std::vector<int> zk(d, 0);
    for (int a = 0; a < nz; ++a) {
      std::vector<int> q(nz, 0);
      q[a] = 1;
      sol.F.add_term(make_index(g, zk, zj, q), gz[a]);
    }
  }
  sol.F.prune();

  const Series Ns = integrable_series(g, N, 0, 2);
  const Series res = poisson_bracket(Ns, sol.F) + sol.killed;
  sol.residual = majorant_norm(res, w);
  sol.r_norm = majorant_norm(R, w);
  return sol;
}

HomologicalSolution solve_homological(const IntegrablePart& N, const Series& R, double epsilon, int Kplus,
                                      double gamma, const ApproximationFunction& delta,
                                      const GevreyWeights& w) {
  const PhaseGeometry& g = R.geometry();
  Series Rp(g, R.kmax(), R.degmax());
  const double e1 = epsilon, e2 = epsilon * epsilon;
  for (const auto& [m, c] : R.terms()) {
    const bool linz = y_degree(m, g) == 0 && z_degree(m, g) == 1;
    Rp.add_term(m, (linz ? e1 : e2) * c);
  }
  return solve_homological_physical(N, Rp, Kplus, gamma, delta, w);
}

IntegrablePart NormalFormState::integrable() const {
  return IntegrablePart{e, omega, epsilon * Mp};
}

double NormalFormState::e_reconstructed() const {
  double s = e0, pw = 1.0;
  for (double c : epsN_coeffs) {
    pw *= epsilon;
    s += c * pw;
  }
  return s;
}

Eigen::VectorXd NormalFormState::omega_reconstructed() const {
  Eigen::VectorXd s = omega0;
  double pw = 1.0;
  for (const auto& c : omega_coeffs) {
    pw *= epsilon;
    s += c * pw;
  }
  return s;
}

Eigen::MatrixXd NormalFormState::M_reconstructed() const {
  Eigen::MatrixXd s = M0;
  double pw = 1.0;
  for (const auto& c : M_coeffs) {
    pw *= epsilon;
    s += c * pw;
  }
  return s;
}

NormalFormState make_state(const PhaseGeometry& g, double epsilon, double e, const Eigen::VectorXd& omega,
                           const Eigen::MatrixXd& Mp, const Series& Rterms, const Series& P) {
  g.validate();
  if (omega.size() != g.d || Mp.rows() != g.nz() || Mp.cols() != g.nz())
    throw ConfigError("make_state: dimensions do not match the geometry");
  if (!P.empty() && !(P.geometry() == g)) throw ConfigError("make_state: P geometry mismatch");
  if (!Rterms.empty() && !(Rterms.geometry() == g)) throw ConfigError("make_state: Rterms geometry mismatch");
  NormalFormState st;
  st.geometry = g;
  st.epsilon = epsilon;
  const Series Pg = P.empty() ? Series(g, std::max(P.kmax(), 0), std::max(P.degmax(), 2)) : P;
  Split sp = split_normal_form(Pg, epsilon != 0.0);
  st.e = e + sp.e;
  st.omega = omega + sp.lin_y;
  st.Mp = Mp;
  if (epsilon != 0.0) st.Mp += sp.quad_z / epsilon;
  st.Mp = 0.5 * (st.Mp + st.Mp.transpose()).eval();
  st.Rterms = Rterms.empty() ? sp.rterms : Rterms + sp.rterms;
  st.P = sp.pert;
  st.e0 = st.e;
  st.omega0 = st.omega;
  st.M0 = st.Mp;
  return st;
}

NormalFormState state_from_reduction(const ReducedHamiltonian& rh) {
  return make_state(rh.geometry, rh.epsilon, rh.energy_offset + rh.epsilonN0, rh.omega1, rh.M1, rh.Rterm,
                    rh.P1);
}

StepResult kam_step(const NormalFormState& state, const ApproximationFunction& delta, const StepOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const PhaseGeometry& g = state.geometry;
  const GevreyWeights w0 = opt.weights;
  GevreyWeights w1 = opt.weights;
  w1.rho -= opt.r;
  w1.sigma -= opt.s;
  if (!(opt.r >= 0.0 && opt.s >= 0.0 && w1.rho > 0.0 && w1.sigma > 0.0))
    throw ConfigError("kam_step: weight losses exceed the remaining weights");

  StepResult out;
  out.state = state;
  StepRecord& rec = out.record;
  rec.p = state.p + 1;
  rec.Kplus = opt.Kplus;
  rec.norm_before = majorant_norm(state.P, w0);
  const int s = state.p + 1;
  const double eps_s = std::pow(state.epsilon, s);
  const double epsilon = state.epsilon;

  auto finish = [&](NormalFormState next) {
    const double de = next.e - state.e;
    const Eigen::VectorXd dw = next.omega - state.omega;
    const Eigen::MatrixXd dM = next.Mp - state.Mp;
    next.epsN_coeffs.push_back(eps_s != 0.0 ? de / eps_s : 0.0);
    next.omega_coeffs.push_back(eps_s != 0.0 ? Eigen::VectorXd(dw / eps_s) : Eigen::VectorXd::Zero(g.d));
    next.M_coeffs.push_back(eps_s != 0.0 ? Eigen::MatrixXd(dM / eps_s) : Eigen::MatrixXd::Zero(g.nz(), g.nz()));
    next.p = s;
    next.norms.push_back(rec.norm_after);
    out.state = std::move(next);
    rec.accepted = true;
    if (opt.record_timing)
      rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  if (state.P.empty() || epsilon == 0.0) {
    rec.norm_after = majorant_norm(state.P, w1);
    rec.min_divisor = rec.min_detA1 = rec.min_detA2 = 0.0;
    NormalFormState next = state;
    next.generators.emplace_back(g, 0, 0);
    finish(std::move(next));
    return out;
  }

  const auto cut = cutoff(state.P, opt.Kplus);
  const IntegrablePart N = state.integrable();
  out.solution = solve_homological_physical(N, cut.R, opt.Kplus, opt.gamma, delta, w0);
  const auto& dv = out.solution.divisors;
  rec.min_divisor = dv.min_kw;
  rec.min_detA1 = dv.min_detA1;
  rec.min_detA2 = dv.min_detA2;
  rec.residual = out.solution.r_norm > 0.0 ? out.solution.residual / out.solution.r_norm : 0.0;

  const int kctx = std::min(127, std::max(opt.kmax, opt.Kplus));
  const Truncation tr{kctx, opt.degmax};
  Series H = integrable_series(g, N, kctx, opt.degmax) + state.Rterms.retruncated(tr) + state.P.retruncated(tr);
  LieOptions lo;
  lo.truncation = tr;
  const Series Hp = lie_transform(H, out.solution.F.retruncated(tr), 1.0, opt.lie_order, lo);

  Split sp = split_normal_form(Hp, true);
  NormalFormState next = state;
  next.e = sp.e;
  next.omega = sp.lin_y;
  next.Mp = 0.5 * (sp.quad_z + sp.quad_z.transpose()) / epsilon;
  next.Rterms = sp.rterms;
  next.P = sp.pert;
  next.truncation.merge(Hp.log());
  next.generators.push_back(out.solution.F);
  rec.norm_after = majorant_norm(next.P, w1);

  if (opt.reject_on_growth && rec.norm_after > rec.norm_before) {
    rec.accepted = false;
    rec.reason = "perturbation norm grew";
    out.state = state;
    return out;
  }
  finish(std::move(next));
  return out;
}

double Schedule::sigma_p(int p) const { return sigma / (4.0 * p * p); }
double Schedule::rho_p(int p) const { return rho / (4.0 * p * p); }

double Schedule::sigma_remaining(int p) const {
  double s = sigma;
  for (int i = 1; i <= p; ++i) s -= sigma_p(i);
  return s;
}

double Schedule::rho_remaining(int p) const {
  double s = rho;
  for (int i = 1; i <= p; ++i) s -= rho_p(i);
  return s;
}

IterateResult iterate(const NormalFormState& state, const ApproximationFunction& delta, const Schedule& sched,
                      int pmax) {
  if (pmax < 0) throw ConfigError("iterate: pmax must be >= 0");
  IterateResult out;
  out.state = state;
  const int p0 = state.p;
  out.trajectory.push_back(
      majorant_norm(state.P, {sched.rho_remaining(p0), sched.sigma_remaining(p0), sched.alpha}));
  out.stop_reason = "pmax";
  for (int step = 0; step < pmax; ++step) {
    if (out.trajectory.back() < sched.target) {
      out.stop_reason = "target";
      break;
    }
    const int p = out.state.p + 1;
    StepOptions so;
    so.Kplus = sched.K_p(p);
    so.gamma = sched.gamma;
    so.weights = {sched.rho_remaining(p - 1), sched.sigma_remaining(p - 1), sched.alpha};
    so.r = sched.rho_p(p);
    so.s = sched.sigma_p(p);
    so.lie_order = sched.lie_order;
    so.kmax = sched.kmax;
    so.degmax = sched.degmax;
    so.record_timing = sched.record_timing;
    StepResult r = kam_step(out.state, delta, so);
    out.records.push_back(r.record);
    if (!r.record.accepted) {
      out.stop_reason = "rejected: " + r.record.reason;
      break;
    }
    out.state = std::move(r.state);
    out.trajectory.push_back(r.record.norm_after);
  }
  return out;
}

std::string records_to_csv(const std::vector<StepRecord>& rows) {
  std::string s = "p,norm_before,norm_after,min_divisor,min_detA1,min_detA2,residual,wall_time,accepted\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", r.p, r.norm_before,
                  r.norm_after, r.min_divisor, r.min_detA1, r.min_detA2, r.residual, r.wall_time,
                  r.accepted ? 1 : 0);
    s += buf;
  }
  return s;
}

}  // namespace kamq
