#include "kamq/series.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

#include "kamq/errors.hpp"

namespace kamq {

namespace {

constexpr int kIndexLimit = std::numeric_limits<std::int8_t>::max();

void require_same_geometry(const Series& a, const Series& b) {
  if (!(a.geometry() == b.geometry())) throw ConfigError("series geometry mismatch");
}

// Entry-wise sum; false when an entry leaves the int8 range.
bool packed_sum(const MultiIndex& a, const MultiIndex& b, int w, MultiIndex& out) {
  for (int i = 0; i < w; ++i) {
    int s = int(a.v[i]) + int(b.v[i]);
    if (s > kIndexLimit || s < -kIndexLimit) return false;
    out.v[i] = static_cast<std::int8_t>(s);
  }
  return true;
}

double inv_factorial(int m) {
  double r = 1.0;
  for (int i = 2; i <= m; ++i) r /= i;
  return r;
}

}  // namespace

void PhaseGeometry::validate() const {
  if (d < 1) throw ConfigError("geometry: d must be >= 1");
  if (d0 < 0) throw ConfigError("geometry: d0 must be >= 0");
  if (width() > kMaxIndexWidth) throw ConfigError("geometry: 2d + 2d0 exceeds 16");
}

MultiIndex make_index(const PhaseGeometry& g, std::span<const int> k, std::span<const int> j,
                      std::span<const int> q) {
  if (static_cast<int>(k.size()) != g.d || static_cast<int>(j.size()) != g.d ||
      static_cast<int>(q.size()) != g.nz())
    throw ConfigError("multi-index length does not match geometry");
  MultiIndex m;
  auto put = [&](int pos, int val) {
    if (std::abs(val) > kIndexLimit) throw ConfigError("multi-index entry out of range");
    m.v[pos] = static_cast<std::int8_t>(val);
  };
  for (int i = 0; i < g.d; ++i) put(i, k[i]);
  for (int i = 0; i < g.d; ++i) {
    if (j[i] < 0) throw ConfigError("negative y exponent");
    put(g.d + i, j[i]);
  }
  for (int i = 0; i < g.nz(); ++i) {
    if (q[i] < 0) throw ConfigError("negative z exponent");
    put(2 * g.d + i, q[i]);
  }
  return m;
}

int k_sup(const MultiIndex& m, const PhaseGeometry& g) {
  int r = 0;
  for (int i = 0; i < g.d; ++i) r = std::max(r, std::abs(int(m.v[i])));
  return r;
}

int k_l1(const MultiIndex& m, const PhaseGeometry& g) {
  int r = 0;
  for (int i = 0; i < g.d; ++i) r += std::abs(int(m.v[i]));
  return r;
}

int y_degree(const MultiIndex& m, const PhaseGeometry& g) {
  int r = 0;
  for (int i = 0; i < g.d; ++i) r += m.v[g.d + i];
  return r;
}

int z_degree(const MultiIndex& m, const PhaseGeometry& g) {
  int r = 0;
  for (int i = 0; i < g.nz(); ++i) r += m.v[2 * g.d + i];
  return r;
}

bool k_is_zero(const MultiIndex& m, const PhaseGeometry& g) {
  for (int i = 0; i < g.d; ++i)
    if (m.v[i] != 0) return false;
  return true;
}

MultiIndex negate_k(const MultiIndex& m, const PhaseGeometry& g) {
  MultiIndex r = m;
  for (int i = 0; i < g.d; ++i) r.v[i] = static_cast<std::int8_t>(-m.v[i]);
  return r;
}

void TruncationLog::merge(const TruncationLog& o) {
  dropped_terms += o.dropped_terms;
  dropped_mass += o.dropped_mass;
  pruned_terms += o.pruned_terms;
  pruned_mass += o.pruned_mass;
}

Series::Series(PhaseGeometry g, int kmax, int degmax) : geo_(g), kmax_(kmax), degmax_(degmax) {
  geo_.validate();
  if (kmax < 0 || degmax < 0) throw ConfigError("series truncation must be non-negative");
  if (kmax > kIndexLimit || degmax > kIndexLimit) throw ConfigError("series truncation too large");
}

cplx Series::coeff(const MultiIndex& m) const {
  auto it = c_.find(m);
  return it == c_.end() ? cplx{} : it->second;
}

bool Series::in_bounds(const MultiIndex& m) const {
  return k_sup(m, geo_) <= kmax_ && degree(m, geo_) <= degmax_;
}

bool Series::add_term(const MultiIndex& m, cplx c) {
  if (c == cplx{}) return true;
  if (!in_bounds(m)) {
    ++log_.dropped_terms;
    log_.dropped_mass += std::abs(c);
    return false;
  }
  c_[m] += c;
  return true;
}

bool Series::add_term(std::span<const int> k, std::span<const int> j, std::span<const int> q, cplx c) {
  return add_term(make_index(geo_, k, j, q), c);
}

void Series::set_term(const MultiIndex& m, cplx c) {
  if (!in_bounds(m)) throw ConfigError("set_term: index outside truncation");
  if (c == cplx{})
    c_.erase(m);
  else
    c_[m] = c;
}

std::size_t Series::prune(double threshold) {
  std::size_t n = 0;
  for (auto it = c_.begin(); it != c_.end();) {
    double a = std::abs(it->second);
    if (a < threshold) {
      log_.pruned_mass += a;
      ++n;
      it = c_.erase(it);
    } else {
      ++it;
    }
  }
  log_.pruned_terms += n;
  return n;
}

Series Series::retruncated(Truncation t) const {
  Series r(geo_, t.kmax, t.degmax);
  r.log_ = log_;
  for (const auto& [m, c] : c_) r.add_term(m, c);
  return r;
}

Series operator+(const Series& a, const Series& b) {
  require_same_geometry(a, b);
  Series r(a.geometry(), std::max(a.kmax(), b.kmax()), std::max(a.degmax(), b.degmax()));
  r.log().merge(a.log());
  r.log().merge(b.log());
  for (const auto& [m, c] : a.terms()) r.add_term(m, c);
  for (const auto& [m, c] : b.terms()) r.add_term(m, c);
  r.prune();
  return r;
}

Series operator-(const Series& a) { return cplx(-1.0) * a; }

Series operator-(const Series& a, const Series& b) { return a + (-b); }

Series operator*(cplx s, const Series& a) {
  Series r(a.geometry(), a.kmax(), a.degmax());
  r.log() = a.log();
  if (s == cplx{}) return r;
  for (const auto& [m, c] : a.terms()) r.add_term(m, s * c);
  r.prune();
  return r;
}

Series multiply(const Series& a, const Series& b) {
  return multiply(a, b, {std::min(kIndexLimit, a.kmax() + b.kmax()),
                        std::min(kIndexLimit, a.degmax() + b.degmax())});
}

Series multiply(const Series& a, const Series& b, Truncation t) {
  require_same_geometry(a, b);
  const PhaseGeometry& g = a.geometry();
  Series r(g, t.kmax, t.degmax);
  r.log().merge(a.log());
  r.log().merge(b.log());
  const int w = g.width();
  for (const auto& [ma, ca] : a.terms()) {
    for (const auto& [mb, cb] : b.terms()) {
      MultiIndex m;
      if (!packed_sum(ma, mb, w, m)) {
        r.log().dropped_terms++;
        r.log().dropped_mass += std::abs(ca * cb);
        continue;
      }
      r.add_term(m, ca * cb);
    }
  }
  r.prune();
  return r;
}

Series derivative_x(const Series& f, int i) {
  const PhaseGeometry& g = f.geometry();
  Series r(g, f.kmax(), f.degmax());
  r.log() = f.log();
  for (const auto& [m, c] : f.terms()) {
    int k = kcomp(m, i);
    if (k != 0) r.add_term(m, cplx(0.0, double(k)) * c);
  }
  return r;
}

Series derivative_y(const Series& f, int i) {
  const PhaseGeometry& g = f.geometry();
  Series r(g, f.kmax(), std::max(0, f.degmax() - 1));
  r.log() = f.log();
  for (const auto& [m, c] : f.terms()) {
    int j = jcomp(m, g, i);
    if (j == 0) continue;
    MultiIndex n = m;
    n.v[g.d + i] = static_cast<std::int8_t>(j - 1);
    r.add_term(n, double(j) * c);
  }
  return r;
}

Series derivative_z(const Series& f, int i) {
  const PhaseGeometry& g = f.geometry();
  Series r(g, f.kmax(), std::max(0, f.degmax() - 1));
  r.log() = f.log();
  for (const auto& [m, c] : f.terms()) {
    int q = qcomp(m, g, i);
    if (q == 0) continue;
    MultiIndex n = m;
    n.v[2 * g.d + i] = static_cast<std::int8_t>(q - 1);
    r.add_term(n, double(q) * c);
  }
  return r;
}

Series poisson_bracket(const Series& f, const Series& g) {
  return poisson_bracket(f, g, {std::min(kIndexLimit, f.kmax() + g.kmax()),
                               std::clamp(f.degmax() + g.degmax() - 2, 0, kIndexLimit)});
}

Series poisson_bracket(const Series& f, const Series& g, Truncation t) {
  require_same_geometry(f, g);
  const PhaseGeometry& G = f.geometry();
  Series r(G, t.kmax, t.degmax);
  r.log().merge(f.log());
  r.log().merge(g.log());
  const int w = G.width();
  const int d = G.d, d0 = G.d0;
  const int zoff = 2 * d;
  for (const auto& [ma, ca] : f.terms()) {
    for (const auto& [mb, cb] : g.terms()) {
      MultiIndex sum;
      const cplx cc = ca * cb;
      if (!packed_sum(ma, mb, w, sum)) {
        r.log().dropped_terms++;
        r.log().dropped_mass += std::abs(cc);
        continue;
      }
      // x-y pairs: f_{y_i} g_{x_i} - f_{x_i} g_{y_i}
      for (int i = 0; i < d; ++i) {
        const int ja = ma.v[d + i], jb = mb.v[d + i];
        const int ka = ma.v[i], kb = mb.v[i];
        const double w_ = double(ja) * kb - double(ka) * jb;
        if (w_ == 0.0) continue;
        MultiIndex m = sum;
        m.v[d + i] = static_cast<std::int8_t>(m.v[d + i] - 1);
        r.add_term(m, cplx(0.0, w_) * cc);
      }
      // u-v pairs: f_{u_j} g_{v_j} - f_{v_j} g_{u_j}
      for (int j = 0; j < d0; ++j) {
        const int ua = ma.v[zoff + j], va = ma.v[zoff + d0 + j];
        const int ub = mb.v[zoff + j], vb = mb.v[zoff + d0 + j];
        const double w_ = double(ua) * vb - double(va) * ub;
        if (w_ == 0.0) continue;
        MultiIndex m = sum;
        m.v[zoff + j] = static_cast<std::int8_t>(m.v[zoff + j] - 1);
        m.v[zoff + d0 + j] = static_cast<std::int8_t>(m.v[zoff + d0 + j] - 1);
        r.add_term(m, w_ * cc);
      }
    }
  }
  r.prune();
  return r;
}

Series lie_transform(const Series& H, const Series& F, double eps, int order, const LieOptions& opt) {
  require_same_geometry(H, F);
  if (order < 0) throw ConfigError("lie_transform: negative order");
  if (order > opt.hard_cap) throw ConfigError("lie_transform: order exceeds hard cap");
  Series acc = opt.truncation ? H.retruncated(*opt.truncation) : H;
  if (order == 0 || eps == 0.0 || F.empty()) return acc;
  Series term = acc;
  for (int m = 1; m <= order; ++m) {
    term = opt.truncation ? poisson_bracket(term, F, *opt.truncation) : poisson_bracket(term, F);
    if (term.empty()) break;
    Series scaled = cplx(std::pow(eps, m) * inv_factorial(m)) * term;
    acc = acc + scaled;
  }
  acc.prune();
  return acc;
}

bool is_ansatz_shape(const MultiIndex& m, const PhaseGeometry& g) {
  const int jd = y_degree(m, g), qd = z_degree(m, g);
  if (jd == 0 && qd <= 2) return true;
  return jd == 1 && qd == 0;
}

CutoffResult cutoff(const Series& P, int Kplus) {
  if (Kplus < 1) throw ConfigError("cutoff: Kplus must be >= 1");
  const PhaseGeometry& g = P.geometry();
  CutoffResult out{Series(g, std::min(P.kmax(), Kplus), std::min(P.degmax(), 2)),
                   Series(g, P.kmax(), P.degmax())};
  out.tail.log() = P.log();
  for (const auto& [m, c] : P.terms()) {
    if (k_sup(m, g) <= Kplus && is_ansatz_shape(m, g))
      out.R.set_term(m, c);
    else
      out.tail.set_term(m, c);
  }
  return out;
}

Series average_over_angles(const Series& P) {
  const PhaseGeometry& g = P.geometry();
  Series r(g, 0, P.degmax());
  r.log() = P.log();
  for (const auto& [m, c] : P.terms())
    if (k_is_zero(m, g)) r.set_term(m, c);
  return r;
}

Series k_nonzero_part(const Series& P) {
  const PhaseGeometry& g = P.geometry();
  Series r(g, P.kmax(), P.degmax());
  r.log() = P.log();
  for (const auto& [m, c] : P.terms())
    if (!k_is_zero(m, g)) r.set_term(m, c);
  return r;
}

bool is_real(const Series& f, double tol) {
  const PhaseGeometry& g = f.geometry();
  for (const auto& [m, c] : f.terms()) {
    cplx partner = f.coeff(negate_k(m, g));
    if (std::abs(partner - std::conj(c)) > tol * std::max(1.0, std::abs(c))) return false;
  }
  return true;
}

Series real_symmetrized(const Series& f) {
  const PhaseGeometry& g = f.geometry();
  Series r(g, f.kmax(), f.degmax());
  r.log() = f.log();
  for (const auto& [m, c] : f.terms()) {
    r.add_term(m, 0.5 * c);
    r.add_term(negate_k(m, g), 0.5 * std::conj(c));
  }
  r.prune();
  return r;
}

cplx evaluate(const Series& f, std::span<const double> x, std::span<const double> y,
              std::span<const double> z) {
  const PhaseGeometry& g = f.geometry();
  if (static_cast<int>(x.size()) != g.d || static_cast<int>(y.size()) != g.d ||
      static_cast<int>(z.size()) != g.nz())
    throw ConfigError("evaluate: point dimension mismatch");
  cplx s{};
  for (const auto& [m, c] : f.terms()) {
    double phase = 0.0;
    for (int i = 0; i < g.d; ++i) phase += kcomp(m, i) * x[i];
    double mono = 1.0;
    for (int i = 0; i < g.d; ++i) mono *= std::pow(y[i], jcomp(m, g, i));
    for (int i = 0; i < g.nz(); ++i) mono *= std::pow(z[i], qcomp(m, g, i));
    s += c * mono * cplx(std::cos(phase), std::sin(phase));
  }
  return s;
}

double max_abs_coeff(const Series& f) {
  double r = 0.0;
  for (const auto& [m, c] : f.terms()) r = std::max(r, std::abs(c));
  return r;
}

double l1_mass(const Series& f) {
  double r = 0.0;
  for (const auto& [m, c] : f.terms()) r += std::abs(c);
  return r;
}

Series constant_series(const PhaseGeometry& g, cplx c, int kmax, int degmax) {
  Series r(g, kmax, degmax);
  r.add_term(MultiIndex{}, c);
  return r;
}

Series fourier_mode(const PhaseGeometry& g, std::span<const int> k, cplx c, int kmax, int degmax) {
  std::vector<int> j(g.d, 0), q(g.nz(), 0);
  int ks = 0;
  for (int v : k) ks = std::max(ks, std::abs(v));
  Series r(g, kmax < 0 ? ks : kmax, degmax);
  r.add_term(k, j, q, c);
  return r;
}

Series linear_y(const PhaseGeometry& g, std::span<const double> w, int degmax) {
  if (static_cast<int>(w.size()) != g.d) throw ConfigError("linear_y: size mismatch");
  Series r(g, 0, std::max(1, degmax));
  for (int i = 0; i < g.d; ++i) {
    MultiIndex m;
    m.v[g.d + i] = 1;
    r.add_term(m, w[i]);
  }
  return r;
}

Series quadratic_z(const PhaseGeometry& g, const std::vector<double>& M, int degmax) {
  const int n = g.nz();
  if (static_cast<int>(M.size()) != n * n) throw ConfigError("quadratic_z: size mismatch");
  Series r(g, 0, std::max(2, degmax));
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      MultiIndex m;
      m.v[2 * g.d + a] += 1;
      m.v[2 * g.d + b] += 1;
      double c = (a == b) ? 0.5 * M[a * n + a] : 0.5 * (M[a * n + b] + M[b * n + a]);
      r.add_term(m, c);
    }
  }
  r.prune();
  return r;
}

Series random_series(const PhaseGeometry& g, int kmax, int degmax, int nterms, std::uint64_t seed,
                     bool real) {
  Series r(g, kmax, degmax);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> kd(-kmax, kmax);
  std::uniform_int_distribution<int> dd(0, degmax);
  std::uniform_int_distribution<int> slot(0, std::max(0, g.d + g.nz() - 1));
  std::uniform_real_distribution<double> mag(0.0, 1.0), ph(-3.141592653589793, 3.141592653589793);
  for (int t = 0; t < nterms; ++t) {
    MultiIndex m;
    for (int i = 0; i < g.d; ++i) m.v[i] = static_cast<std::int8_t>(kd(rng));
    const int deg = dd(rng);
    for (int e = 0; e < deg; ++e) {
      int s = slot(rng);
      int pos = s < g.d ? g.d + s : 2 * g.d + (s - g.d);
      m.v[pos] = static_cast<std::int8_t>(m.v[pos] + 1);
    }
    cplx c = std::polar(1.0 - mag(rng), ph(rng));
    if (real && k_is_zero(m, g)) c = cplx(c.real(), 0.0);
    r.add_term(m, c);
    if (real && !k_is_zero(m, g)) r.add_term(negate_k(m, g), std::conj(c));
  }
  r.prune();
  return r;
}

}  // namespace kamq
