#include "kamq/freqsets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "kamq/errors.hpp"
#include "kamq/kam.hpp"
#include "kamq/parallel.hpp"

namespace kamq {

namespace {

constexpr std::uint64_t kChunk = 8192;

std::mt19937_64 chunk_rng(std::uint64_t seed, std::uint64_t chunk) {
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(chunk), static_cast<std::uint32_t>(chunk >> 32)};
  return std::mt19937_64(sq);
}

// Counts hits of pred over uniform samples in [0,1]^l.
template <class Pred>
MCEstimate run_mc(int l, std::uint64_t samples, std::uint64_t seed, Pred pred) {
  MCEstimate out;
  out.samples = samples;
  if (samples == 0) return out;
  const std::uint64_t nchunks = (samples + kChunk - 1) / kChunk;
  std::vector<std::uint64_t> hits(nchunks, 0);
  parallel_for(nchunks, [&](std::size_t c) {
    auto rng = chunk_rng(seed, c);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const std::uint64_t n = std::min<std::uint64_t>(kChunk, samples - c * kChunk);
    std::vector<double> w(l);
    std::uint64_t h = 0;
    for (std::uint64_t s = 0; s < n; ++s) {
      for (int i = 0; i < l; ++i) w[i] = U(rng);
      if (pred(w.data())) ++h;
    }
    hits[c] = h;
  });
  std::uint64_t total = 0;
  for (auto h : hits) total += h;
  const double p = static_cast<double>(total) / static_cast<double>(samples);
  out.estimate = p;
  out.ci95 = 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  return out;
}

bool half_lattice(const std::vector<int>& k) {
  for (int v : k) {
    if (v > 0) return true;
    if (v < 0) return false;
  }
  return false;
}

std::vector<std::vector<int>> modes_up_to(int l, int K) {
  std::vector<std::vector<int>> out;
  std::vector<int> k(l, -K);
  for (;;) {
    if (half_lattice(k)) out.push_back(k);
    int i = 0;
    while (i < l && ++k[i] > K) {
      k[i] = -K;
      ++i;
    }
    if (i == l) break;
  }
  return out;
}

int sup_norm(const std::vector<int>& k) {
  int m = 0;
  for (int v : k) m = std::max(m, std::abs(v));
  return m;
}

int l1_norm(const std::vector<int>& k) {
  int m = 0;
  for (int v : k) m += std::abs(v);
  return m;
}

}  // namespace

ZoneSpec make_zone(const std::vector<int>& k, double beta, const Eigen::MatrixXd& M, double gamma,
                   const ApproximationFunction& delta) {
  ZoneSpec z{k, beta, M, 0.0, 0.0};
  if (M.size() > 0) {
    const int d0 = static_cast<int>(M.rows()) / 2;
    const double r = gamma / delta(static_cast<double>(l1_norm(k)));
    z.threshold_A1 = std::pow(r, 2.0 * d0);
    z.threshold_A2 = std::pow(r, 4.0 * d0 * d0);
  }
  return z;
}

bool in_zone(const ZoneSpec& z, const double* omega) {
  double kw = 0.0;
  for (std::size_t i = 0; i < z.k.size(); ++i) kw += z.k[i] * omega[i];
  if (std::abs(kw) <= z.beta) return true;
  if (z.M.size() == 0) return false;
  if (std::abs(det_A1(kw, z.M)) <= z.threshold_A1) return true;
  return std::abs(det_A2(kw, z.M)) <= z.threshold_A2;
}

MCEstimate zone_measure_mc(const ZoneSpec& spec, std::uint64_t samples, std::uint64_t seed) {
  if (spec.k.empty() || std::all_of(spec.k.begin(), spec.k.end(), [](int v) { return v == 0; }))
    throw ConfigError("zone_measure_mc: k must be nonzero");
  if (spec.beta < 0.0) throw ConfigError("zone_measure_mc: beta must be nonnegative");
  return run_mc(static_cast<int>(spec.k.size()), samples, seed,
                [&](const double* w) { return in_zone(spec, w); });
}

double strip_measure_2d(const std::vector<int>& k, double beta) {
  if (k.size() != 2) throw ConfigError("strip_measure_2d: k must have two components");
  using P = std::pair<double, double>;
  std::vector<P> poly{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  // Keep a*x + b*y <= c.
  auto clip = [](const std::vector<P>& in, double a, double b, double c) {
    std::vector<P> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
      const P p = in[i], q = in[(i + 1) % in.size()];
      const double fp = a * p.first + b * p.second - c, fq = a * q.first + b * q.second - c;
      if (fp <= 0) out.push_back(p);
      if ((fp < 0 && fq > 0) || (fp > 0 && fq < 0)) {
        const double t = fp / (fp - fq);
        out.push_back({p.first + t * (q.first - p.first), p.second + t * (q.second - p.second)});
      }
    }
    return out;
  };
  poly = clip(poly, k[0], k[1], beta);
  poly = clip(poly, -k[0], -k[1], beta);
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const P p = poly[i], q = poly[(i + 1) % poly.size()];
    a += p.first * q.second - q.first * p.second;
  }
  return std::abs(a) / 2.0;
}

ExcludedSet excluded_set_measure(double gamma1, const ApproximationFunction& delta, int Kmax, int l, int d,
                                 std::uint64_t samples, std::uint64_t seed) {
  if (gamma1 < 0.0 || Kmax < 1 || l < 1 || d < 1) throw ConfigError("excluded_set_measure: bad parameters");
  ExcludedSet out;
  const auto modes = modes_up_to(l, Kmax);
  out.modes = static_cast<int>(modes.size());
  std::vector<ZoneSpec> zones;
  std::vector<double> shell(Kmax + 1, 0.0);
  for (const auto& k : modes) {
    const double dk = delta(static_cast<double>(l1_norm(k)));
    const int m = sup_norm(k);
    zones.push_back({k, gamma1 / dk, {}, 0.0, 0.0});
    shell[m] += 2.0 / (m * dk);
  }
  for (int m = 1; m <= Kmax; ++m) {
    out.majorant += gamma1 * shell[m];
    out.C = std::max(out.C, shell[m] * delta(m) / std::pow(m, l - 1));
  }
  for (int m = 1; m <= Kmax; ++m) out.majorant_display += gamma1 * out.C * std::pow(m, d - 1) / delta(m);
  if (gamma1 == 0.0) {
    out.mc.samples = samples;
    return out;
  }
  out.mc = run_mc(l, samples, seed, [&](const double* w) {
    for (const auto& z : zones)
      if (in_zone(z, w)) return true;
    return false;
  });
  return out;
}

Summability summability_check(const ApproximationFunction& delta, int d, double tol, long long max_terms) {
  if (d < 1 || !(tol > 0.0)) throw ConfigError("summability_check: need d >= 1 and tol > 0");
  Summability out;
  auto term = [&](double m) { return std::exp((d - 1) * std::log(m) - delta.log_value(m)); };
  auto upper = [&](double s) { return std::exp((d - 1) * std::log1p(s) - delta.log_value(s)); };
  auto lower = [&](double s) { return d == 1 ? std::exp(-delta.log_value(s))
                                             : std::exp((d - 1) * std::log(s - 1.0) - delta.log_value(s)); };
  const TailIntegral whole = integrate_to_infinity(upper, 1.0, 1e-10);
  if (!whole.converged) {
    for (long long m = 1; m <= 1000; ++m) out.partial += term(static_cast<double>(m));
    out.terms = 1000;
    out.tail_bound = std::numeric_limits<double>::infinity();
    out.estimate = out.tail_bound;
    return out;
  }
  long long m = 1;
  for (; m <= max_terms; ++m) {
    const double t = term(static_cast<double>(m));
    out.partial += t;
    if (t < tol * out.partial) break;
  }
  out.terms = std::min(m, max_terms);
  const double M = static_cast<double>(out.terms);
  const TailIntegral up = integrate_to_infinity(upper, M, 1e-10);
  const TailIntegral lo = integrate_to_infinity(lower, M + 1.0, 1e-10);
  out.converges = up.converged;
  out.tail_bound = up.value + up.abs_error;
  out.tail_lower = lo.converged ? std::max(0.0, lo.value - lo.abs_error) : 0.0;
  out.estimate = out.partial + 0.5 * (out.tail_bound + out.tail_lower);
  return out;
}

std::string measure_rows_to_csv(const std::vector<MeasureRow>& rows) {
  std::string s = "k,beta,estimate,ci95,exact,majorant\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string ex = "";
    if (r.exact >= 0.0) {
      std::snprintf(buf, sizeof buf, "%.17g", r.exact);
      ex = buf;
    }
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%s,%.17g\n", r.k.c_str(), r.beta, r.estimate, r.ci95,
                  ex.c_str(), r.majorant);
    s += buf;
  }
  return s;
}

}  // namespace kamq
