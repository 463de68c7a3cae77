#include "kamq/gevrey.hpp"

#include <algorithm>
// fpclassify must precede pchip, which calls isnan unqualified.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "kamq/errors.hpp"

namespace kamq {

namespace {

constexpr double kE = 2.718281828459045;

void require_alpha(double alpha) {
  if (!(alpha > 1.0)) throw ConfigError("Gevrey index alpha must exceed 1");
}

}  // namespace

ApproximationFunction::ApproximationFunction(double alpha, double varsigma, std::string name, LogFn f)
    : alpha_(alpha), varsigma_(varsigma), name_(std::move(name)), logf_(std::move(f)) {
  require_alpha(alpha);
  if (!(varsigma > 0.0)) throw ConfigError("varsigma must be positive");
}

ApproximationFunction ApproximationFunction::power_log(double alpha, double a, double b, double varsigma) {
  if (a < 0.0 || b < 0.0 || (a == 0.0 && b == 0.0))
    throw ConfigError("power_log needs a, b >= 0, not both zero");
  return ApproximationFunction(alpha, varsigma, "power_log", [a, b](double t) {
    double s = a * std::log1p(t);
    if (b != 0.0) s += b * std::log(std::log(kE + t));
    return s;
  });
}

ApproximationFunction ApproximationFunction::subgevrey_exp(double alpha, double beta, double varsigma) {
  require_alpha(alpha);
  if (!(beta > 0.0) || !(beta < 1.0 / alpha)) throw ConfigError("subgevrey_exp needs 0 < beta < 1/alpha");
  return ApproximationFunction(alpha, varsigma, "subgevrey_exp",
                               [beta](double t) { return std::pow(t, beta); });
}

ApproximationFunction ApproximationFunction::tabulated(double alpha, std::vector<double> t,
                                                       std::vector<double> delta, double varsigma) {
  if (t.size() != delta.size() || t.size() < 3) throw ConfigError("tabulated Delta needs >= 3 samples");
  if (t.front() != 0.0) throw ConfigError("tabulated Delta must start at t = 0");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw ConfigError("tabulated Delta abscissae must increase");
  std::vector<double> y(delta.size());
  for (std::size_t i = 0; i < delta.size(); ++i) {
    if (!(delta[i] > 0.0)) throw ConfigError("tabulated Delta values must be positive");
    y[i] = std::log(delta[i]);
  }
  const double tn = t.back(), tp = t[t.size() - 2];
  const double yn = y.back(), yp = y[y.size() - 2];
  const double slope = (yn - yp) / std::log(tn / tp);
  auto interp = std::make_shared<boost::math::interpolators::pchip<std::vector<double>>>(std::move(t),
                                                                                          std::move(y));
  return ApproximationFunction(alpha, varsigma, "tabulated", [interp, tn, yn, slope](double s) {
    if (s <= tn) return (*interp)(s);
    return yn + slope * std::log(s / tn);
  });
}

ApproximationFunction ApproximationFunction::from_log(double alpha, LogFn log_delta, double varsigma,
                                                      std::string name) {
  return ApproximationFunction(alpha, varsigma, std::move(name), std::move(log_delta));
}

ApproximationFunction ApproximationFunction::unit(double alpha) {
  return ApproximationFunction(alpha, 1.0, "unit", [](double) { return 0.0; });
}

double ApproximationFunction::operator()(double t) const { return std::exp(logf_(t)); }

double ApproximationFunction::log_value(double t) const { return logf_(t); }

double ApproximationFunction::inverse(double v) const {
  if (!(v > 0.0)) return 0.0;
  const double target = std::log(v);
  if (logf_(0.0) >= target) return 0.0;
  double lo = 0.0, hi = 1.0;
  int guard = 0;
  while (logf_(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 2000 || !std::isfinite(hi)) return std::numeric_limits<double>::infinity();
  }
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    double mid = 0.5 * (lo + hi);
    (logf_(mid) < target ? lo : hi) = mid;
  }
  return hi;
}

TailIntegral integrate_to_infinity(const std::function<double(double)>& f, double a, double rel_tol,
                                   int max_panels) {
  using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
  TailIntegral out;
  double sum = 0.0, err = 0.0;
  double lo = a, hi = a > 0.0 ? 2.0 * a : 1.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  int decaying = 0;
  double worst_ratio = 0.0;
  for (int p = 0; p < max_panels; ++p) {
    double e = 0.0;
    double piece = GK::integrate(f, lo, hi, 6, rel_tol * 1e-3, &e);
    if (!std::isfinite(piece)) return out;
    sum += piece;
    err += e;
    out.panels = p + 1;
    if (std::isfinite(prev) && prev != 0.0) {
      double ratio = std::abs(piece / prev);
      if (ratio < 1.0) {
        ++decaying;
        worst_ratio = std::max(worst_ratio, ratio);
      } else {
        decaying = 0;
        worst_ratio = 0.0;
      }
      if (decaying >= 4) {
        double tail = std::abs(piece) * worst_ratio / (1.0 - worst_ratio);
        if (tail <= rel_tol * std::abs(sum) || (sum == 0.0 && tail == 0.0)) {
          out.value = sum;
          out.abs_error = err + tail;
          out.converged = true;
          return out;
        }
      }
    } else if (std::isfinite(prev) && prev == 0.0 && piece == 0.0 && p > 8) {
      out.value = sum;
      out.abs_error = err;
      out.converged = true;
      return out;
    }
    prev = piece;
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi) || hi > 1e300) break;
  }
  out.value = sum;
  out.abs_error = err;
  return out;
}

AdmissibilityReport check_admissible(const ApproximationFunction& delta, const AdmissibilityOptions& opt) {
  AdmissibilityReport rep;
  const double alpha = delta.alpha();
  const double s0 = delta.varsigma();
  rep.starts_at_least_one = delta.log_value(0.0) >= -1e-15;

  std::vector<double> grid;
  const double decades = std::log10(opt.t_max / s0);
  const int n = std::max(2, static_cast<int>(std::ceil(decades * opt.nodes_per_decade)) + 1);
  for (int i = 0; i < n; ++i) grid.push_back(s0 * std::pow(10.0, decades * i / (n - 1)));

  // Increasing on [0, varsigma] as well as on the grid.
  std::vector<double> pts;
  for (int i = 0; i <= 16; ++i) pts.push_back(s0 * i / 16.0);
  pts.insert(pts.end(), grid.begin() + 1, grid.end());
  rep.strictly_increasing = true;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (!(delta.log_value(pts[i]) > delta.log_value(pts[i - 1]))) {
      rep.strictly_increasing = false;
      rep.detail += "not strictly increasing near t=" + std::to_string(pts[i]) + "; ";
      break;
    }
  }
  const double last = delta.log_value(opt.t_max), prev_decade = delta.log_value(opt.t_max / 10.0);
  rep.unbounded = last - prev_decade > 1e-3;
  if (!rep.unbounded) rep.detail += "growth over the last decade too small; ";

  // Eventually decreasing: non-increasing beyond the grid maximum, which sits before the last
  // two decades, and the tail value is below half the maximum.
  rep.log_ratio_decreasing = true;
  auto ratio = [&](double t) { return delta.log_value(t) / std::pow(t, 1.0 / alpha); };
  std::size_t peak = 0;
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (ratio(grid[i]) > ratio(grid[peak])) peak = i;
  const std::size_t two_decades = static_cast<std::size_t>(2 * opt.nodes_per_decade);
  if (grid.size() > two_decades && peak + two_decades >= grid.size()) {
    rep.log_ratio_decreasing = false;
    rep.detail += "log Delta / t^{1/alpha} still growing near t=" + std::to_string(grid[peak]) + "; ";
  }
  for (std::size_t i = peak + 1; rep.log_ratio_decreasing && i < grid.size(); ++i) {
    double a = ratio(grid[i - 1]), b = ratio(grid[i]);
    if (b > a * (1.0 + 1e-12) + 1e-300) {
      rep.log_ratio_decreasing = false;
      rep.detail += "log Delta / t^{1/alpha} increases near t=" + std::to_string(grid[i]) + "; ";
    }
  }
  if (rep.log_ratio_decreasing && !(ratio(grid.back()) < 0.5 * ratio(grid[peak]))) {
    rep.log_ratio_decreasing = false;
    rep.detail += "log Delta / t^{1/alpha} does not decay; ";
  }

  auto ti = integrate_to_infinity(
      [&](double t) { return delta.log_value(t) / std::pow(t, 1.0 + 1.0 / alpha); }, s0, opt.rel_tol);
  rep.integral_finite = ti.converged;
  rep.integral = ti.value;
  if (!ti.converged) rep.detail += "tail integral did not converge; ";

  rep.ok = rep.starts_at_least_one && rep.strictly_increasing && rep.unbounded &&
           rep.log_ratio_decreasing && rep.integral_finite;
  return rep;
}

GammaResult gamma_extremal(int r, int n, double eta, const ApproximationFunction& delta) {
  if (!(eta > 0.0)) throw ConfigError("gamma_extremal needs eta > 0");
  if (r < 0 || n < 0) throw ConfigError("gamma_extremal needs r, n >= 0");
  const double inv_alpha = 1.0 / delta.alpha();
  auto g = [&](double t) {
    double s = -eta * std::pow(t, inv_alpha);
    if (r) s += r * std::log1p(t);
    if (n) s += n * delta.log_value(t);
    return s;
  };

  // Coarse grid in s = log10 t: t = 0 plus 64 nodes per decade over [1e-8, 1e300].
  constexpr int kPerDecade = 64;
  constexpr double kLo = -8.0, kHi = 300.0;
  const int N = static_cast<int>((kHi - kLo) * kPerDecade) + 1;
  std::vector<double> s(N), v(N);
  for (int i = 0; i < N; ++i) {
    s[i] = kLo + double(i) / kPerDecade;
    v[i] = g(std::pow(10.0, s[i]));
  }
  GammaResult res;
  const double g0 = g(0.0);
  int imax = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  if (imax >= N - kPerDecade && v[N - 1] >= v[N - 2]) {
    res.diverged = true;
    res.value = std::numeric_limits<double>::infinity();
    res.log_value = std::numeric_limits<double>::infinity();
    res.argmax = std::numeric_limits<double>::infinity();
    return res;
  }

  // Up to eight local maxima, refined by golden section in log t.
  std::vector<int> peaks;
  for (int i = 1; i + 1 < N; ++i)
    if (v[i] >= v[i - 1] && v[i] >= v[i + 1]) peaks.push_back(i);
  std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return v[a] > v[b]; });
  if (peaks.size() > 8) peaks.resize(8);

  double best = g0, best_t = 0.0;
  if (v[0] > best) {
    best = v[0];
    best_t = std::pow(10.0, s[0]);
  }
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i : peaks) {
    double a = s[i - 1], b = s[i + 1];
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = g(std::pow(10.0, c)), fd = g(std::pow(10.0, d));
    for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = g(std::pow(10.0, c));
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = g(std::pow(10.0, d));
      }
    }
    double tm = std::pow(10.0, 0.5 * (a + b));
    double fm = g(tm);
    if (fm > best) {
      best = fm;
      best_t = tm;
    }
    if (v[i] > best) {
      best = v[i];
      best_t = std::pow(10.0, s[i]);
    }
  }
  res.log_value = best;
  res.value = std::exp(best);
  res.argmax = best_t;
  return res;
}

LemmaBaResult lemma_ba_bound(const ApproximationFunction& delta, double kappa, double T, int n, int r,
                             double rel_tol) {
  if (!(kappa > 1.0 && kappa <= 2.0)) throw ConfigError("lemma_ba_bound needs kappa in (1, 2]");
  if (!(T >= delta.varsigma())) throw ConfigError("lemma_ba_bound needs T >= varsigma");
  if (n < 0 || r < 0) throw ConfigError("lemma_ba_bound needs n, r >= 0");
  const double p = 1.0 + 1.0 / delta.alpha();
  auto ia = integrate_to_infinity([&](double t) { return delta.log_value(t) / std::pow(t, p); }, T, rel_tol);
  auto ic = integrate_to_infinity([&](double t) { return std::log1p(t) / std::pow(t, p); }, T, rel_tol);
  LemmaBaResult out;
  const double lk = std::log(kappa);
  out.a = ia.value / lk;
  out.c = ic.value / lk;
  out.converged = ia.converged && ic.converged;
  out.eta = n * out.a + r * out.c;
  out.log_bound = out.eta * std::pow(T, 1.0 / delta.alpha());
  out.bound = std::exp(out.log_bound);
  return out;
}

double majorant_norm(const Series& f, const GevreyWeights& w, double radius) {
  if (!(radius > 0.0)) throw ConfigError("majorant_norm needs radius > 0");
  const PhaseGeometry& g = f.geometry();
  const double ia = 1.0 / w.alpha;
  double s = 0.0;
  for (const auto& [m, c] : f.terms()) {
    const int k = k_l1(m, g);
    const int deg = degree(m, g);
    double wt = std::exp(w.rho * std::pow(double(k), ia) + w.sigma * std::pow(double(deg), ia));
    s += std::abs(c) * wt * std::pow(radius, deg);
  }
  return s;
}

BracketConstantReport measure_bracket_constant(const PhaseGeometry& g, const GevreyWeights& w,
                                               double rho_prime, double sigma_prime, int samples,
                                               std::uint64_t seed, int kmax, int degmax, int nterms,
                                               double radius) {
  if (!(rho_prime < w.rho && sigma_prime < w.sigma)) throw ConfigError("weight losses must be positive");
  BracketConstantReport rep;
  const GevreyWeights wp{rho_prime, sigma_prime, w.alpha};
  const double loss = (w.rho - rho_prime) * (w.sigma - sigma_prime);
  double total = 0.0;
  for (int s = 0; s < samples; ++s) {
    Series f = random_series(g, kmax, degmax, nterms, seed + 2 * std::uint64_t(s));
    Series h = random_series(g, kmax, degmax, nterms, seed + 2 * std::uint64_t(s) + 1);
    const double nf = majorant_norm(f, w, radius), nh = majorant_norm(h, w, radius);
    if (nf == 0.0 || nh == 0.0) continue;
    const double ratio = majorant_norm(poisson_bracket(f, h), wp, radius) * loss / (nf * nh);
    rep.C = std::max(rep.C, ratio);
    total += ratio;
    ++rep.samples;
  }
  rep.mean_ratio = rep.samples ? total / rep.samples : 0.0;
  return rep;
}

}  // namespace kamq
