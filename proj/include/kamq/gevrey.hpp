#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "kamq/series.hpp"

namespace kamq {

// Approximation function Delta with Gevrey index alpha. Evaluation goes through log Delta,
// which stays finite where Delta itself overflows.
class ApproximationFunction {
 public:
  using LogFn = std::function<double(double)>;

  // (1+t)^a log^b(e+t)
  static ApproximationFunction power_log(double alpha, double a, double b, double varsigma = 1.0);
  // exp(t^beta), beta < 1/alpha
  static ApproximationFunction subgevrey_exp(double alpha, double beta, double varsigma = 1.0);
  // Monotone (pchip) interpolation of log Delta through samples; t[0] must be 0.
  // Beyond the last sample log Delta continues as a power law fitted to the last two samples.
  static ApproximationFunction tabulated(double alpha, std::vector<double> t, std::vector<double> delta,
                                         double varsigma);
  static ApproximationFunction from_log(double alpha, LogFn log_delta, double varsigma, std::string name);
  // Delta == 1; not admissible, used as a degenerate stub.
  static ApproximationFunction unit(double alpha);

  double operator()(double t) const;
  double log_value(double t) const;
  // Smallest t >= 0 with Delta(t) >= v, by bisection.
  double inverse(double v) const;

  double alpha() const { return alpha_; }
  double varsigma() const { return varsigma_; }
  const std::string& name() const { return name_; }

 private:
  ApproximationFunction(double alpha, double varsigma, std::string name, LogFn f);
  double alpha_ = 2.0;
  double varsigma_ = 1.0;
  std::string name_;
  LogFn logf_;
};

struct AdmissibilityOptions {
  int nodes_per_decade = 64;
  double t_max = 1e6;
  double rel_tol = 1e-9;
};

struct AdmissibilityReport {
  bool ok = false;
  bool starts_at_least_one = false;
  bool strictly_increasing = false;
  bool unbounded = false;
  bool log_ratio_decreasing = false;
  bool integral_finite = false;
  double integral = 0.0;
  std::string detail;
};

AdmissibilityReport check_admissible(const ApproximationFunction& delta,
                                     const AdmissibilityOptions& opt = {});

struct TailIntegral {
  double value = 0.0;
  double abs_error = 0.0;
  bool converged = false;
  int panels = 0;
};

// Integral of f over [a, inf) on geometric panels [a 2^i, a 2^{i+1}], 15-point Gauss-Kronrod
// each. Converged when the geometric tail estimate drops below rel_tol of the running sum.
TailIntegral integrate_to_infinity(const std::function<double(double)>& f, double a,
                                   double rel_tol = 1e-9, int max_panels = 1000);

struct GammaResult {
  double value = 0.0;      // Gamma_{r,n}(eta)
  double log_value = 0.0;  // log of the supremum
  double argmax = 0.0;
  bool diverged = false;
};

// sup_{t>=0} (1+t)^r Delta(t)^n exp(-eta t^{1/alpha}).
GammaResult gamma_extremal(int r, int n, double eta, const ApproximationFunction& delta);

struct LemmaBaResult {
  double a = 0.0;
  double c = 0.0;
  double eta = 0.0;
  double bound = 0.0;
  double log_bound = 0.0;
  bool converged = false;
};

LemmaBaResult lemma_ba_bound(const ApproximationFunction& delta, double kappa, double T, int n, int r,
                             double rel_tol = 1e-9);

struct GevreyWeights {
  double rho = 1.0;
  double sigma = 1.0;
  double alpha = 2.0;
};

// sum |c| e^{rho |k|_1^{1/alpha}} radius^{|j|+|q|} e^{sigma (|j|+|q|)^{1/alpha}}.
double majorant_norm(const Series& f, const GevreyWeights& w, double radius = 1.0);

struct BracketConstantReport {
  double C = 0.0;        // max observed ratio
  double mean_ratio = 0.0;
  int samples = 0;
};

// Ratio ||{f,g}||_{rho',sigma'} (rho-rho')(sigma-sigma') / (||f||_{rho,sigma} ||g||_{rho,sigma})
// over random real pairs.
BracketConstantReport measure_bracket_constant(const PhaseGeometry& g, const GevreyWeights& w,
                                               double rho_prime, double sigma_prime, int samples,
                                               std::uint64_t seed, int kmax = 3, int degmax = 3,
                                               int nterms = 6, double radius = 1.0);

}  // namespace kamq
