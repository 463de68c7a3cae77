#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kamq/gevrey.hpp"

namespace kamq {

// omega in [0,1]^l lies in the zone when |<omega,k>| <= beta, or |det A1(<omega,k>, M)| <= threshold_A1,
// or |det A2(<omega,k>, M)| <= threshold_A2. Empty M disables the determinant conditions.
struct ZoneSpec {
  std::vector<int> k;
  double beta = 0.0;
  Eigen::MatrixXd M;
  double threshold_A1 = 0.0;
  double threshold_A2 = 0.0;
};

// Thresholds (gamma/Delta(|k|_1))^{2 d0} and (gamma/Delta(|k|_1))^{4 d0^2}.
ZoneSpec make_zone(const std::vector<int>& k, double beta, const Eigen::MatrixXd& M, double gamma,
                   const ApproximationFunction& delta);

bool in_zone(const ZoneSpec& z, const double* omega);

struct MCEstimate {
  double estimate = 0.0;
  double ci95 = 0.0;
  std::uint64_t samples = 0;
};

// Fixed-size chunks with per-chunk seeds: the result does not depend on the thread count.
MCEstimate zone_measure_mc(const ZoneSpec& spec, std::uint64_t samples, std::uint64_t seed);

// Exact measure of {omega in [0,1]^2 : |<omega,k>| <= beta}, by polygon clipping.
double strip_measure_2d(const std::vector<int>& k, double beta);

struct ExcludedSet {
  MCEstimate mc;
  int modes = 0;
  // gamma1 sum_{half lattice} 2 / (|k|_inf Delta(|k|_1)); bounds the union measure.
  double majorant = 0.0;
  // Smallest C with shell sums <= C m^{l-1} / Delta(m) for m <= Kmax.
  double C = 0.0;
  // gamma1 sum_{m <= Kmax} C m^{d-1} / Delta(m).
  double majorant_display = 0.0;
};

// Union over 0 < |k|_inf <= Kmax of zones with beta = gamma1 / Delta(|k|_1), omega in [0,1]^l.
ExcludedSet excluded_set_measure(double gamma1, const ApproximationFunction& delta, int Kmax, int l, int d,
                                 std::uint64_t samples, std::uint64_t seed);

struct Summability {
  bool converges = false;
  double partial = 0.0;
  double tail_bound = 0.0;   // upper bound on the remaining terms
  double tail_lower = 0.0;
  double estimate = 0.0;     // partial + midpoint of the tail bounds
  long long terms = 0;
};

// sum_{m >= 1} m^{d-1} / Delta(m).
Summability summability_check(const ApproximationFunction& delta, int d, double tol,
                              long long max_terms = 10000000);

struct MeasureRow {
  std::string k;  // mode or "union"
  double beta = 0.0;
  double estimate = 0.0;
  double ci95 = 0.0;
  double exact = -1.0;  // negative when unknown
  double majorant = 0.0;
};

std::string measure_rows_to_csv(const std::vector<MeasureRow>& rows);

}  // namespace kamq
