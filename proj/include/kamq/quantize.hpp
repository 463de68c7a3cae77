#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "kamq/kam.hpp"

namespace kamq {

struct QuantumNumbers {
  std::vector<int> n_y;
  std::vector<int> n_u;
  std::vector<int> n_v;
  std::vector<int> maslov;
  auto operator<=>(const QuantumNumbers&) const = default;
};

// PaperLiteral: (eps/2)(sum lambda_j (n_u + 1/2) + sum lambda~_j (n_v + 1/2)).
// OscillatorStandard: sum_j h nu_j (n_j + 1/2), nu_j = eps sqrt(eig(U V)); n_v is unused.
enum class ResonantScaling { PaperLiteral, OscillatorStandard };

ResonantScaling parse_scaling(const std::string& s);
std::string to_string(ResonantScaling s);

struct RemainderConstants {
  double c = 1.0;
  double C = 1.0;
  double sign = -1.0;  // exponent of h is sign / (alpha - 1)
};

// C eps exp(-c h^{sign/(alpha-1)}).
double remainder_bound(double h, double epsilon, double alpha, const RemainderConstants& k);

struct SpectrumEntry {
  QuantumNumbers qn;
  double E = 0.0;
  int cluster_id = 0;
};

struct SpectrumPrediction {
  std::vector<SpectrumEntry> entries;  // ascending in E
  double epsilon = 0.0;
  double h = 0.0;
  double remainder_bound = 0.0;
  Eigen::VectorXd lambdas;        // eig(U), ascending
  Eigen::VectorXd lambdas_tilde;  // eig(V), ascending
  Eigen::VectorXd nu;             // eps sqrt(eig(U V)) for the oscillator variant
  ResonantScaling scaling = ResonantScaling::PaperLiteral;
};

struct PredictOptions {
  ResonantScaling scaling = ResonantScaling::PaperLiteral;
  int ny_max = 4;          // 0 <= n_y^j <= ny_max
  int nres_max = 4;        // 0 <= n_u^j, n_v^j <= nres_max
  std::optional<double> E_lo, E_hi;
  bool include_action_remainder = false;  // adds Rterms(y = I_n, z = 0)
  double alpha = 2.0;
  RemainderConstants remainder;
};

SpectrumPrediction predict_spectrum(const NormalFormState& state, double h, const std::vector<int>& maslov,
                                    const PredictOptions& opt);

// Brute-force argmin of (n+1) log C + (alpha-1) log n! + n log delta over 0 <= n <= nmax.
int optimal_n_bruteforce(double C, double delta, double alpha, int nmax = 200);
// (C delta)^{-1/(alpha-1)}.
double optimal_n_stirling(double C, double delta, double alpha);

struct ActionIndexSet {
  std::vector<std::vector<int>> m;
  bool empty_input = false;
};

// All m with min_i |E_i - h (m + maslov/4)| <= L h (Euclidean), by box search.
ActionIndexSet action_index_set(const std::vector<Eigen::VectorXd>& Egamma, double h, double L,
                                const std::vector<int>& maslov);

std::string spectrum_to_csv(const SpectrumPrediction& sp);

}  // namespace kamq
