#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "kamq/quantize.hpp"

namespace kamq {

// coef * prod_i (h n_i)^{powers_i} on torus plane waves.
struct TorusTerm {
  double coef = 0.0;
  std::vector<int> powers;
};

// amp * cos<k,x> (or sin) times the Weyl quantization of z^zpow, |zpow| <= 2; z = (u, hD_u).
struct Coupling {
  double amp = 0.0;
  std::vector<int> k;
  bool sine = false;
  std::vector<int> zpow;  // empty: no oscillator factor
};

// H = H0(hD_x) + (1/2) Op(z^T S0 z) + eps [ (1/2) Op(z^T S z) + sum couplings ].
struct SymbolSpec {
  int d = 1;
  int d0 = 0;
  std::vector<TorusTerm> h0;
  Eigen::MatrixXd S0;  // 2 d0 x 2 d0, may be empty
  Eigen::MatrixXd S;
  std::vector<Coupling> couplings;
  std::string provenance;
};

// Torus modes |n_i| <= Nt, Hermite levels m_j < Nh. Torus index varies slowest.
struct OracleBasis {
  int d = 1, d0 = 0, Nt = 0, Nh = 1;
  std::size_t torus_size() const;
  std::size_t osc_size() const;
  std::size_t size() const { return torus_size() * osc_size(); }
  std::vector<int> torus_mode(std::size_t idx) const;
  std::vector<int> hermite_levels(std::size_t idx) const;
  // -1 when outside the basis.
  long long index(const std::vector<int>& n, const std::vector<int>& m) const;
};

struct ModelOperator {
  OracleBasis basis;
  double h = 0.0;
  double epsilon = 0.0;
  Eigen::MatrixXcd matrix;
  bool real = true;
  std::string provenance;
};

ModelOperator build_operator(const SymbolSpec& spec, double h, double epsilon, int Nt, int Nh);

struct EigenLabel {
  std::vector<int> torus;
  std::vector<int> hermite;
  double weight = 0.0;
};

struct Diagonalization {
  Eigen::VectorXd values;      // ascending
  Eigen::MatrixXcd vectors;    // columns; empty unless requested
  std::vector<EigenLabel> labels;
  double max_residual = 0.0;   // relative, over the spot-checked pairs
};

Diagonalization diagonalize(const ModelOperator& op, bool vectors = false, std::size_t cap = 4096,
                            std::uint64_t seed = 1);

struct Cluster {
  double center = 0.0;
  double width = 0.0;
  std::vector<double> members;
};

struct ClusterReport {
  std::vector<Cluster> clusters;       // oracle side
  std::vector<Cluster> predicted;
  std::vector<std::pair<int, int>> matched;  // (oracle cluster, predicted cluster)
  double max_center_error = 0.0;
  double max_width_error = 0.0;
  bool count_mismatch = false;
};

// Consecutive values closer than threshold share a cluster.
std::vector<Cluster> cluster_by_gap(std::vector<double> values, double threshold);

ClusterReport match_spectrum(const std::vector<double>& eigs, const std::vector<double>& predicted,
                             double threshold);
// threshold = gap_factor (eps/2) min(lambda, lambda~).
ClusterReport match_spectrum(const std::vector<double>& eigs, const SpectrumPrediction& prediction,
                             double gap_factor);

struct ComparisonRow {
  double E_pred = 0.0;
  double E_oracle = 0.0;
  double abs_diff = 0.0;
  int cluster_id = 0;
};

// Pairs prediction entries with eigenpairs whose dominant label is (n_y, n_u); interior means
// |n_i| <= Nt - margin and Hermite levels below keep_fraction * Nh.
std::vector<ComparisonRow> compare_labeled(const SpectrumPrediction& pred, const Diagonalization& diag,
                                           const OracleBasis& basis, int margin, double keep_fraction = 0.8);

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows);

}  // namespace kamq
