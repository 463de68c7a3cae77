#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "kamq/gevrey.hpp"
#include "kamq/series.hpp"

namespace kamq {

using IntMatrix = Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>;
using IntVector = Eigen::Matrix<long long, Eigen::Dynamic, 1>;

// K0 = (K*, K'); K' holds the generators as columns. det K0 = +1.
struct ResonanceModule {
  int l = 0;
  int d0 = 0;
  IntMatrix generators;  // l x d0
  IntMatrix completion;  // l x d
  IntMatrix K0;          // l x l
  IntMatrix K0_inverse;

  int d() const { return l - d0; }
};

// Rows of `generators` are the lattice vectors tau_1..tau_{d0}.
ResonanceModule unimodular_completion(const std::vector<std::vector<int>>& generators, int l);

// Modes of P0 (geometry (l, 0)) that lie in the module, in the original coordinates.
Series resonant_part(const Series& P0, const ResonanceModule& module);

// h0(phi) = sum_{k in g} P_k e^{i<k,x>} at y = y0, re-indexed by phi = K'^T x.
// Geometry of the result is (d0, 0).
Series resonant_average(const Series& P0, const ResonanceModule& module);

// Pull-back under theta = K0^T x, y = K0 Y. Canonical, so brackets commute with it.
Series to_module_coordinates(const Series& P, const ResonanceModule& module, int degmax);

struct CriticalPoint {
  Eigen::VectorXd phi;
  Eigen::MatrixXd hessian;
  double value = 0.0;
  bool nondegenerate = false;
};

struct CriticalPointSearch {
  std::vector<CriticalPoint> points;
  int newton_failures = 0;
  bool degenerate_family = false;
};

// h0 in geometry (d0, 0). Seeds on a grid^{d0} lattice, Newton refinement, dedup mod 2 pi.
CriticalPointSearch critical_points(const Series& h0, int d0, int grid = 64);

// Taylor data of H0 at y0: value, gradient omega(y0), Hessian, optional third derivatives.
struct TaylorData {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
  std::vector<double> third;  // l^3 entries, row-major d^3 H0 / dy_a dy_b dy_c; empty for none
};

struct ReduceOptions {
  double epsilon = 0.0;
  double action_scaling_exponent = 0.5;
  int kmax = 8;
  int degmax = 4;
  int averaging_order = 2;
  double gamma = 0.05;
  std::optional<ApproximationFunction> delta;  // divisor check for the averaging step
  std::optional<int> critical_index;           // default: minimizer of h0
  double resonance_tol = 1e-10;
  int critical_grid = 64;
};

struct ReductionDiagnostics {
  double min_divisor = 0.0;
  double gamma11_norm = 0.0;
  double gamma12_norm = 0.0;
  double hessian_det = 0.0;
  double gamma22_det = 0.0;
  double V0_det = 0.0;
  CriticalPointSearch critical;
  TruncationLog truncation;
};

// H1 = energy_offset + epsilonN0 + <omega1, y> + (eps/2) <z, M1 z> + Rterm + P1.
// Rterm and P1 are stored with their eps factor included.
struct ReducedHamiltonian {
  PhaseGeometry geometry;
  double epsilon = 0.0;
  double energy_offset = 0.0;
  double epsilonN0 = 0.0;
  Eigen::VectorXd omega;   // K*^T omega(y0)
  Eigen::VectorXd omega1;
  Eigen::MatrixXd U0, V0;
  Eigen::MatrixXd M;       // diag(U0, V0)
  Eigen::MatrixXd M1;
  Eigen::VectorXd phi0;
  Series Rterm;
  Series P1;
  ReductionDiagnostics diagnostics;
};

// P0 lives in geometry (l, 0) with y measured from y0.
ReducedHamiltonian reduce(const TaylorData& H0, const Series& P0, const ResonanceModule& module,
                          const Eigen::VectorXd& y0, const ReduceOptions& opt);

}  // namespace kamq
