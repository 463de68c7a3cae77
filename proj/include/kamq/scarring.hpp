#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kamq/gevrey.hpp"
#include "kamq/kam.hpp"
#include "kamq/oracle.hpp"

namespace kamq {

// K0(I; eps).
using K0Fn = std::function<double(const Eigen::VectorXd& I, double eps)>;

// e(eps) + <omega(eps), I> + Rterms(y = I) from the stored eps-coefficients; with oscillator_ground,
// adds sum_j h nu_j(eps) / 2, nu_j(eps) = |eps| sqrt(eig(U V)) of M_p.
K0Fn k0_from_state(const NormalFormState& state, bool oscillator_ground = false, double h = 0.0);

struct QuasiEntry {
  std::vector<int> m;
  Eigen::VectorXd I;
  double mu = 0.0;
};

struct QuasiEigenvalueTable {
  double h = 0.0;
  double epsilon = 0.0;
  std::vector<int> maslov;
  std::vector<QuasiEntry> entries;  // lexicographic in m
};

// Entries with I_m = h (m + maslov/4) inside the box [lo, hi].
QuasiEigenvalueTable build_quasi_table(const K0Fn& K0, double h, double epsilon, const std::vector<int>& maslov,
                                       const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);

struct DiffeoReport {
  double min_singular = 0.0;
  Eigen::VectorXd argmin_I;
  double argmin_eps = 0.0;
  double G1 = 0.0;  // min |dI| / |d eta| over sampled pairs
  double G2 = 0.0;  // max |dI| / |d eta|
  bool ok = false;  // min_singular > 0 on the grid
};

// eta(I) = (K0, d_eps K0, ..., d_eps^{d-1} K0) by central differences in eps; Jacobian in I by central
// differences; grid_n points per axis, `pairs` random pairs per eps for G1 and G2.
DiffeoReport local_diffeo_check(const K0Fn& K0, int d, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                const std::vector<double>& eps_grid, int grid_n = 9, int pairs = 10000,
                                std::uint64_t seed = 1);

struct SeparationViolation {
  std::size_t a = 0, b = 0;
  double dI = 0.0;
  double dmu = 0.0;
};

struct SeparationReport {
  double radius = 0.0;     // h Delta^{-1}(C1 h^{-1/2})
  double C2 = 0.0;         // min |dmu| / h^{3/2} over checked pairs; +inf when none
  std::size_t pairs_checked = 0;
  std::vector<SeparationViolation> violations;
};

// Pairs with |I_m - I_m'| <= radius; a pair violates when |dmu| <= C2_required h^{3/2}
// (with no requirement, when the two quasi-eigenvalues coincide).
SeparationReport separation_check(const QuasiEigenvalueTable& table, double C1, const ApproximationFunction& delta,
                                  std::optional<double> C2_required = std::nullopt);

struct EnergyWindow {
  std::vector<int> m;
  double center = 0.0;
  double halfwidth = 0.0;
  int count = 0;
};

struct CensusReport {
  std::vector<EnergyWindow> windows;
  std::vector<std::size_t> Mtilde;  // indices into windows with count < lambda R
  double fraction = 0.0;
  double bound = 0.0;  // 1 - 2 / lambda
  bool pass = false;
  bool empty = false;
};

// Windows [mu_m - h^delta/3, mu_m + h^delta/3]. Throws InvariantError when two windows overlap.
CensusReport window_census(const QuasiEigenvalueTable& table, double delta_exp, const std::vector<double>& eigs,
                           double lambda, double R);

struct TorusMass {
  double mass = 0.0;
  bool empty_window = false;
};

// Squared weight of v on basis states whose torus mode n has |h n - I| <= window.
TorusMass mass_on_torus(const Eigen::VectorXcd& v, const OracleBasis& basis, double h, const Eigen::VectorXd& I,
                        double window);

struct EpsSweep {
  std::vector<double> eps;
  std::vector<int> overlaps;  // overlapping window pairs at each eps
  double fraction = 0.0;      // eps points with at least one overlap
  double scale = 0.0;         // h^{delta - 7/4} / Delta^{-1}(C1 h^{-1/2})
};

// Window overlaps for the fixed index set ms as eps moves over the grid.
EpsSweep eps_sweep(const K0Fn& K0, const std::vector<std::vector<int>>& ms, const std::vector<int>& maslov,
                   double h, double delta_exp, const std::vector<double>& eps_grid, double C1,
                   const ApproximationFunction& delta);

struct GoodSetProxy {
  std::vector<double> eps;
  std::vector<char> good;  // some h in the sequence has no overlaps
  double fraction = 0.0;
  bool pass = false;       // fraction >= 0.9
};

GoodSetProxy good_set_proxy(const K0Fn& K0, const std::vector<int>& maslov, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, const std::vector<double>& hs, double delta_exp,
                            const std::vector<double>& eps_samples);

struct WeylCount {
  long long counted = 0;
  double expected = 0.0;
  double rel_error = 0.0;
};

// Eigenvalues in [a, b] against (2 pi h)^{-d} times the phase-space volume.
WeylCount weyl_check(const std::vector<double>& eigs, double a, double b, double volume, double h, int d);

}  // namespace kamq
