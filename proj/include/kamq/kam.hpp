#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "kamq/gevrey.hpp"
#include "kamq/reduction.hpp"
#include "kamq/series.hpp"

namespace kamq {

// A1 = -i kappa I + M J, A2 = -i kappa I + M J (x) I + I (x) M J, J = [[0, I], [-I, 0]].
struct DivisorReport {
  std::vector<int> k;
  double kw = 0.0;
  std::complex<double> detA1{1.0, 0.0};
  std::complex<double> detA2{1.0, 0.0};
  double threshold_kw = 0.0;
  double threshold_A1 = 0.0;
  double threshold_A2 = 0.0;
  bool pass = true;
};

struct DivisorCheck {
  bool member = true;
  std::vector<DivisorReport> reports;
  double min_kw = 0.0;
  double min_detA1 = 0.0;
  double min_detA2 = 0.0;
};

// Modes 0 < |k|_inf <= Kplus on a half lattice; Delta is evaluated at |k|_1.
DivisorCheck check_divisors(const Eigen::VectorXd& omega, const Eigen::MatrixXd& M, int Kplus, double gamma,
                            const ApproximationFunction& delta);

Eigen::MatrixXd symplectic_J(int d0);
std::complex<double> det_A1(double kappa, const Eigen::MatrixXd& M);
std::complex<double> det_A2(double kappa, const Eigen::MatrixXd& M);

// Integrable part N = e + <omega, y> + (1/2) <z, M z>.
struct IntegrablePart {
  double e = 0.0;
  Eigen::VectorXd omega;
  Eigen::MatrixXd M;
};

Series integrable_series(const PhaseGeometry& g, const IntegrablePart& N, int kmax, int degmax);

struct HomologicalSolution {
  Series F;                // generator including the k = 0 linear-z part
  Eigen::VectorXd F001;    // solves M F001 = -r001; F's linear-z coefficient is -J F001
  Series killed;           // the part of R the solve removes
  Series averaged;         // k = 0 part of R other than linear-z
  double residual = 0.0;   // majorant norm of {N, F} + killed
  double r_norm = 0.0;
  DivisorCheck divisors;
};

// Solves {N, F} + R_killed = 0 for physical R (eps already inside). R must have cutoff shape.
HomologicalSolution solve_homological_physical(const IntegrablePart& N, const Series& R, int Kplus,
                                               double gamma, const ApproximationFunction& delta,
                                               const GevreyWeights& w);

// eps-free R: weights eps^2, eps^2, eps, eps^2, eps are applied to the k00, k10, k01, k02, 001 parts.
HomologicalSolution solve_homological(const IntegrablePart& N, const Series& R, double epsilon, int Kplus,
                                      double gamma, const ApproximationFunction& delta,
                                      const GevreyWeights& w = {});

// Accumulated normal form. Physical Hamiltonian:
//   e + <omega, y> + (eps/2) <z, Mp z> + Rterms + P.
struct NormalFormState {
  PhaseGeometry geometry;
  double epsilon = 0.0;
  int p = 0;
  double e0 = 0.0;
  Eigen::VectorXd omega0;
  Eigen::MatrixXd M0;
  std::vector<double> epsN_coeffs;             // N_s(0), s = 1..p
  std::vector<Eigen::VectorXd> omega_coeffs;   // grad_y N_s(0)
  std::vector<Eigen::MatrixXd> M_coeffs;       // grad_z^2 N_s(0)
  double e = 0.0;
  Eigen::VectorXd omega;
  Eigen::MatrixXd Mp;
  Series Rterms;
  Series P;
  std::vector<double> norms;   // norm of P at each accepted step, starting with the input
  std::vector<Series> generators;
  TruncationLog truncation;

  IntegrablePart integrable() const;
  // Values rebuilt from the stored eps-coefficients.
  double e_reconstructed() const;
  Eigen::VectorXd omega_reconstructed() const;
  Eigen::MatrixXd M_reconstructed() const;
};

// Initial state from physical parts. P is split: k = 0 constant, linear-y and quadratic-z
// terms move into the normal form, other k = 0 terms except linear-z into Rterms.
NormalFormState make_state(const PhaseGeometry& g, double epsilon, double e, const Eigen::VectorXd& omega,
                           const Eigen::MatrixXd& Mp, const Series& Rterms, const Series& P);
NormalFormState state_from_reduction(const ReducedHamiltonian& rh);

struct StepOptions {
  int Kplus = 8;
  double gamma = 0.05;
  GevreyWeights weights;   // remaining (rho, sigma) before the step
  double r = 0.0;          // loss in rho
  double s = 0.0;          // loss in sigma
  int lie_order = 6;
  int kmax = 24;           // context truncation for the transformed Hamiltonian
  int degmax = 4;
  bool reject_on_growth = true;
  bool record_timing = false;
};

struct StepRecord {
  int p = 0;
  int Kplus = 0;
  double norm_before = 0.0;
  double norm_after = 0.0;
  double min_divisor = 0.0;
  double min_detA1 = 0.0;
  double min_detA2 = 0.0;
  double residual = 0.0;
  double wall_time = 0.0;
  bool accepted = false;
  std::string reason;
};

struct StepResult {
  NormalFormState state;
  StepRecord record;
  HomologicalSolution solution;
};

// Throws DivisorError on divisor failure. Norm growth leaves the state unchanged with accepted = false.
StepResult kam_step(const NormalFormState& state, const ApproximationFunction& delta, const StepOptions& opt);

struct Schedule {
  double rho = 1.0;
  double sigma = 1.0;
  double alpha = 2.0;
  int K = 8;
  double gamma = 0.05;
  int lie_order = 6;
  int kmax = 24;
  int degmax = 4;
  double target = 1e-14;
  bool record_timing = false;

  double sigma_p(int p) const;
  double rho_p(int p) const;
  int K_p(int p) const { return p * K; }
  // Remaining weights after p steps.
  double sigma_remaining(int p) const;
  double rho_remaining(int p) const;
};

struct IterateResult {
  NormalFormState state;
  std::vector<StepRecord> records;
  std::vector<double> trajectory;
  std::string stop_reason;
};

IterateResult iterate(const NormalFormState& state, const ApproximationFunction& delta, const Schedule& sched,
                      int pmax);

std::string records_to_csv(const std::vector<StepRecord>& rows);

}  // namespace kamq
