#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace kamq {

using cplx = std::complex<double>;

inline constexpr int kMaxIndexWidth = 16;
inline constexpr double kPruneThreshold = 1e-15;

// x in T^d, y in R^d, z = (u, v) in R^{2 d0}.
struct PhaseGeometry {
  int d = 1;
  int d0 = 0;

  int l() const { return d + d0; }
  int nz() const { return 2 * d0; }
  int width() const { return 2 * d + 2 * d0; }
  void validate() const;
  bool operator==(const PhaseGeometry&) const = default;
};

// Packed (k, j, q): k at [0,d), j at [d,2d), q at [2d, 2d+2d0); q = (u-part, v-part).
struct MultiIndex {
  std::array<std::int8_t, kMaxIndexWidth> v{};
  auto operator<=>(const MultiIndex&) const = default;
};

MultiIndex make_index(const PhaseGeometry& g, std::span<const int> k, std::span<const int> j,
                      std::span<const int> q);

inline int kcomp(const MultiIndex& m, int i) { return m.v[i]; }
inline int jcomp(const MultiIndex& m, const PhaseGeometry& g, int i) { return m.v[g.d + i]; }
inline int qcomp(const MultiIndex& m, const PhaseGeometry& g, int i) { return m.v[2 * g.d + i]; }

int k_sup(const MultiIndex& m, const PhaseGeometry& g);
int k_l1(const MultiIndex& m, const PhaseGeometry& g);
int y_degree(const MultiIndex& m, const PhaseGeometry& g);
int z_degree(const MultiIndex& m, const PhaseGeometry& g);
inline int degree(const MultiIndex& m, const PhaseGeometry& g) { return y_degree(m, g) + z_degree(m, g); }
bool k_is_zero(const MultiIndex& m, const PhaseGeometry& g);
MultiIndex negate_k(const MultiIndex& m, const PhaseGeometry& g);

struct Truncation {
  int kmax = 0;
  int degmax = 0;
};

// Bookkeeping of everything removed from a series by truncation or pruning.
struct TruncationLog {
  std::size_t dropped_terms = 0;
  double dropped_mass = 0.0;
  std::size_t pruned_terms = 0;
  double pruned_mass = 0.0;

  void merge(const TruncationLog& o);
};

class Series {
 public:
  Series() = default;
  Series(PhaseGeometry g, int kmax, int degmax);

  const PhaseGeometry& geometry() const { return geo_; }
  int kmax() const { return kmax_; }
  int degmax() const { return degmax_; }
  Truncation truncation() const { return {kmax_, degmax_}; }
  const std::map<MultiIndex, cplx>& terms() const { return c_; }
  std::size_t size() const { return c_.size(); }
  bool empty() const { return c_.empty(); }
  cplx coeff(const MultiIndex& m) const;

  // Accumulates c into the term; out-of-bound indices are dropped and logged.
  bool add_term(const MultiIndex& m, cplx c);
  bool add_term(std::span<const int> k, std::span<const int> j, std::span<const int> q, cplx c);
  void set_term(const MultiIndex& m, cplx c);
  void erase_term(const MultiIndex& m) { c_.erase(m); }

  bool in_bounds(const MultiIndex& m) const;
  std::size_t prune(double threshold = kPruneThreshold);

  const TruncationLog& log() const { return log_; }
  TruncationLog& log() { return log_; }

  // Same terms restricted to a new (kmax, degmax); drops are logged.
  Series retruncated(Truncation t) const;

 private:
  PhaseGeometry geo_{};
  int kmax_ = 0;
  int degmax_ = 0;
  std::map<MultiIndex, cplx> c_;
  TruncationLog log_;
};

Series operator+(const Series& a, const Series& b);
Series operator-(const Series& a, const Series& b);
Series operator-(const Series& a);
Series operator*(cplx s, const Series& a);

Series multiply(const Series& a, const Series& b);
Series multiply(const Series& a, const Series& b, Truncation t);

Series derivative_x(const Series& f, int i);
Series derivative_y(const Series& f, int i);
Series derivative_z(const Series& f, int i);

// {f,g} = sum_i (f_{y_i} g_{x_i} - f_{x_i} g_{y_i}) + sum_j (f_{u_j} g_{v_j} - f_{v_j} g_{u_j}).
Series poisson_bracket(const Series& f, const Series& g);
Series poisson_bracket(const Series& f, const Series& g, Truncation t);

struct LieOptions {
  int hard_cap = 32;
  std::optional<Truncation> truncation;  // result context; default follows bracket rules
};

// sum_{m=0}^{order} eps^m/m! ad_F^m(H), ad_F(H) = {H, F}.
Series lie_transform(const Series& H, const Series& F, double eps, int order,
                     const LieOptions& opt = {});

// Ansatz shape per mode: constant, linear in y, linear in z, quadratic in z.
bool is_ansatz_shape(const MultiIndex& m, const PhaseGeometry& g);

struct CutoffResult {
  Series R;
  Series tail;
};
CutoffResult cutoff(const Series& P, int Kplus);

Series average_over_angles(const Series& P);

// Terms with k != 0.
Series k_nonzero_part(const Series& P);

// c_{-k,j,q} = conj(c_{k,j,q}) within tol.
bool is_real(const Series& f, double tol = 1e-14);
Series real_symmetrized(const Series& f);

// Value at a point; x has d entries, y has d, z has 2 d0.
cplx evaluate(const Series& f, std::span<const double> x, std::span<const double> y,
              std::span<const double> z);

double max_abs_coeff(const Series& f);
// Sum of |c| over all terms.
double l1_mass(const Series& f);

// Convenience constructors.
Series constant_series(const PhaseGeometry& g, cplx c, int kmax = 0, int degmax = 0);
Series fourier_mode(const PhaseGeometry& g, std::span<const int> k, cplx c, int kmax = -1,
                    int degmax = 0);
Series linear_y(const PhaseGeometry& g, std::span<const double> w, int degmax = 1);
Series quadratic_z(const PhaseGeometry& g, const std::vector<double>& M_rowmajor, int degmax = 2);

// Random series for tests and constant measurements; real ones satisfy the conjugate
// symmetry exactly. Coefficient moduli are uniform in (0, 1].
Series random_series(const PhaseGeometry& g, int kmax, int degmax, int nterms, std::uint64_t seed,
                     bool real = true);

// Line-oriented text form with hex-float coefficients; exact round trip.
std::string to_text(const Series& f);
Series from_text(const std::string& text);
void write_series_file(const std::string& path, const Series& f);
Series read_series_file(const std::string& path);

}  // namespace kamq
