#include "app.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/version.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "kamq/errors.hpp"
#include "kamq/freqsets.hpp"
#include "kamq/gevrey.hpp"
#include "kamq/kam.hpp"
#include "kamq/oracle.hpp"
#include "kamq/parallel.hpp"
#include "kamq/quantize.hpp"
#include "kamq/reduction.hpp"
#include "kamq/scarring.hpp"
#include "kamq/series.hpp"

namespace kamq::app {

namespace fs = std::filesystem;
using json = nlohmann::json;
using boost::property_tree::ptree;

namespace {

// ---- config helpers ----

template <class T>
T get(const ptree& pt, const std::string& key, T def) {
  try {
    return pt.get<T>(key, def);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

template <class T>
T require(const ptree& pt, const std::string& key) {
  auto v = pt.get_optional<std::string>(key);
  if (!v) throw ConfigError("missing config key '" + key + "'");
  try {
    return pt.get<T>(key);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError("bad value for '" + key + "': " + e.what());
  }
}

bool has(const ptree& pt, const std::string& key) { return static_cast<bool>(pt.get_optional<std::string>(key)); }

std::vector<double> parse_doubles(const std::string& s) {
  std::string t = s;
  for (char& c : t)
    if (c == ',') c = ' ';
  std::istringstream is(t);
  std::vector<double> out;
  std::string tok;
  while (is >> tok) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + tok + "'");
    }
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  for (double v : parse_doubles(s)) {
    if (v != std::floor(v)) throw ConfigError("not an integer: " + std::to_string(v));
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  std::vector<std::string> kept;
  for (auto& p : out)
    if (p.find_first_not_of(" \t") != std::string::npos) kept.push_back(p);
  return kept;
}

std::vector<double> doubles(const ptree& pt, const std::string& key) { return parse_doubles(require<std::string>(pt, key)); }

std::vector<double> doubles_or(const ptree& pt, const std::string& key, std::vector<double> def) {
  return has(pt, key) ? doubles(pt, key) : def;
}

Eigen::VectorXd vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd square(const std::vector<double>& v, int n, const std::string& what) {
  if (static_cast<int>(v.size()) != n * n)
    throw ConfigError(what + ": expected " + std::to_string(n * n) + " entries, got " + std::to_string(v.size()));
  Eigen::MatrixXd M(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) M(i, j) = v[i * n + j];
  return M;
}

json to_json(const Eigen::MatrixXd& M) {
  json a = json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    a.push_back(r);
  }
  return a;
}

json to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  f << s;
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---- model builders ----

ApproximationFunction build_delta(const ptree& cfg) {
  const std::string fam = get<std::string>(cfg, "gevrey.family", "power_log");
  const double alpha = get<double>(cfg, "gevrey.alpha", 2.0);
  const double vs = get<double>(cfg, "gevrey.varsigma", 1.0);
  if (fam == "power_log")
    return ApproximationFunction::power_log(alpha, get<double>(cfg, "gevrey.a", 2.0), get<double>(cfg, "gevrey.b", 0.0),
                                            vs);
  if (fam == "subgevrey_exp")
    return ApproximationFunction::subgevrey_exp(alpha, get<double>(cfg, "gevrey.beta", 0.25), vs);
  if (fam == "tabulated")
    return ApproximationFunction::tabulated(alpha, doubles(cfg, "gevrey.t"), doubles(cfg, "gevrey.values"), vs);
  throw ConfigError("unknown gevrey.family '" + fam + "'");
}

PhaseGeometry geometry(const ptree& cfg) {
  PhaseGeometry g;
  g.d0 = get<int>(cfg, "geometry.d0", 0);
  if (has(cfg, "geometry.l"))
    g.d = require<int>(cfg, "geometry.l") - g.d0;
  else
    g.d = get<int>(cfg, "geometry.d", 1);
  if (g.d < 1 || g.d0 < 0) throw ConfigError("geometry: need d >= 1 and d0 >= 0");
  return g;
}

// amp * cos<k,x> for "amp k1 .. kn; ..." entries; an optional "| j1 .. jn" adds y^j.
Series cos_terms(const PhaseGeometry& g, const std::string& spec, int kmax, int degmax) {
  Series s(g, kmax, degmax);
  for (const auto& entry : split(spec, ';')) {
    const auto parts = split(entry, '|');
    const auto v = parse_doubles(parts.at(0));
    if (static_cast<int>(v.size()) != g.d + 1) throw ConfigError("cos term needs amp and " + std::to_string(g.d) + " modes");
    std::vector<int> k(g.d), mk(g.d), j(g.d, 0), q(g.nz(), 0);
    for (int i = 0; i < g.d; ++i) {
      k[i] = static_cast<int>(v[i + 1]);
      mk[i] = -k[i];
    }
    if (parts.size() > 1) {
      j = parse_ints(parts[1]);
      if (static_cast<int>(j.size()) != g.d) throw ConfigError("cos term y powers have wrong length");
    }
    const bool zero = std::all_of(k.begin(), k.end(), [](int x) { return x == 0; });
    if (zero) {
      s.add_term(k, j, q, v[0]);
    } else {
      s.add_term(k, j, q, v[0] / 2.0);
      s.add_term(mk, j, q, v[0] / 2.0);
    }
  }
  return s;
}

Series perturbation(const Context& ctx, const PhaseGeometry& g, int kmax, int degmax) {
  const ptree& cfg = ctx.cfg;
  Series P(g, kmax, degmax);
  if (has(cfg, "perturbation.file")) {
    fs::path p = require<std::string>(cfg, "perturbation.file");
    if (p.is_relative()) p = ctx.config_dir / p;
    if (!fs::exists(p)) throw ConfigError("perturbation file not found: " + p.string());
    Series f = read_series_file(p.string());
    if (!(f.geometry() == g)) throw ConfigError("perturbation file geometry does not match the config");
    P = P + f.retruncated({kmax, degmax});
  }
  if (has(cfg, "perturbation.cos")) P = P + cos_terms(g, require<std::string>(cfg, "perturbation.cos"), kmax, degmax);
  return P;
}

struct ReduceInputs {
  TaylorData H0;
  Series P0;
  ResonanceModule module;
  Eigen::VectorXd y0;
  ReduceOptions opt;
};

ReduceInputs reduce_inputs(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const int l = require<int>(cfg, "geometry.l");
  ReduceInputs in;
  in.H0.value = get<double>(cfg, "h0.value", 0.0);
  in.H0.gradient = vec(doubles(cfg, "h0.gradient"));
  in.H0.hessian = square(doubles(cfg, "h0.hessian"), l, "h0.hessian");
  if (has(cfg, "h0.third")) in.H0.third = doubles(cfg, "h0.third");
  if (in.H0.gradient.size() != l) throw ConfigError("h0.gradient must have l entries");
  in.y0 = has(cfg, "h0.y0") ? vec(doubles(cfg, "h0.y0")) : Eigen::VectorXd::Zero(l);
  std::vector<std::vector<int>> gens;
  for (const auto& row : split(require<std::string>(cfg, "module.generators"), ';')) gens.push_back(parse_ints(row));
  in.module = unimodular_completion(gens, l);
  in.opt.epsilon = get<double>(cfg, "kam.epsilon", 0.0);
  in.opt.action_scaling_exponent = get<double>(cfg, "module.action_scaling_exponent", 0.5);
  in.opt.kmax = get<int>(cfg, "kam.kmax", 8);
  in.opt.degmax = get<int>(cfg, "kam.degmax", 4);
  in.opt.averaging_order = get<int>(cfg, "module.averaging_order", 2);
  in.opt.gamma = get<double>(cfg, "kam.gamma", 0.05);
  in.opt.critical_grid = get<int>(cfg, "module.critical_grid", 64);
  if (has(cfg, "module.critical_index")) in.opt.critical_index = require<int>(cfg, "module.critical_index");
  if (get<bool>(cfg, "module.check_divisors", false)) in.opt.delta = build_delta(cfg);
  PhaseGeometry g0{l, 0};
  in.P0 = perturbation(ctx, g0, in.opt.kmax, 0);
  return in;
}

NormalFormState initial_state(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const std::string source = get<std::string>(cfg, "kam.source", "direct");
  if (source == "reduce") {
    auto in = reduce_inputs(ctx);
    return state_from_reduction(reduce(in.H0, in.P0, in.module, in.y0, in.opt));
  }
  if (source != "direct") throw ConfigError("kam.source must be 'direct' or 'reduce'");
  const PhaseGeometry g = geometry(cfg);
  const double eps = get<double>(cfg, "kam.epsilon", 0.0);
  const Eigen::VectorXd omega = vec(doubles(cfg, "kam.omega"));
  if (omega.size() != g.d) throw ConfigError("kam.omega must have d entries");
  Eigen::MatrixXd Mp = Eigen::MatrixXd::Zero(g.nz(), g.nz());
  if (g.d0 > 0) Mp = square(doubles(cfg, "kam.Mp"), g.nz(), "kam.Mp");
  const int kmax = get<int>(cfg, "kam.kmax", 24), degmax = get<int>(cfg, "kam.degmax", 4);
  Series P = perturbation(ctx, g, kmax, degmax);
  P = cplx(eps) * P;
  P.prune();
  return make_state(g, eps, get<double>(cfg, "kam.e", 0.0), omega, Mp, Series(g, kmax, degmax), P);
}

Schedule schedule(const ptree& cfg) {
  Schedule s;
  s.rho = get<double>(cfg, "kam.rho", 1.0);
  s.sigma = get<double>(cfg, "kam.sigma", 1.0);
  s.alpha = get<double>(cfg, "gevrey.alpha", 2.0);
  s.K = get<int>(cfg, "kam.K", 8);
  s.gamma = get<double>(cfg, "kam.gamma", 0.05);
  s.lie_order = get<int>(cfg, "kam.lie_order", 6);
  s.kmax = get<int>(cfg, "kam.kmax", 24);
  s.degmax = get<int>(cfg, "kam.degmax", 4);
  s.target = get<double>(cfg, "kam.target", 1e-14);
  s.record_timing = get<bool>(cfg, "kam.record_timing", false);
  return s;
}

NormalFormState iterated_state(const Context& ctx, IterateResult* full = nullptr) {
  NormalFormState st = initial_state(ctx);
  const int pmax = get<int>(ctx.cfg, "kam.pmax", 0);
  if (pmax <= 0) return st;
  IterateResult r = iterate(st, build_delta(ctx.cfg), schedule(ctx.cfg), pmax);
  if (full) *full = r;
  return r.state;
}

PredictOptions predict_options(const ptree& cfg) {
  PredictOptions o;
  o.scaling = parse_scaling(get<std::string>(cfg, "quantum.scaling", "paper_literal"));
  o.ny_max = get<int>(cfg, "quantum.ny_max", 4);
  o.nres_max = get<int>(cfg, "quantum.nres_max", 4);
  if (has(cfg, "quantum.E_lo")) o.E_lo = require<double>(cfg, "quantum.E_lo");
  if (has(cfg, "quantum.E_hi")) o.E_hi = require<double>(cfg, "quantum.E_hi");
  o.include_action_remainder = get<bool>(cfg, "quantum.include_action_remainder", false);
  o.alpha = get<double>(cfg, "gevrey.alpha", 2.0);
  o.remainder.c = get<double>(cfg, "quantum.remainder_c", 1.0);
  o.remainder.C = get<double>(cfg, "quantum.remainder_C", 1.0);
  o.remainder.sign = get<double>(cfg, "quantum.remainder_sign", -1.0);
  return o;
}

std::vector<int> maslov(const ptree& cfg) {
  return has(cfg, "quantum.maslov") ? parse_ints(require<std::string>(cfg, "quantum.maslov")) : std::vector<int>{};
}

// [oracle] symbol: h0 = "coef p1 .. pd; ...", S0/S row-major, couplings = "amp cos|sin k1 .. kd [| zpow]; ...".
SymbolSpec symbol(const ptree& cfg) {
  SymbolSpec s;
  const PhaseGeometry g = geometry(cfg);
  s.d = g.d;
  s.d0 = g.d0;
  for (const auto& e : split(get<std::string>(cfg, "oracle.h0", ""), ';')) {
    const auto v = parse_doubles(e);
    if (static_cast<int>(v.size()) != g.d + 1) throw ConfigError("oracle.h0 term needs coef and d powers");
    TorusTerm t;
    t.coef = v[0];
    for (int i = 0; i < g.d; ++i) t.powers.push_back(static_cast<int>(v[i + 1]));
    s.h0.push_back(t);
  }
  if (has(cfg, "oracle.S0")) s.S0 = square(doubles(cfg, "oracle.S0"), g.nz(), "oracle.S0");
  if (has(cfg, "oracle.S")) s.S = square(doubles(cfg, "oracle.S"), g.nz(), "oracle.S");
  for (const auto& e : split(get<std::string>(cfg, "oracle.couplings", ""), ';')) {
    const auto parts = split(e, '|');
    std::istringstream is(parts.at(0));
    Coupling c;
    std::string kind;
    is >> c.amp >> kind;
    if (kind != "cos" && kind != "sin") throw ConfigError("coupling kind must be cos or sin");
    c.sine = kind == "sin";
    std::string rest((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    c.k = parse_ints(rest);
    if (parts.size() > 1) c.zpow = parse_ints(parts[1]);
    s.couplings.push_back(c);
  }
  s.provenance = get<std::string>(cfg, "oracle.provenance", "config");
  return s;
}

json config_json(const ptree& cfg) {
  json j = json::object();
  for (const auto& [sec, sub] : cfg) {
    json s = json::object();
    for (const auto& [k, v] : sub) s[k] = v.data();
    j[sec] = s;
  }
  return j;
}

std::string fmt(double v) {
  char b[64];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

}  // namespace

Context load_context(const std::string& config_path, const std::string& out_dir, std::uint64_t seed_override,
                     bool seed_given) {
  Context ctx;
  if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
  try {
    boost::property_tree::ini_parser::read_ini(config_path, ctx.cfg);
  } catch (const boost::property_tree::ptree_error& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  ctx.config_dir = fs::path(config_path).parent_path();
  ctx.out = out_dir.empty() ? fs::path(get<std::string>(ctx.cfg, "run.out", "out")) : fs::path(out_dir);
  ctx.seed = seed_given ? seed_override : get<std::uint64_t>(ctx.cfg, "run.seed", 1);
  fs::create_directories(ctx.out);
  return ctx;
}

void write_manifest(const Context& ctx, const std::string& command) {
  json m;
  m["command"] = command;
  m["config"] = config_json(ctx.cfg);
  m["seed"] = ctx.seed;
  m["versions"] = {{"kamq", KAMQ_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", BOOST_LIB_VERSION}};
  write_json(ctx.out / "manifest.json", m);
}

void cmd_reduce(const Context& ctx) {
  auto in = reduce_inputs(ctx);
  const ReducedHamiltonian rh = reduce(in.H0, in.P0, in.module, in.y0, in.opt);
  json j;
  j["epsilon"] = rh.epsilon;
  j["energy_offset"] = rh.energy_offset;
  j["epsilonN0"] = rh.epsilonN0;
  j["omega"] = to_json(rh.omega);
  j["omega1"] = to_json(rh.omega1);
  j["U0"] = to_json(rh.U0);
  j["V0"] = to_json(rh.V0);
  j["M1"] = to_json(rh.M1);
  j["phi0"] = to_json(rh.phi0);
  Eigen::MatrixXd K0 = in.module.K0.cast<double>();
  j["K0"] = to_json(K0);
  const auto& dg = rh.diagnostics;
  j["diagnostics"] = {{"min_divisor", dg.min_divisor},
                      {"gamma11_norm", dg.gamma11_norm},
                      {"gamma12_norm", dg.gamma12_norm},
                      {"hessian_det", dg.hessian_det},
                      {"gamma22_det", dg.gamma22_det},
                      {"V0_det", dg.V0_det},
                      {"critical_points", dg.critical.points.size()},
                      {"newton_failures", dg.critical.newton_failures},
                      {"dropped_terms", dg.truncation.dropped_terms},
                      {"dropped_mass", dg.truncation.dropped_mass}};
  write_json(ctx.out / "reduced.json", j);
  write_series_file((ctx.out / "P1.series").string(), rh.P1);
  write_series_file((ctx.out / "Rterm.series").string(), rh.Rterm);
  write_manifest(ctx, "reduce");
}

namespace {

json state_json(const NormalFormState& s) {
  json j;
  j["d"] = s.geometry.d;
  j["d0"] = s.geometry.d0;
  j["epsilon"] = s.epsilon;
  j["p"] = s.p;
  j["e"] = s.e;
  j["omega"] = to_json(s.omega);
  j["Mp"] = to_json(s.Mp);
  j["e0"] = s.e0;
  j["omega0"] = to_json(s.omega0);
  j["M0"] = to_json(s.M0);
  j["epsN_coeffs"] = s.epsN_coeffs;
  json oc = json::array(), mc = json::array();
  for (const auto& v : s.omega_coeffs) oc.push_back(to_json(v));
  for (const auto& m : s.M_coeffs) mc.push_back(to_json(m));
  j["omega_coeffs"] = oc;
  j["M_coeffs"] = mc;
  j["norms"] = s.norms;
  j["P_terms"] = s.P.size();
  j["truncation"] = {{"dropped_terms", s.truncation.dropped_terms}, {"dropped_mass", s.truncation.dropped_mass}};
  return j;
}

}  // namespace

void cmd_iterate(const Context& ctx) {
  NormalFormState st = initial_state(ctx);
  const int pmax = get<int>(ctx.cfg, "kam.pmax", 0);
  IterateResult r{st, {}, {}, "pmax reached"};
  if (pmax > 0) r = iterate(st, build_delta(ctx.cfg), schedule(ctx.cfg), pmax);
  write_text(ctx.out / "trajectory.csv", records_to_csv(r.records));
  std::string dat = "# p norm\n";
  for (std::size_t i = 0; i < r.trajectory.size(); ++i) dat += std::to_string(i) + " " + fmt(r.trajectory[i]) + "\n";
  write_text(ctx.out / "norms.dat", dat);
  json j = state_json(r.state);
  j["stop_reason"] = r.stop_reason;
  write_json(ctx.out / "state.json", j);
  write_series_file((ctx.out / "P.series").string(), r.state.P);
  write_series_file((ctx.out / "Rterms.series").string(), r.state.Rterms);
  write_manifest(ctx, "iterate");
}

void cmd_spectrum(const Context& ctx) {
  const NormalFormState st = iterated_state(ctx);
  const double h = require<double>(ctx.cfg, "quantum.h");
  const SpectrumPrediction sp = predict_spectrum(st, h, maslov(ctx.cfg), predict_options(ctx.cfg));
  write_text(ctx.out / "spectrum.csv", spectrum_to_csv(sp));
  write_manifest(ctx, "spectrum");
}

void cmd_compare(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const NormalFormState st = iterated_state(ctx);
  const double h = require<double>(cfg, "quantum.h");
  const PredictOptions po = predict_options(cfg);
  const SpectrumPrediction sp = predict_spectrum(st, h, maslov(cfg), po);
  const int Nt = require<int>(cfg, "oracle.Nt");
  const int Nh = get<int>(cfg, "oracle.Nh", 1);
  const int margin = get<int>(cfg, "oracle.margin", 3);
  const double keep = get<double>(cfg, "oracle.keep_fraction", 0.8);
  for (const auto& e : sp.entries) {
    for (int n : e.qn.n_y)
      if (std::abs(n) > Nt - margin)
        throw CoverageError("prediction window reaches torus mode " + std::to_string(n) + "; need Nt >= " +
                            std::to_string(std::abs(n) + margin));
    for (int n : e.qn.n_u)
      if (n >= keep * Nh)
        throw CoverageError("prediction window reaches Hermite level " + std::to_string(n) + "; need Nh > " +
                            std::to_string(static_cast<int>(std::ceil((n + 1) / keep))));
  }
  const ModelOperator op = build_operator(symbol(cfg), h, st.epsilon, Nt, Nh);
  const Diagonalization dg = diagonalize(op, true, get<std::size_t>(cfg, "oracle.cap", 4096), ctx.seed);
  const auto rows = compare_labeled(sp, dg, op.basis, margin, keep);
  write_text(ctx.out / "comparison.csv", comparison_to_csv(rows));

  double max_err = 0.0;
  for (const auto& r : rows) max_err = std::max(max_err, r.abs_diff);
  json s;
  s["matched"] = rows.size();
  s["predicted"] = sp.entries.size();
  s["max_abs_error"] = max_err;
  s["remainder_bound"] = sp.remainder_bound;
  s["dimension"] = op.basis.size();
  s["max_residual"] = dg.max_residual;
  s["scaling"] = to_string(sp.scaling);
  if (has(cfg, "oracle.cluster_threshold")) {
    std::vector<double> eig, pe;
    const double lo = po.E_lo.value_or(-1e300), hi = po.E_hi.value_or(1e300);
    for (Eigen::Index i = 0; i < dg.values.size(); ++i)
      if (dg.values[i] >= lo && dg.values[i] <= hi) eig.push_back(dg.values[i]);
    for (const auto& e : sp.entries) pe.push_back(e.E);
    const ClusterReport cr = match_spectrum(eig, pe, require<double>(cfg, "oracle.cluster_threshold"));
    std::string csv = "cluster,center,width,count\n";
    for (std::size_t i = 0; i < cr.clusters.size(); ++i)
      csv += std::to_string(i) + "," + fmt(cr.clusters[i].center) + "," + fmt(cr.clusters[i].width) + "," +
             std::to_string(cr.clusters[i].members.size()) + "\n";
    write_text(ctx.out / "clusters.csv", csv);
    s["clusters"] = {{"oracle", cr.clusters.size()},
                     {"predicted", cr.predicted.size()},
                     {"max_center_error", cr.max_center_error},
                     {"max_width_error", cr.max_width_error},
                     {"count_mismatch", cr.count_mismatch}};
  }
  s["config"] = config_json(cfg);
  write_json(ctx.out / "summary.json", s);
  write_manifest(ctx, "compare");
}

void cmd_measure(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const auto samples = get<std::uint64_t>(cfg, "freqsets.samples", 100000);
  std::vector<MeasureRow> rows;
  for (const auto& e : split(get<std::string>(cfg, "freqsets.zones", ""), ';')) {
    const auto parts = split(e, ':');
    if (parts.size() != 2) throw ConfigError("freqsets.zones entries are 'k1 .. kl : beta'");
    ZoneSpec z;
    z.k = parse_ints(parts[0]);
    z.beta = parse_doubles(parts[1]).at(0);
    const MCEstimate m = zone_measure_mc(z, samples, ctx.seed);
    std::string ks;
    for (std::size_t i = 0; i < z.k.size(); ++i) ks += (i ? " " : "") + std::to_string(z.k[i]);
    const double exact = z.k.size() == 2 ? strip_measure_2d(z.k, z.beta) : -1.0;
    rows.push_back({ks, z.beta, m.estimate, m.ci95, exact, 0.0});
  }
  if (has(cfg, "freqsets.gamma1")) {
    const ApproximationFunction delta = build_delta(cfg);
    const int Kmax = get<int>(cfg, "freqsets.Kmax", 8), l = get<int>(cfg, "freqsets.l", 2),
              d = get<int>(cfg, "freqsets.d", l);
    for (double g1 : doubles(cfg, "freqsets.gamma1")) {
      const ExcludedSet ex = excluded_set_measure(g1, delta, Kmax, l, d, samples, ctx.seed);
      rows.push_back({"union", g1, ex.mc.estimate, ex.mc.ci95, -1.0, ex.majorant});
    }
  }
  write_text(ctx.out / "measure.csv", measure_rows_to_csv(rows));
  if (has(cfg, "freqsets.summability_d")) {
    const Summability s = summability_check(build_delta(cfg), require<int>(cfg, "freqsets.summability_d"),
                                            get<double>(cfg, "freqsets.tol", 1e-10));
    write_text(ctx.out / "summability.csv", "converges,partial,tail_bound,estimate,terms\n" +
                                                std::string(s.converges ? "1" : "0") + "," + fmt(s.partial) + "," +
                                                fmt(s.tail_bound) + "," + fmt(s.estimate) + "," +
                                                std::to_string(s.terms) + "\n");
  }
  write_manifest(ctx, "measure");
}

void cmd_scar(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const NormalFormState st = iterated_state(ctx);
  const double h = require<double>(cfg, "quantum.h");
  const PhaseGeometry g = st.geometry;
  const K0Fn K0 = k0_from_state(st, g.d0 > 0, h);
  const Eigen::VectorXd lo = vec(doubles(cfg, "scar.lo")), hi = vec(doubles(cfg, "scar.hi"));
  const auto th = maslov(cfg);
  const QuasiEigenvalueTable table = build_quasi_table(K0, h, st.epsilon, th, lo, hi);
  const double delta_exp = get<double>(cfg, "scar.delta_exp", 1.75 + 2.0 * g.d + 0.1);
  const double lambda = get<double>(cfg, "scar.lambda", 4.0);
  const double R = get<double>(cfg, "scar.R", 1.0);
  json j;
  j["h"] = h;
  j["epsilon"] = st.epsilon;
  j["entries"] = table.entries.size();
  if (table.entries.empty()) {
    j["empty"] = true;
    write_json(ctx.out / "scar.json", j);
    write_manifest(ctx, "scar");
    return;
  }
  j["empty"] = false;
  const ApproximationFunction delta = build_delta(cfg);
  const SeparationReport sep = separation_check(table, get<double>(cfg, "scar.C1", 1.0), delta);
  j["separation"] = {{"radius", sep.radius},
                     {"C2", std::isfinite(sep.C2) ? json(sep.C2) : json(nullptr)},
                     {"pairs_checked", sep.pairs_checked},
                     {"violations", sep.violations.size()}};
  const DiffeoReport dr = local_diffeo_check(K0, g.d, lo, hi, doubles_or(cfg, "scar.eps_grid", {st.epsilon}),
                                             get<int>(cfg, "scar.grid_n", 9), get<int>(cfg, "scar.pairs", 2000),
                                             ctx.seed);
  j["diffeo"] = {{"min_singular", dr.min_singular}, {"G1", dr.G1}, {"G2", dr.G2}, {"ok", dr.ok}};

  const int Nt = require<int>(cfg, "oracle.Nt"), Nh = get<int>(cfg, "oracle.Nh", 1);
  const ModelOperator op = build_operator(symbol(cfg), h, st.epsilon, Nt, Nh);
  const Diagonalization dg = diagonalize(op, true, get<std::size_t>(cfg, "oracle.cap", 4096), ctx.seed);
  std::vector<double> eigs(dg.values.data(), dg.values.data() + dg.values.size());
  const CensusReport cen = window_census(table, delta_exp, eigs, lambda, R);
  const double window = get<double>(cfg, "scar.window", 0.5 * h);
  const double threshold = std::pow(1.0 / (2.0 * lambda), 2) / (R * R);
  json per = json::array();
  int matched = 0, above = 0;
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    const auto& e = table.entries[i];
    const auto& w = cen.windows[i];
    json r = {{"m", e.m}, {"mu", e.mu}, {"count", w.count}};
    if (w.count > 0) {
      Eigen::Index best = 0;
      (dg.values.array() - e.mu).abs().minCoeff(&best);
      const TorusMass tm = mass_on_torus(dg.vectors.col(best), op.basis, h, e.I, window);
      r["mass"] = tm.mass;
      ++matched;
      above += tm.mass >= threshold;
    }
    per.push_back(r);
  }
  j["windows"] = per;
  j["census"] = {{"fraction", cen.fraction}, {"bound", cen.bound}, {"pass", cen.pass}, {"lambda", lambda}, {"R", R}};
  j["mass"] = {{"threshold", threshold},
               {"matched", matched},
               {"above", above},
               {"fraction", matched ? static_cast<double>(above) / matched : 0.0}};
  write_json(ctx.out / "scar.json", j);
  write_manifest(ctx, "scar");
}

void cmd_gamma(const Context& ctx) {
  const ptree& cfg = ctx.cfg;
  const ApproximationFunction delta = build_delta(cfg);
  std::string csv = "r,n,eta,log_gamma,argmax,diverged\n";
  const auto rs = parse_ints(get<std::string>(cfg, "gamma.r", "0 1 2"));
  const auto ns = parse_ints(get<std::string>(cfg, "gamma.n", "1 2"));
  const auto etas = doubles_or(cfg, "gamma.eta", {0.5, 1.0, 2.0});
  for (int r : rs)
    for (int n : ns)
      for (double eta : etas) {
        const GammaResult g = gamma_extremal(r, n, eta, delta);
        csv += std::to_string(r) + "," + std::to_string(n) + "," + fmt(eta) + "," + fmt(g.log_value) + "," +
               fmt(g.argmax) + "," + (g.diverged ? "1" : "0") + "\n";
      }
  write_text(ctx.out / "gamma.csv", csv);
  if (has(cfg, "gamma.kappa")) {
    std::string lc = "kappa,T,n,r,eta,log_gamma,log_bound,holds\n";
    for (double kappa : doubles(cfg, "gamma.kappa"))
      for (double T : doubles_or(cfg, "gamma.T", {1.0}))
        for (int n : ns)
          for (int r : rs) {
            const LemmaBaResult b = lemma_ba_bound(delta, kappa, T, n, r);
            const GammaResult g = gamma_extremal(r, n, b.eta, delta);
            lc += fmt(kappa) + "," + fmt(T) + "," + std::to_string(n) + "," + std::to_string(r) + "," + fmt(b.eta) +
                  "," + fmt(g.log_value) + "," + fmt(b.log_bound) + "," +
                  (g.log_value <= b.log_bound + 1e-8 ? "1" : "0") + "\n";
          }
    write_text(ctx.out / "lemma.csv", lc);
  }
  write_manifest(ctx, "gamma");
}

int run(int argc, char** argv) {
  CLI::App cli{"Resonant normal forms, spectral predictions and their oracles"};
  std::string config, out;
  std::uint64_t seed = 1;
  int threads = 1;
  cli.add_option("--config", config, "INI scenario file")->required();
  cli.add_option("--out", out, "output directory (default: [run] out)");
  auto* seed_opt = cli.add_option("--seed", seed, "overrides [run] seed");
  cli.add_option("--threads", threads, "worker threads")->check(CLI::Range(1, 1024));
  std::string command;
  cli.add_option("command", command, "reduce | iterate | spectrum | compare | measure | scar | gamma")
      ->required()
      ->check(CLI::IsMember({"reduce", "iterate", "spectrum", "compare", "measure", "scar", "gamma"}));
  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return static_cast<int>(ErrorKind::Config);
  }
  try {
    set_thread_count(threads);
    const Context ctx = load_context(config, out, seed, seed_opt->count() > 0);
    if (command == "reduce") cmd_reduce(ctx);
    else if (command == "iterate") cmd_iterate(ctx);
    else if (command == "spectrum") cmd_spectrum(ctx);
    else if (command == "compare") cmd_compare(ctx);
    else if (command == "measure") cmd_measure(ctx);
    else if (command == "scar") cmd_scar(ctx);
    else cmd_gamma(ctx);
  } catch (const Error& e) {
    std::cerr << "kamq " << command << ": " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "kamq " << command << ": " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Config);
  }
  return 0;
}

}  // namespace kamq::app
