#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "kamq/errors.hpp"
#include "kamq/series.hpp"

namespace kamq {

namespace {

std::string hexfloat(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

double parse_double(const std::string& tok) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    throw ConfigError("series text: bad number '" + tok + "'");
  return v;
}

std::vector<int> parse_ints(const std::string& field) {
  std::istringstream is(field);
  std::vector<int> out;
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0') throw ConfigError("series text: bad integer '" + tok + "'");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::vector<std::string> split_bars(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char ch : line) {
    if (ch == '|') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

std::string to_text(const Series& f) {
  const PhaseGeometry& g = f.geometry();
  std::ostringstream os;
  os << "series " << g.d << ' ' << g.d0 << ' ' << f.kmax() << ' ' << f.degmax() << '\n';
  for (const auto& [m, c] : f.terms()) {
    for (int i = 0; i < g.d; ++i) os << (i ? " " : "") << kcomp(m, i);
    os << " |";
    for (int i = 0; i < g.d; ++i) os << ' ' << jcomp(m, g, i);
    os << " |";
    for (int i = 0; i < g.nz(); ++i) os << ' ' << qcomp(m, g, i);
    os << " | " << hexfloat(c.real()) << ' ' << hexfloat(c.imag()) << '\n';
  }
  return os.str();
}

Series from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  bool have_header = false;
  Series out;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!have_header) {
      std::istringstream hs(line);
      std::string tag;
      PhaseGeometry g;
      int kmax = 0, degmax = 0;
      if (!(hs >> tag >> g.d >> g.d0 >> kmax >> degmax) || tag != "series")
        throw ConfigError("series text: missing header 'series d d0 kmax degmax'");
      out = Series(g, kmax, degmax);
      have_header = true;
      continue;
    }
    auto parts = split_bars(line);
    if (parts.size() != 4)
      throw ConfigError("series text: line " + std::to_string(lineno) + " needs 4 '|'-separated fields");
    auto k = parse_ints(parts[0]);
    auto j = parse_ints(parts[1]);
    auto q = parse_ints(parts[2]);
    std::istringstream cs(parts[3]);
    std::string re, im;
    if (!(cs >> re >> im)) throw ConfigError("series text: line " + std::to_string(lineno) + " lacks 're im'");
    MultiIndex m = make_index(out.geometry(), k, j, q);
    if (!out.in_bounds(m))
      throw ConfigError("series text: line " + std::to_string(lineno) + " outside declared truncation");
    out.set_term(m, out.coeff(m) + cplx(parse_double(re), parse_double(im)));
  }
  if (!have_header) throw ConfigError("series text: empty input");
  return out;
}

void write_series_file(const std::string& path, const Series& f) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write series file: " + path);
  os << to_text(f);
}

Series read_series_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read series file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return from_text(ss.str());
}

}  // namespace kamq
