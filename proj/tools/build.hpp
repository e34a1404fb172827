#pragma once

// Samples the coefficient and data blocks of a RunConfig onto the grids.

#include <cmath>
#include <numbers>
#include <string>

#include "config.hpp"
#include "io.hpp"
#include "subdiff/forward.hpp"
#include "subdiff/inverse.hpp"

namespace subdiff::cli {

inline std::filesystem::path resolve_path(const RunConfig& cfg, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : cfg.base_dir / path;
}

// Node positions read from a file must match the grid to this relative tolerance.
inline constexpr double node_match_tol = 1e-9;

inline void check_nodes(const std::filesystem::path& file, const std::vector<double>& got,
                        const std::vector<double>& want, double scale, const char* axis) {
  if (got.size() != want.size()) {
    std::ostringstream os;
    os << file.string() << ": " << got.size() << " " << axis << " nodes, the grid has " << want.size();
    throw ConfigError(os.str());
  }
  for (std::size_t j = 0; j < got.size(); ++j)
    if (std::fabs(got[j] - want[j]) > node_match_tol * scale) {
      std::ostringstream os;
      os << file.string() << ": " << axis << " node " << j << " is " << got[j] << ", the grid has " << want[j];
      throw ConfigError(os.str());
    }
}

inline double eval_time(const json& p, double t) {
  const auto kind = p.at("kind").get<std::string>();
  if (kind == "constant") return p.at("value").get<double>();
  if (kind == "affine") return p.at("a").get<double>() + p.at("b").get<double>() * t;
  if (kind == "sinusoidal-offset")
    return p.at("offset").get<double>() +
           p.at("amplitude").get<double>() * std::sin(p.at("frequency").get<double>() * t + p.at("phase").get<double>());
  double sum = 0.0;
  for (const auto& term : p.at("terms"))
    sum += term.at("coefficient").get<double>() * std::pow(t, term.at("power").get<double>());
  return sum;
}

/// Two-column CSV (t, value) or an analytic kind, sampled on tg.
inline Profile build_profile(const RunConfig& cfg, const json& p, const TimeGrid& tg) {
  if (p.at("kind") == "csv") {
    const auto file = resolve_path(cfg, p.at("path").get<std::string>());
    const auto table = read_csv(file);
    if (table.header.size() != 2) throw ConfigError(file.string() + ":1: expected two columns (t, value)");
    std::vector<double> t, v;
    for (const auto& r : table.rows) t.push_back(r[0]), v.push_back(r[1]);
    check_nodes(file, t, tg.nodes(), tg.t_final(), "time");
    return {tg, v};
  }
  return Profile::sample(tg, [&](double t) { return eval_time(p, t); });
}

inline double sine_mode(long k, double x, double l) {
  return std::sqrt(2.0 / l) * std::sin(std::numbers::pi * static_cast<double>(k) * x / l);
}

inline std::vector<double> build_initial(const RunConfig& cfg, const json& p, const SpaceGrid& sg) {
  std::vector<double> v(sg.size(), 0.0);
  const auto kind = p.at("kind").get<std::string>();
  if (kind == "sine-modes") {
    for (const auto& m : p.at("modes")) {
      const long k = m.at("k").get<long>();
      const double a = m.at("amplitude").get<double>();
      for (std::size_t i = 1; i + 1 < sg.size(); ++i) v[i] += a * sine_mode(k, sg.node(i), sg.length());
    }
  } else if (kind == "csv") {
    const auto file = resolve_path(cfg, p.at("path").get<std::string>());
    const auto table = read_csv(file);
    if (table.header.size() != 2) throw ConfigError(file.string() + ":1: expected two columns (x, value)");
    std::vector<double> x;
    for (std::size_t i = 0; i < table.rows.size(); ++i) x.push_back(table.rows[i][0]);
    check_nodes(file, x, sg.nodes(), sg.length(), "space");
    for (std::size_t i = 0; i < table.rows.size(); ++i) v[i] = table.rows[i][1];
  }
  return v;
}

/// Source-like field, time-major; the CSV form has a header "t, x_0..x_M".
inline Matrix build_field(const RunConfig& cfg, const json& p, const TimeGrid& tg, const SpaceGrid& sg) {
  Matrix f(tg.size(), sg.size(), 0.0);
  const auto kind = p.at("kind").get<std::string>();
  if (kind == "sine-modes") {
    for (const auto& m : p.at("modes")) {
      const long k = m.at("k").get<long>();
      const Profile g = build_profile(cfg, m.at("time"), tg);
      for (std::size_t i = 1; i + 1 < sg.size(); ++i) {
        const double s = sine_mode(k, sg.node(i), sg.length());
        for (std::size_t n = 0; n < tg.size(); ++n) f(n, i) += g[n] * s;
      }
    }
  } else if (kind == "csv") {
    const auto file = resolve_path(cfg, p.at("path").get<std::string>());
    const auto table = read_csv(file);
    if (table.header.size() != sg.size() + 1) {
      std::ostringstream os;
      os << file.string() << ":1: expected " << sg.size() + 1 << " columns (t and " << sg.size()
         << " space nodes), found " << table.header.size();
      throw ConfigError(os.str());
    }
    std::vector<double> x;
    for (std::size_t i = 1; i < table.header.size(); ++i) {
      double v = 0.0;
      const auto& h = table.header[i];
      const auto [ptr, ec] = std::from_chars(h.data(), h.data() + h.size(), v);
      if (ec != std::errc() || ptr != h.data() + h.size())
        throw ConfigError(file.string() + ":1: header cell '" + h + "' is not a space node");
      x.push_back(v);
    }
    check_nodes(file, x, sg.nodes(), sg.length(), "space");
    std::vector<double> t;
    for (const auto& r : table.rows) t.push_back(r[0]);
    check_nodes(file, t, tg.nodes(), tg.t_final(), "time");
    for (std::size_t n = 0; n < tg.size(); ++n)
      for (std::size_t i = 0; i < sg.size(); ++i) f(n, i) = table.rows[n][i + 1];
  }
  return f;
}

inline ProblemSpec build_problem(const RunConfig& cfg) {
  const auto& P = cfg.problem;
  ProblemSpec s;
  s.tgrid = TimeGrid(P.T, P.N);
  s.sgrid = SpaceGrid(P.length, P.M);
  s.rho = P.rho;
  s.K = P.K;
  s.sigma = build_profile(cfg, cfg.sigma, s.tgrid);
  if (!cfg.q.is_null()) s.q = build_profile(cfg, cfg.q, s.tgrid);
  s.phi = build_initial(cfg, cfg.phi, s.sgrid);
  s.f = build_field(cfg, cfg.f, s.tgrid, s.sgrid);
  return s;
}

/// Flux data from the data block: synthesized from q (as q_true) or read from CSV.
inline InverseSpec build_inverse(const RunConfig& cfg, const ProblemSpec& spec) {
  const auto& D = cfg.data;
  InverseSpec inv;
  if (D.psi == "synthetic") {
    inv = synthesize_data(spec, D.noise, D.seed, cfg.solver.inner_tol, cfg.solver.inner_max_iter);
    if (D.psi0) inv.psi0 = *D.psi0;
  } else {
    const json p{{"kind", "csv"}, {"path", D.path.string()}};
    Profile psi = build_profile(cfg, p, spec.tgrid);
    const double psi0 = D.psi0 ? *D.psi0 : psi.min();
    std::optional<Profile> q_true = spec.q;
    inv = make_inverse_spec(spec, std::move(psi), psi0);
    inv.q_true = std::move(q_true);
  }
  return inv;
}

} // namespace subdiff::cli
