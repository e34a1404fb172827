#pragma once

// The four batch commands. Each writes its artifacts into the output
// directory, prints a short summary, and returns the process exit status.

#include <ostream>
#include <string>
#include <vector>

#include "build.hpp"
#include "config.hpp"
#include "io.hpp"
#include "subdiff/forward.hpp"
#include "subdiff/inverse.hpp"
#include "subdiff/oracle.hpp"
#include "subdiff/selftest.hpp"

namespace subdiff::cli {

inline constexpr const char* version = "0.1.0";

enum ExitCode : int {
  exit_ok = 0,
  exit_check_failed = 1,
  exit_config = 2,
  exit_admissibility = 3,
  exit_convergence = 4,
  exit_io = 5,
};

struct RunOptions {
  std::filesystem::path out_dir; // overrides the config when set
  std::size_t threads = 0;       // 0: SUBDIFF_THREADS, then the hardware
};

/// Requested checks, each reported as value <= limit.
class CheckList {
public:
  void add(const std::string& name, double value, double limit) {
    const bool pass = value <= limit;
    all_ = all_ && pass;
    doc_.push_back({{"name", name}, {"value", value}, {"limit", limit}, {"pass", pass}});
  }
  void add_flag(const std::string& name, bool pass) {
    all_ = all_ && pass;
    doc_.push_back({{"name", name}, {"pass", pass}});
  }
  bool all_pass() const { return all_; }
  const json& doc() const { return doc_; }
  void print(std::ostream& os) const {
    for (const auto& c : doc_) {
      os << "check " << c["name"].get<std::string>() << ": ";
      if (c.contains("value"))
        os << format_number(c["value"].get<double>()) << " <= " << format_number(c["limit"].get<double>()) << " ";
      os << (c["pass"].get<bool>() ? "PASS" : "FAIL") << '\n';
    }
  }

private:
  json doc_ = json::array();
  bool all_ = true;
};

inline json condition_json(const ConditionCheck& c) {
  json j{{"pass", c.pass}, {"applicable", c.applicable}, {"margin", c.margin}};
  if (!c.detail.empty()) j["detail"] = c.detail;
  return j;
}

inline json coefficients_json(const CoefficientReport& r) {
  return {{"m_sigma", r.m_sigma}, {"M_sigma", r.M_sigma}, {"n_q", r.n_q}, {"N_q", r.N_q},
          {"q_lower", r.q_lower}, {"q_upper", r.q_upper},
          {"positivity", condition_json(r.positivity)},
          {"q_window", condition_json(r.q_window)},
          {"boundary", condition_json(r.boundary)},
          {"all_pass", r.all_pass()}};
}

inline json conditions_json(const InverseConditionReport& r) {
  return {{"psi_regular", condition_json(r.psi_regular)},
          {"compatibility", condition_json(r.compatibility)},
          {"q0_window", condition_json(r.q0_window)},
          {"data_size", condition_json(r.data_size)},
          {"data_signs", condition_json(r.data_signs)},
          {"CT", r.CT},
          {"psi_slope", r.psi_slope},
          {"psi_start_ratio", r.psi_start_ratio},
          {"phi_x0", r.phi_x0},
          {"all_pass", r.all_pass()}};
}

inline json modes_json(const FieldSolution& sol) {
  json modes = json::array();
  for (std::size_t k = 0; k < sol.per_mode.size(); ++k) {
    const auto& m = sol.per_mode[k];
    modes.push_back({{"k", k + 1}, {"iterations", m.iterations}, {"final_update", m.final_update},
                     {"contraction_estimate", m.contraction_estimate}, {"C_k_bound", m.C_k_bound}});
  }
  return modes;
}

inline json metadata(const RunConfig& cfg) {
  return {{"tool", "subdiff"}, {"version", version}, {"command", cfg.command}, {"config", cfg.resolved}};
}

inline std::filesystem::path output_dir(const RunConfig& cfg, const RunOptions& opt) {
  return opt.out_dir.empty() ? cfg.out_dir : opt.out_dir;
}

inline int finish(const CheckList& checks, std::ostream& os) {
  checks.print(os);
  return checks.all_pass() ? exit_ok : exit_check_failed;
}

inline int run_forward(const RunConfig& cfg, const RunOptions& opt, std::ostream& os) {
  const auto spec = build_problem(cfg);
  ForwardOptions fo;
  fo.tol = cfg.solver.tol;
  fo.max_iter = cfg.solver.max_iter;
  fo.threads = opt.threads;
  const auto sol = ForwardSolver(fo).solve(spec);

  CheckList checks;
  json diag{{"residual", sol.residual_norm ? json(*sol.residual_norm) : json(nullptr)},
            {"initial_defect", sol.initial_defect},
            {"coefficients", coefficients_json(sol.coefficients)}};
  if (sol.regularity) {
    const auto& r = *sol.regularity;
    diag["regularity"] = {{"c_rho", r.c_rho}, {"q1_bound", r.q1_bound}, {"bound_holds", r.bound_holds},
                          {"worst_ratio", r.worst_ratio},
                          {"f_tail_decays", r.tails.f_decays}, {"phi_tail_decays", r.tails.phi_decays}};
  }
  if (!cfg.exact.is_null()) {
    const double err = max_abs_difference(sol.u, build_field(cfg, cfg.exact, spec.tgrid, spec.sgrid));
    diag["exact_error"] = err;
    os << "sup error against exact solution: " << format_number(err) << '\n';
    if (cfg.checks.max_exact_error) checks.add("exact_error", err, *cfg.checks.max_exact_error);
  }
  if (sol.residual_norm) os << "residual: " << format_number(*sol.residual_norm) << '\n';
  if (cfg.checks.max_residual) checks.add("residual", sol.residual_norm.value_or(std::numeric_limits<double>::infinity()), *cfg.checks.max_residual);
  diag["modes"] = modes_json(sol);
  diag["checks"] = checks.doc();

  const auto dir = output_dir(cfg, opt);
  ensure_directory(dir);
  write_field_csv(dir / "solution.csv", spec.tgrid, spec.sgrid, sol.u);
  write_json(dir / "diagnostics.json", diag);
  write_json(dir / "metadata.json", metadata(cfg));
  os << "wrote " << (dir / "solution.csv").string() << '\n';
  return finish(checks, os);
}

inline int run_inverse(const RunConfig& cfg, const RunOptions& opt, std::ostream& os) {
  const auto spec = build_problem(cfg);
  const auto inv = build_inverse(cfg, spec);
  InverseOptions io;
  io.tol = cfg.solver.inverse_tol;
  io.max_iter = cfg.solver.inverse_max_iter;
  io.forward_tol = cfg.solver.inner_tol;
  io.forward_max_iter = cfg.solver.inner_max_iter;
  io.threads = opt.threads;
  const auto res = recover_q(inv, io);

  CheckList checks;
  os << "iterations: " << res.iterations << ", largest step ratio " << format_number(res.measured_ratio)
     << ", C(T) " << format_number(res.CT_bound) << '\n';
  if (res.q_error) os << "recovery error: " << format_number(*res.q_error) << '\n';
  if (cfg.checks.max_recovery_error) {
    if (!res.q_error) throw ConfigError("checks.max_recovery_error needs a known q (synthetic data or a q block)");
    checks.add("recovery_error", *res.q_error, *cfg.checks.max_recovery_error);
  }
  if (cfg.checks.require_conditions) checks.add_flag("existence_conditions", res.condition_report.all_pass());

  const auto dir = output_dir(cfg, opt);
  ensure_directory(dir);
  {
    CsvWriter w(dir / "q.csv");
    std::vector<std::string> head{"t", "q"};
    if (inv.q_true) head.push_back("q_true");
    w.header(head);
    for (std::size_t n = 0; n < spec.tgrid.size(); ++n) {
      std::vector<double> row{spec.tgrid.node(n), res.q[n]};
      if (inv.q_true) row.push_back((*inv.q_true)[n]);
      w.row(row);
    }
    w.close();
  }
  {
    CsvWriter w(dir / "psi.csv");
    w.header({"t", "psi"});
    for (std::size_t n = 0; n < spec.tgrid.size(); ++n) w.row({spec.tgrid.node(n), inv.psi[n]});
    w.close();
  }
  json report = conditions_json(res.condition_report);
  report["psi0"] = inv.psi0;
  const auto win = q_window(inv);
  report["q_window"] = {{"lower", win.lower}, {"upper", win.upper}};
  write_json(dir / "condition_report.json", report);

  json ratios = json::array();
  for (std::size_t m = 1; m < res.iterates.size(); ++m)
    ratios.push_back(res.iterates[m - 1] > 0.0 ? res.iterates[m] / res.iterates[m - 1] : 0.0);
  json log{{"iterations", res.iterations},
           {"updates", res.iterates},
           {"ratios", ratios},
           {"measured_ratio", res.measured_ratio},
           {"mean_ratio", res.mean_ratio},
           {"CT_bound", res.CT_bound},
           {"clamped_nodes", res.clamped_nodes},
           {"cubic_bound_worst_ratio", res.cubic_bound_worst_ratio},
           {"flux_residual", res.flux_residual},
           {"q_error", res.q_error ? json(*res.q_error) : json(nullptr)},
           {"checks", checks.doc()}};
  write_json(dir / "iterates.json", log);
  write_json(dir / "metadata.json", metadata(cfg));
  os << "wrote " << (dir / "q.csv").string() << '\n';
  return finish(checks, os);
}

inline int run_verify(const RunConfig& cfg, const RunOptions& opt, std::ostream& os) {
  const auto spec = build_problem(cfg);
  ForwardOptions fo;
  fo.tol = cfg.solver.tol;
  fo.max_iter = cfg.solver.max_iter;
  fo.threads = opt.threads;
  const auto spectral = ForwardSolver(fo).solve(spec);
  FdReport fd_report;
  const auto fd = solve_fd(spec, &fd_report);
  const double cross = max_abs_difference(spectral.u, fd.u);

  CheckList checks;
  json report{{"spectral", {{"residual", spectral.residual_norm ? json(*spectral.residual_norm) : json(nullptr)},
                            {"initial_defect", spectral.initial_defect}}},
              {"fd", {{"dominance_flagged_steps", fd_report.dominance_flagged_steps}, {"min_pivot", fd_report.min_pivot}}},
              {"cross_difference", cross}};
  os << "sup |spectral - fd|: " << format_number(cross) << '\n';
  if (!cfg.exact.is_null()) {
    const auto exact = build_field(cfg, cfg.exact, spec.tgrid, spec.sgrid);
    const double es = max_abs_difference(spectral.u, exact), ef = max_abs_difference(fd.u, exact);
    report["spectral"]["exact_error"] = es;
    report["fd"]["exact_error"] = ef;
    os << "sup error against exact solution: spectral " << format_number(es) << ", fd " << format_number(ef) << '\n';
    if (cfg.checks.max_exact_error) {
      checks.add("spectral_exact_error", es, *cfg.checks.max_exact_error);
      checks.add("fd_exact_error", ef, *cfg.checks.max_exact_error);
    }
  }
  if (cfg.checks.max_residual)
    checks.add("residual", spectral.residual_norm.value_or(std::numeric_limits<double>::infinity()), *cfg.checks.max_residual);
  if (cfg.checks.max_cross_difference) checks.add("cross_difference", cross, *cfg.checks.max_cross_difference);
  report["checks"] = checks.doc();

  const auto dir = output_dir(cfg, opt);
  ensure_directory(dir);
  write_json(dir / "verify.json", report);
  write_json(dir / "metadata.json", metadata(cfg));
  return finish(checks, os);
}

inline json selftest_json(const std::vector<selftest::SuiteResult>& suites) {
  json doc = json::array();
  for (const auto& s : suites) {
    json checks = json::array();
    for (const auto& c : s.checks)
      checks.push_back({{"name", c.name}, {"cases", c.cases}, {"failures", c.failures},
                        {"worst", c.worst}, {"tolerance", c.tolerance}, {"pass", c.passed()}});
    doc.push_back({{"suite", s.name}, {"passed", s.passed()}, {"total", s.checks.size()}, {"checks", checks}});
  }
  return doc;
}

/// The config is optional here; without one, artifacts are written only when
/// an output directory is given on the command line.
inline int run_selftest(const RunConfig* cfg, const RunOptions& opt, std::ostream& os) {
  const auto suites = selftest::run_all();
  bool all = true;
  for (const auto& s : suites) {
    os << s.name << ": " << s.passed() << "/" << s.checks.size() << " identity checks passed\n";
    for (const auto& c : s.checks)
      if (!c.passed())
        os << "  FAIL " << c.name << " (" << c.failures << " of " << c.cases << " cases, worst "
           << format_number(c.worst) << ")\n";
    all = all && s.all_passed();
  }
  std::filesystem::path dir = opt.out_dir;
  if (dir.empty() && cfg) dir = output_dir(*cfg, opt);
  if (!dir.empty()) {
    ensure_directory(dir);
    write_json(dir / "selftest.json", selftest_json(suites));
    if (cfg) write_json(dir / "metadata.json", metadata(*cfg));
  }
  return all ? exit_ok : exit_check_failed;
}

/// Maps library failures onto exit statuses; the message goes to `err`.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return exit_io;
  } catch (const AdmissibilityError& e) {
    err << "inadmissible problem: " << e.what() << '\n';
    return exit_admissibility;
  } catch (const ConvergenceError& e) {
    err << "no convergence: " << e.what() << '\n';
    return exit_convergence;
  } catch (const SingularSystemError& e) {
    err << "no convergence: " << e.what() << '\n';
    return exit_convergence;
  } catch (const Error& e) {
    // domain, grid, aliasing and resource errors all stem from the configured problem
    err << "config error: " << e.what() << '\n';
    return exit_config;
  }
}

inline int run(const std::string& command, const std::optional<std::filesystem::path>& config_path,
               const RunOptions& opt, std::ostream& os, std::ostream& err) {
  return guarded(
      [&] {
        if (command == "selftest" && !config_path) return run_selftest(nullptr, opt, os);
        if (!config_path) throw ConfigError("command '" + command + "' needs --config");
        const auto cfg = load_config(*config_path, command);
        if (command == "forward") return run_forward(cfg, opt, os);
        if (command == "inverse") return run_inverse(cfg, opt, os);
        if (command == "verify") return run_verify(cfg, opt, os);
        return run_selftest(&cfg, opt, os);
      },
      err);
}

} // namespace subdiff::cli
