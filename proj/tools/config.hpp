#pragma once

// Run configuration: a single JSON document, validated key by key. Parsing
// produces both typed settings and the fully resolved document (defaults
// filled in), which every run writes back next to its results.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "subdiff/error.hpp"

namespace subdiff::cli {

using json = nlohmann::ordered_json;

inline constexpr double big = 1e300; // bound for otherwise unrestricted numbers

/// JSON pointer -> 1-based line of the value, for error messages. Runs on
/// text that already parsed, so it only tracks structure.
class LineIndex {
public:
  LineIndex() = default;
  explicit LineIndex(const std::string& text) : text_(text) {
    skip_ws();
    value("");
  }

  std::size_t line(const std::string& pointer) const {
    auto it = lines_.find(pointer);
    return it == lines_.end() ? 0 : it->second;
  }

private:
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      if (text_[pos_] == '\n') ++line_;
      ++pos_;
    }
  }

  std::string string_token() {
    std::string out;
    ++pos_; // opening quote
    while (pos_ < text_.size() && text_[pos_] != '"') {
      if (text_[pos_] == '\\') ++pos_;
      if (pos_ < text_.size()) out += text_[pos_++];
    }
    ++pos_;
    return out;
  }

  static std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
      if (c == '~') out += "~0";
      else if (c == '/') out += "~1";
      else out += c;
    }
    return out;
  }

  void value(const std::string& pointer) {
    lines_[pointer] = line_;
    if (pos_ >= text_.size()) return;
    const char c = text_[pos_];
    if (c == '{' || c == '[') {
      const char close = c == '{' ? '}' : ']';
      ++pos_;
      std::size_t index = 0;
      for (;;) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] == close) break;
        std::string child;
        if (c == '{') {
          child = pointer + "/" + escape(string_token());
          skip_ws();
          ++pos_; // colon
          skip_ws();
        } else {
          child = pointer + "/" + std::to_string(index++);
        }
        value(child);
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == ',') ++pos_;
      }
      ++pos_;
    } else if (c == '"') {
      string_token();
    } else {
      while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
             !std::isspace(static_cast<unsigned char>(text_[pos_])))
        ++pos_;
    }
  }

  std::string text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::map<std::string, std::size_t> lines_;
};

struct ProblemConfig {
  double length = 1.0;
  double T = 1.0;
  double rho = 0.5;
  std::size_t N = 256;
  std::size_t M = 64;
  std::size_t K = 16;
};

struct SolverConfig {
  double tol = 1e-10;
  std::size_t max_iter = 200;
  double inverse_tol = 1e-8;
  std::size_t inverse_max_iter = 5000;
  double inner_tol = 1e-12;
  std::size_t inner_max_iter = 500;
};

struct DataConfig {
  std::string psi = "synthetic"; // or "csv"
  std::filesystem::path path;
  double noise = 0.0;
  std::uint64_t seed = 1;
  std::optional<double> psi0;
};

struct ChecksConfig {
  std::optional<double> max_residual;
  std::optional<double> max_exact_error;
  std::optional<double> max_cross_difference;
  std::optional<double> max_recovery_error;
  bool require_conditions = false;
};

struct RunConfig {
  std::string command;
  std::filesystem::path base_dir; // relative data paths resolve against it
  ProblemConfig problem;
  // coefficient and data blocks stay as resolved JSON; build.hpp samples them
  json sigma, q, phi, f, exact;
  DataConfig data;
  SolverConfig solver;
  ChecksConfig checks;
  std::filesystem::path out_dir = "subdiff_out";
  json resolved;
};

inline const std::set<std::string> commands = {"forward", "inverse", "verify", "selftest"};

namespace detail {

/// Walks one JSON object, consuming keys as they are read and recording the
/// resolved value of each. finish() rejects whatever was never consumed.
class Reader {
public:
  Reader(const json& node, std::string pointer, const std::string& file, const LineIndex& lines,
         json& resolved)
      : node_(node), pointer_(std::move(pointer)), file_(file), lines_(lines), out_(resolved) {
    if (!node_.is_object()) fail(pointer_, "expected an object");
    out_ = json::object();
  }

  [[noreturn]] void fail(const std::string& pointer, const std::string& what) const {
    std::ostringstream os;
    os << file_ << ":" << lines_.line(pointer) << ": " << (pointer.empty() ? "/" : pointer) << ": " << what;
    throw ConfigError(os.str());
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  std::string at(const std::string& key) const { return pointer_ + "/" + key; }

  double number(const std::string& key, std::optional<double> fallback, double lo, double hi,
                bool open_lo = false, bool open_hi = false) {
    const json* v = take(key);
    double x;
    if (!v) {
      if (!fallback) fail(pointer_, "missing required key '" + key + "'");
      x = *fallback;
    } else {
      if (!v->is_number()) fail(at(key), "expected a number");
      x = v->get<double>();
    }
    const bool below = open_lo ? !(x > lo) : !(x >= lo);
    const bool above = open_hi ? !(x < hi) : !(x <= hi);
    if (below || above) {
      std::ostringstream os;
      os << "value " << x << " outside " << (open_lo ? "(" : "[") << lo << ", " << hi << (open_hi ? ")" : "]");
      fail(at(key), os.str());
    }
    out_[key] = x;
    return x;
  }

  std::optional<double> optional_number(const std::string& key, double lo, double hi) {
    if (!has(key) || node_.at(key).is_null()) {
      take(key);
      out_[key] = nullptr;
      return std::nullopt;
    }
    return number(key, std::nullopt, lo, hi);
  }

  std::uint64_t integer(const std::string& key, std::optional<std::uint64_t> fallback, std::uint64_t lo,
                        std::uint64_t hi) {
    const json* v = take(key);
    std::uint64_t x;
    if (!v) {
      if (!fallback) fail(pointer_, "missing required key '" + key + "'");
      x = *fallback;
    } else {
      if (!v->is_number_integer() || (!v->is_number_unsigned() && v->get<std::int64_t>() < 0))
        fail(at(key), "expected a nonnegative integer");
      x = v->get<std::uint64_t>();
    }
    if (x < lo || x > hi) {
      std::ostringstream os;
      os << "value " << x << " outside [" << lo << ", " << hi << "]";
      fail(at(key), os.str());
    }
    out_[key] = x;
    return x;
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = take(key);
    if (v && !v->is_boolean()) fail(at(key), "expected true or false");
    const bool b = v ? v->get<bool>() : fallback;
    out_[key] = b;
    return b;
  }

  std::string string(const std::string& key, std::optional<std::string> fallback,
                     const std::set<std::string>& allowed = {}) {
    const json* v = take(key);
    std::string s;
    if (!v) {
      if (!fallback) fail(pointer_, "missing required key '" + key + "'");
      s = *fallback;
    } else {
      if (!v->is_string()) fail(at(key), "expected a string");
      s = v->get<std::string>();
    }
    if (!allowed.empty() && !allowed.count(s)) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      fail(at(key), "'" + s + "' is not one of {" + list + "}");
    }
    out_[key] = s;
    return s;
  }

  /// The raw child node; the caller must resolve it into `child_out`.
  const json* child(const std::string& key, json*& child_out) {
    const json* v = take(key);
    child_out = v ? &out_[key] : nullptr;
    return v;
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key '" + it.key() + "'");
  }

  const std::string& pointer() const { return pointer_; }
  const std::string& file() const { return file_; }
  const LineIndex& lines() const { return lines_; }

private:
  const json* take(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) ? &node_.at(key) : nullptr;
  }

  const json& node_;
  std::string pointer_;
  const std::string& file_;
  const LineIndex& lines_;
  json& out_;
  std::set<std::string> seen_;
};



inline void time_profile(const json& node, const std::string& pointer, const std::string& file,
                         const LineIndex& lines, json& out) {
  Reader r(node, pointer, file, lines, out);
  const auto kind = r.string("kind", std::nullopt, {"constant", "affine", "sinusoidal-offset", "power-sum", "csv"});
  if (kind == "constant") {
    r.number("value", std::nullopt, -big, big);
  } else if (kind == "affine") {
    r.number("a", std::nullopt, -big, big);
    r.number("b", std::nullopt, -big, big);
  } else if (kind == "sinusoidal-offset") {
    r.number("offset", std::nullopt, -big, big);
    r.number("amplitude", std::nullopt, -big, big);
    r.number("frequency", 1.0, -big, big);
    r.number("phase", 0.0, -big, big);
  } else if (kind == "power-sum") {
    json* terms_out = nullptr;
    const json* terms = r.child("terms", terms_out);
    if (!terms || !terms->is_array() || terms->empty())
      r.fail(r.at("terms"), "expected a nonempty array of {coefficient, power}");
    *terms_out = json::array();
    for (std::size_t i = 0; i < terms->size(); ++i) {
      json term;
      Reader tr((*terms)[i], r.at("terms") + "/" + std::to_string(i), file, lines, term);
      tr.number("coefficient", std::nullopt, -big, big);
      tr.number("power", std::nullopt, 0.0, 64.0);
      tr.finish();
      terms_out->push_back(term);
    }
  } else {
    r.string("path", std::nullopt);
  }
  r.finish();
}

// Spatial data: "phi" has scalar amplitudes, "field" carries a time profile per mode.
inline void space_block(const json& node, const std::string& pointer, const std::string& file,
                        const LineIndex& lines, json& out, bool field) {
  Reader r(node, pointer, file, lines, out);
  const auto kind = r.string("kind", std::nullopt, {"zero", "sine-modes", "csv"});
  if (kind == "sine-modes") {
    json* modes_out = nullptr;
    const json* modes = r.child("modes", modes_out);
    if (!modes || !modes->is_array() || modes->empty()) r.fail(r.at("modes"), "expected a nonempty array of modes");
    *modes_out = json::array();
    for (std::size_t i = 0; i < modes->size(); ++i) {
      const std::string mp = r.at("modes") + "/" + std::to_string(i);
      json mode;
      Reader mr((*modes)[i], mp, file, lines, mode);
      mr.integer("k", std::nullopt, 1, 1u << 20);
      if (field) {
        json* time_out = nullptr;
        const json* time = mr.child("time", time_out);
        if (!time) mr.fail(mp, "missing required key 'time'");
        time_profile(*time, mp + "/time", file, lines, *time_out);
      } else {
        mr.number("amplitude", std::nullopt, -big, big);
      }
      mr.finish();
      modes_out->push_back(mode);
    }
  } else if (kind == "csv") {
    r.string("path", std::nullopt);
  }
  r.finish();
}

} // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& file,
                              const std::string& command_override = "") {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line
    std::size_t line = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte, text.size()); ++i)
      if (text[i] == '\n') ++line;
    std::ostringstream os;
    os << file << ":" << line << ": JSON syntax error: " << e.what();
    throw ConfigError(os.str());
  }
  const LineIndex lines(text);
  RunConfig cfg;
  detail::Reader root(doc, "", file, lines, cfg.resolved);

  if (root.has("command") || command_override.empty()) {
    cfg.command = root.string("command", std::nullopt, commands);
    if (!command_override.empty() && cfg.command != command_override)
      root.fail(root.at("command"), "config is for '" + cfg.command + "' but the command line asks for '" +
                                        command_override + "'");
  } else {
    cfg.command = command_override;
    cfg.resolved["command"] = cfg.command;
  }

  auto block = [&](const std::string& key, bool required, auto&& resolve) {
    json* out = nullptr;
    const json* node = root.child(key, out);
    if (!node) {
      if (required) root.fail("", "missing required block '" + key + "'");
      return false;
    }
    resolve(*node, "/" + key, *out);
    return true;
  };

  const bool needs_problem = cfg.command != "selftest";
  const bool q_required = cfg.command == "forward" || cfg.command == "verify";

  auto& P = cfg.problem;
  block("problem", needs_problem, [&](const json& n, const std::string& p, json& o) {
        detail::Reader r(n, p, file, lines, o);
        P.length = r.number("length", 1.0, 0.0, 1e6, true);
        P.T = r.number("T", 1.0, 0.0, 1e6, true);
        P.rho = r.number("rho", std::nullopt, 0.0, 1.0, true, true);
        P.N = r.integer("N", std::nullopt, 1, 1u << 20);
        P.M = r.integer("M", std::nullopt, 2, 1u << 16);
        if (P.M % 2 != 0) r.fail(r.at("M"), "M must be even (composite Simpson)");
        P.K = r.integer("K", std::nullopt, 1, P.M / 2);
        r.finish();
      });

  auto profile_block = [&](const std::string& key, bool required, json& slot) {
    block(key, required, [&](const json& n, const std::string& p, json& o) {
      detail::time_profile(n, p, file, lines, o);
      slot = o;
    });
  };
  profile_block("sigma", needs_problem, cfg.sigma);
  const bool synthetic = [&] {
    if (cfg.command != "inverse") return false;
    const auto it = doc.find("data");
    if (it == doc.end() || !it->is_object() || !it->contains("psi")) return true;
    return (*it)["psi"] == "synthetic";
  }();
  profile_block("q", q_required || synthetic, cfg.q);

  auto space = [&](const std::string& key, bool field, json& slot) {
    if (!block(key, false, [&](const json& n, const std::string& p, json& o) {
          detail::space_block(n, p, file, lines, o, field);
          slot = o;
        }) && needs_problem && key != "exact") {
      slot = json{{"kind", "zero"}};
      cfg.resolved[key] = slot;
    }
  };
  space("phi", false, cfg.phi);
  space("f", true, cfg.f);
  space("exact", true, cfg.exact);

  if (cfg.command == "inverse") {
    block("data", false, [&](const json& n, const std::string& p, json& o) {
      detail::Reader r(n, p, file, lines, o);
      cfg.data.psi = r.string("psi", "synthetic", {"synthetic", "csv"});
      if (cfg.data.psi == "csv") cfg.data.path = r.string("path", std::nullopt);
      cfg.data.noise = r.number("noise", 0.0, 0.0, 1.0, false, true);
      cfg.data.seed = r.integer("seed", 1, 0, std::numeric_limits<std::uint64_t>::max());
      cfg.data.psi0 = r.optional_number("psi0", 0.0, big);
      if (cfg.data.psi0 && !(*cfg.data.psi0 > 0.0)) r.fail(r.at("psi0"), "psi0 must be positive");
      r.finish();
    });
    if (!cfg.resolved.contains("data"))
      cfg.resolved["data"] = json{{"psi", "synthetic"}, {"noise", 0.0}, {"seed", 1}, {"psi0", nullptr}};
  }

  auto& S = cfg.solver;
  json solver_default = json::object();
  const json* solver_node = doc.contains("solver") ? &doc["solver"] : &solver_default;
  {
    json* out = nullptr;
    root.child("solver", out);
    json& o = out ? *out : cfg.resolved["solver"];
    detail::Reader r(*solver_node, "/solver", file, lines, o);
    S.tol = r.number("tol", S.tol, 0.0, 1.0, true, true);
    S.max_iter = r.integer("max_iter", S.max_iter, 1, 1000000);
    if (cfg.command == "inverse") {
      S.inverse_tol = r.number("inverse_tol", S.inverse_tol, 0.0, 1.0, true, true);
      S.inverse_max_iter = r.integer("inverse_max_iter", S.inverse_max_iter, 1, 1000000);
      S.inner_tol = r.number("inner_tol", S.inner_tol, 0.0, 1.0, true, true);
      S.inner_max_iter = r.integer("inner_max_iter", S.inner_max_iter, 1, 1000000);
    }
    r.finish();
  }

  json checks_default = json::object();
  const json* checks_node = doc.contains("checks") ? &doc["checks"] : &checks_default;
  {
    json* out = nullptr;
    root.child("checks", out);
    json& o = out ? *out : cfg.resolved["checks"];
    detail::Reader r(*checks_node, "/checks", file, lines, o);
    auto& C = cfg.checks;
    if (cfg.command == "forward" || cfg.command == "verify") {
      C.max_residual = r.optional_number("max_residual", 0.0, big);
      C.max_exact_error = r.optional_number("max_exact_error", 0.0, big);
    }
    if (cfg.command == "verify") C.max_cross_difference = r.optional_number("max_cross_difference", 0.0, big);
    if (cfg.command == "inverse") {
      C.max_recovery_error = r.optional_number("max_recovery_error", 0.0, big);
      C.require_conditions = r.boolean("require_conditions", false);
    }
    r.finish();
    if (C.max_exact_error && cfg.exact.is_null())
      r.fail(r.at("max_exact_error"), "needs an 'exact' block to compare against");
  }

  json output_default = json::object();
  const json* output_node = doc.contains("output") ? &doc["output"] : &output_default;
  {
    json* out = nullptr;
    root.child("output", out);
    json& o = out ? *out : cfg.resolved["output"];
    detail::Reader r(*output_node, "/output", file, lines, o);
    cfg.out_dir = r.string("dir", cfg.out_dir.string());
    r.finish();
  }

  root.finish();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::string& command_override = "") {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto cfg = parse_config(buf.str(), path.string(), command_override);
  cfg.base_dir = path.parent_path();
  return cfg;
}

} // namespace subdiff::cli
