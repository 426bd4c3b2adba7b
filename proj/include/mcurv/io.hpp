#pragma once

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcurv/error.hpp"
#include "mcurv/problem.hpp"

namespace mcurv {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& text, const std::string& key, int line) {
  const std::string t = trim(text);
  if (t == "inf" || t == "infinity") return kInfinity;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != t.size() || !std::isfinite(v))
    throw Error(ErrorCode::Parse, "line " + std::to_string(line) + ": key '" + key +
                                      "' expects a number, got '" + t + "'");
  return v;
}

inline std::vector<double> parse_list(const std::string& text, const std::string& key, int line) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number(item, key, line));
  return out;
}

}  // namespace detail

/// Parses `key = value` lines ('#' starts a comment). Unknown or repeated keys are errors.
inline ProblemSpec parse_problem_text(const std::string& text, const std::string& origin = "<text>") {
  static const std::set<std::string> known{
      "dimension", "outer_radius", "inner_radius", "lambda",      "family",
      "weight",    "weight_slope", "weight_r",     "weight_values", "cubic",
      "exponent",  "table_s",      "table_f",      "alpha"};
  std::map<std::string, std::pair<std::string, int>> kv;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = detail::trim(raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line) + ": expected key = value");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (!known.count(key))
      throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line) + ": unknown key '" + key + "'");
    if (kv.count(key))
      throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line) + ": duplicate key '" + key + "'");
    if (value.empty())
      throw Error(ErrorCode::Parse, origin + ":" + std::to_string(line) + ": empty value for '" + key + "'");
    kv[key] = {value, line};
  }

  auto num = [&](const std::string& key, double fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : detail::parse_number(it->second.first, key, it->second.second);
  };
  auto list = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) return std::vector<double>{};
    return detail::parse_list(it->second.first, key, it->second.second);
  };
  auto where = [&](const std::string& key) {
    const auto it = kv.find(key);
    return it == kv.end() ? origin : origin + ":" + std::to_string(it->second.second);
  };

  ProblemSpec spec;
  const double dim = num("dimension", 3);
  if (dim != std::floor(dim)) throw Error(ErrorCode::Parse, where("dimension") + ": dimension must be an integer");
  spec.dimension = static_cast<int>(dim);
  spec.outer_radius = num("outer_radius", 1.0);
  spec.inner_radius = num("inner_radius", 0.0);
  spec.lambda = num("lambda", 0.0);
  spec.alpha = num("alpha", kInfinity);

  Weight weight = Weight::constant(num("weight", 1.0));
  if (kv.count("weight_r") || kv.count("weight_values")) {
    if (kv.count("weight") || kv.count("weight_slope"))
      throw Error(ErrorCode::Parse, where("weight_r") + ": a weight table excludes weight and weight_slope");
    try {
      weight = Weight::table(list("weight_r"), list("weight_values"));
    } catch (const Error& e) {
      throw Error(ErrorCode::Parse, where("weight_r") + ": " + e.what());
    }
  } else if (kv.count("weight_slope")) {
    weight = Weight::affine(num("weight", 1.0), num("weight_slope", 0.0));
  }

  const std::string family = kv.count("family") ? kv["family"].first : "linear_plus_cubic";
  auto forbid = [&](std::initializer_list<const char*> keys) {
    for (const char* k : keys)
      if (kv.count(k))
        throw Error(ErrorCode::Parse, where(k) + ": key '" + k + "' does not apply to family " + family);
  };
  try {
    if (family == "linear_plus_cubic") {
      forbid({"exponent", "table_s", "table_f"});
      spec.f = Nonlinearity::linear_plus_cubic(weight, num("cubic", 0.0));
    } else if (family == "power_superlinear") {
      forbid({"cubic", "table_s", "table_f"});
      spec.f = Nonlinearity::power_superlinear(weight, num("exponent", 2.0));
    } else if (family == "power_sublinear") {
      forbid({"cubic", "table_s", "table_f"});
      spec.f = Nonlinearity::power_sublinear(weight, num("exponent", 0.5));
    } else if (family == "custom") {
      forbid({"cubic", "exponent"});
      spec.f = Nonlinearity::custom(weight, list("table_s"), list("table_f"));
    } else {
      throw Error(ErrorCode::Parse, where("family") + ": unknown family '" + family + "'");
    }
    spec.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    throw Error(ErrorCode::Parse, origin + ": " + e.what());
  }
  return spec;
}

inline ProblemSpec parse_problem(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read problem file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_problem_text(ss.str(), path);
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Canonical text of every field that influences a computation.
inline std::string canonical_problem(const ProblemSpec& s) {
  std::string out = "dimension=" + std::to_string(s.dimension) +
                    ";outer_radius=" + fmt17(s.outer_radius) +
                    ";inner_radius=" + fmt17(s.inner_radius) + ";lambda=" + fmt17(s.lambda) +
                    ";alpha=" + fmt17(s.alpha) + ";f=" + s.f.describe();
  const auto& w = s.f.weight();
  if (w.kind() == Weight::Kind::Table) {
    out += ";weight_r=";
    for (double r : w.table_radii()) out += fmt17(r) + ",";
    out += ";weight_values=";
    for (double v : w.table_values()) out += fmt17(v) + ",";
  }
  if (s.f.family() == Family::Custom) {
    out += ";table_s=";
    for (double x : s.f.table_s()) out += fmt17(x) + ",";
    out += ";table_f=";
    for (double x : s.f.table_f()) out += fmt17(x) + ",";
  }
  return out;
}

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string problem_hash(const ProblemSpec& s) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(canonical_problem(s)));
  return buf;
}

struct Provenance {
  std::string command;
  std::string problem_hash;
  std::string problem;
  double tol_rel = 0.0;
  double tol_abs = 0.0;
  int workers = 1;
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["tool"] = "mcurv";
    j["version"] = kVersion;
    j["command"] = command;
    j["problem_hash"] = problem_hash;
    j["problem"] = problem;
    j["tolerances"] = {{"rel", tol_rel}, {"abs", tol_abs}};
    j["workers"] = workers;
    if (!extra.empty()) j["settings"] = extra;
    return j;
  }
};

inline Provenance make_provenance(const std::string& command, const ProblemSpec& spec,
                                  double tol_rel, double tol_abs, int workers) {
  return {command, problem_hash(spec), canonical_problem(spec), tol_rel, tol_abs, workers, {}};
}

/// A table of preformatted cells; rows keep the order the caller gives them.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) {
    if (row.size() != header.size()) throw Error(ErrorCode::Malformed, "row width does not match header");
    rows.push_back(std::move(row));
  }
};

inline std::string render_csv(const Table& t, const Provenance& prov) {
  std::string out = "# " + prov.to_json().dump() + "\n";
  for (std::size_t i = 0; i < t.header.size(); ++i) out += (i ? "," : "") + t.header[i];
  out += "\n";
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
    out += "\n";
  }
  return out;
}

/// Rows as objects; cells that parse fully as numbers are emitted as numbers.
inline nlohmann::ordered_json table_json(const Table& t) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& row : t.rows) {
    nlohmann::ordered_json o;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string& c = row[i];
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (!c.empty() && end == c.c_str() + c.size() && std::isfinite(v))
        o[t.header[i]] = v;
      else
        o[t.header[i]] = c;
    }
    arr.push_back(std::move(o));
  }
  return arr;
}

inline std::string render_json(const nlohmann::ordered_json& data, const Provenance& prov) {
  nlohmann::ordered_json j;
  j["provenance"] = prov.to_json();
  j["data"] = data;
  return j.dump(2) + "\n";
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

}  // namespace mcurv
