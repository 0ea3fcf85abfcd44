#include "rdsync/config.hpp"

#include "rdsync/error.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rdsync {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Drops a trailing "# ..." comment that is preceded by whitespace and outside quotes.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted && (i == 0 || line[i - 1] == ' ' || line[i - 1] == '\t')) return line.substr(0, i);
  }
  return line;
}

Json parse_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

void flatten(const Json& node, const std::string& prefix, std::map<std::string, Json>& out) {
  if (node.is_object() && !node.empty()) {
    for (const auto& [k, v] : node.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = node;
  }
}

const char* kind_name(const Json& v) { return v.type_name(); }

}  // namespace

Config Config::parse(std::string_view text, const std::string& source) {
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    Json doc = Json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("", source + ": malformed JSON");
    return from_json(doc);
  }
  Config c;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = source + ":" + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", where + ": unterminated section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", where + ": expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw ConfigError("", where + ": empty key");
    const std::string full = section.empty() ? key : section + "." + key;
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (value.empty()) throw ConfigError(full, where + ": empty value");
    c.values_[full] = parse_value(value);
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

Config Config::from_json(const Json& doc) {
  if (!doc.is_object()) throw ConfigError("", "config JSON must be an object");
  Config c;
  // A run manifest carries the config snapshot under "config".
  flatten(doc.contains("config") && doc.contains("config_hash") ? doc.at("config") : doc, "", c.values_);
  c.values_.erase("");
  return c;
}

const Json& Config::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key, "missing required key");
  return it->second;
}

double Config::number(const std::string& key) const {
  const Json& v = at(key);
  if (!v.is_number()) throw ConfigError(key, std::string("expected a number, got ") + kind_name(v));
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(key, "value must be finite");
  return d;
}

double Config::number(const std::string& key, double fallback) const { return has(key) ? number(key) : fallback; }

std::int64_t Config::integer(const std::string& key) const {
  const Json& v = at(key);
  if (v.is_number_integer()) return v.get<std::int64_t>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  }
  throw ConfigError(key, std::string("expected an integer, got ") + kind_name(v));
}

std::int64_t Config::integer(const std::string& key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::string Config::string(const std::string& key) const {
  const Json& v = at(key);
  if (!v.is_string()) throw ConfigError(key, std::string("expected a string, got ") + kind_name(v));
  return v.get<std::string>();
}

std::string Config::string(const std::string& key, const std::string& fallback) const {
  return has(key) ? string(key) : fallback;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const Json& v = at(key);
  if (!v.is_boolean()) throw ConfigError(key, std::string("expected true or false, got ") + kind_name(v));
  return v.get<bool>();
}

std::vector<double> Config::numbers(const std::string& key) const {
  const Json& v = at(key);
  if (v.is_number()) return {number(key)};
  if (!v.is_array()) throw ConfigError(key, std::string("expected a list of numbers, got ") + kind_name(v));
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ConfigError(key + "[" + std::to_string(i) + "]", "expected a number");
    out.push_back(v[i].get<double>());
    if (!std::isfinite(out.back())) throw ConfigError(key + "[" + std::to_string(i) + "]", "value must be finite");
  }
  return out;
}

std::vector<double> Config::numbers(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? numbers(key) : fallback;
}

Vec Config::point(const std::string& key, int dim) const {
  const std::vector<double> v = numbers(key);
  if (static_cast<int>(v.size()) != dim)
    throw ConfigError(key, "expected " + std::to_string(dim) + " coordinates, got " + std::to_string(v.size()));
  return Eigen::Map<const Vec>(v.data(), dim);
}

Points Config::points(const std::string& key, int dim) const {
  const Json& v = at(key);
  if (v.is_array() && !v.empty() && v[0].is_array()) {
    Points out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      Config one;
      one.set(key + "[" + std::to_string(i) + "]", v[i]);
      out.push_back(one.point(key + "[" + std::to_string(i) + "]", dim));
    }
    return out;
  }
  if (v.is_array() && v.empty()) return {};
  return {point(key, dim)};
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [key, value] : values_) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const std::string& a) {
      return a == key || (a.back() == '.' && key.rfind(a, 0) == 0);
    });
    if (!ok) throw ConfigError(key, "unknown key");
  }
}

Json Config::snapshot() const {
  Json out = Json::object();
  for (const auto& [key, value] : values_) out[Json::json_pointer("/" + [&] {
    std::string p = key;
    std::replace(p.begin(), p.end(), '.', '/');
    return p;
  }())] = value;
  return out;
}

std::string Config::hash() const {
  Json canon = Json::object();
  for (const auto& [key, value] : values_)
    if (key != "run.workers" && key != "output.dir") canon[key] = value;
  return sha256_hex(canon.dump());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

DriftField field_from_config(const Config& c) {
  const std::string kind = c.string("field.kind");
  if (kind == "custom") {
    const int dim = static_cast<int>(c.integer("field.dim"));
    std::vector<std::string> exprs;
    if (c.has("field.expr")) {
      const Json& e = c.at("field.expr");
      if (e.is_string()) {
        exprs.push_back(e.get<std::string>());
      } else if (e.is_array()) {
        for (std::size_t i = 0; i < e.size(); ++i) {
          if (!e[i].is_string()) throw ConfigError("field.expr[" + std::to_string(i) + "]", "expected a string");
          exprs.push_back(e[i].get<std::string>());
        }
      } else {
        throw ConfigError("field.expr", "expected a list of expressions");
      }
    }
    std::optional<std::string> potential;
    if (c.has("field.potential")) potential = c.string("field.potential");
    std::optional<double> lambda;
    if (c.has("field.lambda")) lambda = c.number("field.lambda");
    try {
      return build_custom(c.string("field.name", "custom"), dim, exprs, potential, lambda);
    } catch (const ConfigError& e) {
      if (!e.key_path().empty()) throw;
      throw ConfigError(potential && exprs.empty() ? "field.potential" : "field.expr", e.what());
    }
  }
  BuiltinSpec spec;
  spec.kind = parse_field_kind(kind);
  spec.dim = static_cast<int>(c.integer("field.dim", 0));
  if (c.has("field.params.coefficients")) spec.coefficients = c.numbers("field.params.coefficients");
  if (c.has("field.params.matrix")) {
    const Json& m = c.at("field.params.matrix");
    if (!m.is_array() || m.empty() || !m[0].is_array()) throw ConfigError("field.params.matrix", "expected a list of rows");
    const auto n = static_cast<Eigen::Index>(m.size());
    spec.matrix = Mat(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Json& row = m[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n)
        throw ConfigError("field.params.matrix[" + std::to_string(i) + "]", "expected a row of " + std::to_string(n) + " numbers");
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!row[static_cast<std::size_t>(j)].is_number())
          throw ConfigError("field.params.matrix[" + std::to_string(i) + "][" + std::to_string(j) + "]", "expected a number");
        spec.matrix(i, j) = row[static_cast<std::size_t>(j)].get<double>();
      }
    }
  }
  return build(spec);
}

IntegratorSpec integrator_from_config(const Config& c) {
  IntegratorSpec s;
  if (c.has("integrator.scheme")) s.scheme = parse_scheme(c.string("integrator.scheme"));
  s.dt = c.number("integrator.dt", s.dt);
  if (!(s.dt > 0.0)) throw ConfigError("integrator.dt", "must be positive");
  if (c.has("noise.delta") && c.number("noise.delta") != s.dt)
    throw ConfigError("noise.delta", "must equal integrator.dt (no sub-stepping)");
  s.newton_tol = c.number("integrator.newton_tol", s.newton_tol);
  if (!(s.newton_tol > 0.0)) throw ConfigError("integrator.newton_tol", "must be positive");
  s.newton_max_iter = static_cast<int>(c.integer("integrator.newton_max_iter", s.newton_max_iter));
  if (s.newton_max_iter < 1) throw ConfigError("integrator.newton_max_iter", "must be at least 1");
  return s;
}

}  // namespace rdsync
