#pragma once

#include "rdsync/flow.hpp"
#include "rdsync/types.hpp"
#include "rdsync/vectorfield.hpp"

#include "json.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rdsync {

using Json = nlohmann::json;

// Experiment configuration: a flat map from dotted keys to JSON values.
//
// Text format, one entry per line:
//   # comment
//   [noise]
//   seed = 42            -> noise.seed
//   field.kind = v_e     (dotted keys work outside sections too)
//   run.x0 = [1.0, 0.0]  (values are JSON when they parse as JSON, else bare strings)
// A JSON document is accepted as well: nested objects are flattened, and a run
// manifest is recognised by its "config" member, so a run can be replayed from it.
class Config {
 public:
  static Config parse(std::string_view text, const std::string& source = "<config>");
  static Config load(const std::string& path);
  static Config from_json(const Json& doc);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, Json value) { values_[key] = std::move(value); }
  void erase(const std::string& key) { values_.erase(key); }
  const std::map<std::string, Json>& values() const { return values_; }

  // Typed access; throw ConfigError naming the key on a missing key or wrong type.
  const Json& at(const std::string& key) const;
  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::int64_t integer(const std::string& key) const;
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  std::string string(const std::string& key) const;
  std::string string(const std::string& key, const std::string& fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const;
  Vec point(const std::string& key, int dim) const;
  Points points(const std::string& key, int dim) const;  // a point or a list of points

  // Rejects keys outside `allowed` (exact keys, or prefixes ending in '.').
  void require_known(const std::vector<std::string>& allowed) const;

  // Nested JSON snapshot of all keys.
  Json snapshot() const;
  // SHA-256 of the canonical form (sorted keys, normalised JSON values), excluding keys that
  // cannot change results (worker count, output directory).
  std::string hash() const;

 private:
  std::map<std::string, Json> values_;
};

// Hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

// field.kind = ou | double_well | v_e | v_s | radial_polynomial | circle_stratonovich | linear | custom
DriftField field_from_config(const Config& config);
// integrator.scheme / integrator.dt / integrator.newton_tol / integrator.newton_max_iter
IntegratorSpec integrator_from_config(const Config& config);

}  // namespace rdsync
