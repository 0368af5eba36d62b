#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "diqc/analysis.h"
#include "diqc/diffsys.h"
#include "diqc/sim.h"
#include "diqc/sosp.h"

namespace diqc {

/// Parse or validation error at a 1-based line/column of the model text.
class ModelError : public std::runtime_error {
 public:
  ModelError(const std::string& what, int line, int column);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

/// One value of the TOML subset: number, bool, string or (nested) array.
struct ConfigValue {
  enum class Kind { kNumber, kBool, kString, kArray };
  Kind kind = Kind::kNumber;
  double number = 0.0;
  bool integer = false;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;
  int line = 0, column = 0;  // of the first character (inside quotes for strings)
};

using ConfigTable = std::map<std::string, std::map<std::string, ConfigValue>>;

/// `[section]` headers, `key = value` pairs and `#` comments. Values are
/// double-quoted strings (escapes \" \\ \n \t), numbers, true/false and
/// arrays that may span lines. Keys outside any section are rejected, as
/// are duplicates.
ConfigTable ParseConfig(std::string_view text);

/// Model file contents after validation. See docs/formats.md.
struct Model {
  std::string name;
  std::string kind;  // "nominal" or "plant"

  NominalSystem nominal;  // kind == "nominal"
  ControlPlant plant;     // kind == "plant"
  std::vector<int> w_vars, d_vars;

  std::string controller;  // plant only: "ccm" or "static"
  int y_degree = 0;
  double target_alpha = 1.0;
  PolyMatrix gain;  // "static": K

  std::string uncertainty = "none";  // "none" or "delay"
  double theta = 0.0;

  Region region;
  int p_degree = 2;
  int mult_degree = 2;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  std::vector<double> sweep;

  SoundnessOptions sim;

  /// Canonical JSON of the parsed table, the input to the config hash.
  std::string canonical;

  const VarRegistry& registry() const { return kind == "plant" ? plant.registry : nominal.registry; }
};

Model ParseModel(std::string_view text, const std::string& name);
/// Reads the file; the model name is the file stem.
Model LoadModel(const std::string& path);

/// Hex SHA-256.
std::string Sha256Hex(std::string_view data);

}  // namespace diqc
