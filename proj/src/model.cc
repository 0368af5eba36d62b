#include "diqc/model.h"

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace diqc {

ModelError::ModelError(const std::string& what, int line, int column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + what),
      line_(line),
      column_(column) {}

namespace {

class ConfigParser {
 public:
  explicit ConfigParser(std::string_view text) : s_(text) {}

  ConfigTable Parse() {
    ConfigTable table;
    std::string section;
    bool have_section = false;
    while (true) {
      SkipBlank();
      if (AtEnd()) break;
      if (Peek() == '\n') {
        Advance();
        continue;
      }
      if (Peek() == '#') {
        SkipComment();
        continue;
      }
      const int line = line_, col = col_;
      if (Peek() == '[') {
        Advance();
        SkipBlank();
        section = Key();
        SkipBlank();
        Expect(']');
        if (table.contains(section)) Fail("duplicate section [" + section + "]", line, col);
        table[section];
        have_section = true;
      } else {
        const std::string key = Key();
        if (!have_section) Fail("key '" + key + "' outside of a [section]", line, col);
        SkipBlank();
        Expect('=');
        SkipBlank();
        ConfigValue v = Value();
        if (table[section].contains(key)) {
          Fail("duplicate key '" + key + "' in [" + section + "]", line, col);
        }
        table[section][key] = std::move(v);
      }
      EndOfLine();
    }
    return table;
  }

 private:
  [[noreturn]] void Fail(const std::string& msg, int line, int col) const {
    throw ModelError(msg, line, col);
  }
  [[noreturn]] void Fail(const std::string& msg) const { Fail(msg, line_, col_); }

  bool AtEnd() const { return pos_ >= s_.size(); }
  char Peek() const { return AtEnd() ? '\0' : s_[pos_]; }
  char Advance() {
    const char c = s_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }
  void SkipBlank() {
    while (!AtEnd() && (Peek() == ' ' || Peek() == '\t' || Peek() == '\r')) Advance();
  }
  void SkipComment() {
    while (!AtEnd() && Peek() != '\n') Advance();
  }
  // Whitespace, newlines and comments (inside arrays).
  void SkipSpace() {
    while (!AtEnd()) {
      if (Peek() == '#') {
        SkipComment();
      } else if (std::isspace(static_cast<unsigned char>(Peek()))) {
        Advance();
      } else {
        break;
      }
    }
  }
  void Expect(char c) {
    if (Peek() != c) {
      Fail(std::string("expected '") + c + "'" +
           (AtEnd() ? " before end of input" : std::string(", found '") + Peek() + "'"));
    }
    Advance();
  }
  void EndOfLine() {
    SkipBlank();
    if (Peek() == '#') SkipComment();
    if (AtEnd()) return;
    if (Peek() != '\n') Fail(std::string("unexpected '") + Peek() + "' after value");
    Advance();
  }

  std::string Key() {
    std::string k;
    while (!AtEnd() && (std::isalnum(static_cast<unsigned char>(Peek())) || Peek() == '_' ||
                        Peek() == '-')) {
      k += Advance();
    }
    if (k.empty()) Fail("expected a key or section name");
    return k;
  }

  ConfigValue Value() {
    ConfigValue v;
    v.line = line_;
    v.column = col_;
    const char c = Peek();
    if (c == '"') {
      Advance();
      v.kind = ConfigValue::Kind::kString;
      v.line = line_;
      v.column = col_;
      while (true) {
        if (AtEnd() || Peek() == '\n') Fail("unterminated string", v.line, v.column - 1);
        const char ch = Advance();
        if (ch == '"') break;
        if (ch == '\\') {
          if (AtEnd()) Fail("unterminated string", v.line, v.column - 1);
          const char e = Advance();
          switch (e) {
            case '"': v.text += '"'; break;
            case '\\': v.text += '\\'; break;
            case 'n': v.text += '\n'; break;
            case 't': v.text += '\t'; break;
            default: Fail(std::string("unknown escape \\") + e);
          }
        } else {
          v.text += ch;
        }
      }
    } else if (c == '[') {
      Advance();
      v.kind = ConfigValue::Kind::kArray;
      SkipSpace();
      while (Peek() != ']') {
        if (AtEnd()) Fail("unterminated array", v.line, v.column);
        v.items.push_back(Value());
        SkipSpace();
        if (Peek() == ',') {
          Advance();
          SkipSpace();
        } else if (Peek() != ']') {
          Fail("expected ',' or ']' in array");
        }
      }
      Advance();
    } else if (s_.substr(pos_, 4) == "true" || s_.substr(pos_, 5) == "false") {
      v.kind = ConfigValue::Kind::kBool;
      v.boolean = s_.substr(pos_, 4) == "true";
      for (int i = 0, n = v.boolean ? 4 : 5; i < n; ++i) Advance();
    } else if (c == '+' || c == '-' || c == '.' || std::isdigit(static_cast<unsigned char>(c))) {
      std::string num;
      while (!AtEnd() && (std::isalnum(static_cast<unsigned char>(Peek())) || Peek() == '.' ||
                          Peek() == '+' || Peek() == '-' || Peek() == '_')) {
        if (Peek() == '_') {
          Advance();
          continue;
        }
        num += Advance();
      }
      size_t used = 0;
      try {
        v.number = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != num.size() || !std::isfinite(v.number)) {
        Fail("malformed number '" + num + "'", v.line, v.column);
      }
      v.kind = ConfigValue::Kind::kNumber;
      v.integer = num.find_first_of(".eE") == std::string::npos;
    } else {
      Fail(AtEnd() || c == '\n' ? std::string("missing value") : std::string("unexpected '") + c + "'");
    }
    return v;
  }

  std::string_view s_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

nlohmann::json ToJson(const ConfigValue& v) {
  switch (v.kind) {
    case ConfigValue::Kind::kNumber:
      if (v.integer) return static_cast<long long>(v.number);
      return v.number;
    case ConfigValue::Kind::kBool:
      return v.boolean;
    case ConfigValue::Kind::kString:
      return v.text;
    case ConfigValue::Kind::kArray: {
      nlohmann::json a = nlohmann::json::array();
      for (const ConfigValue& i : v.items) a.push_back(ToJson(i));
      return a;
    }
  }
  return nullptr;
}

// Typed access with location-aware errors and unknown-key detection.
class Reader {
 public:
  explicit Reader(const ConfigTable& t) : t_(t) {}

  bool Has(const std::string& sec, const std::string& key) const {
    auto s = t_.find(sec);
    return s != t_.end() && s->second.contains(key);
  }
  bool HasSection(const std::string& sec) const { return t_.contains(sec); }

  const ConfigValue& Get(const std::string& sec, const std::string& key) {
    used_.insert(sec + "." + key);
    auto s = t_.find(sec);
    if (s == t_.end()) throw ModelError("missing section [" + sec + "]", 1, 1);
    auto k = s->second.find(key);
    if (k == s->second.end()) {
      throw ModelError("missing key '" + key + "' in [" + sec + "]", 1, 1);
    }
    return k->second;
  }

  static const ConfigValue& Want(const ConfigValue& v, ConfigValue::Kind kind, const char* what) {
    if (v.kind != kind) throw ModelError(std::string("expected ") + what, v.line, v.column);
    return v;
  }

  std::string String(const std::string& sec, const std::string& key, const std::string& def) {
    if (!Has(sec, key)) return def;
    return Want(Get(sec, key), ConfigValue::Kind::kString, "a string").text;
  }
  double Number(const std::string& sec, const std::string& key, double def) {
    if (!Has(sec, key)) return def;
    return Want(Get(sec, key), ConfigValue::Kind::kNumber, "a number").number;
  }
  long long Integer(const std::string& sec, const std::string& key, long long def) {
    if (!Has(sec, key)) return def;
    const ConfigValue& v = Want(Get(sec, key), ConfigValue::Kind::kNumber, "an integer");
    if (!v.integer) throw ModelError("expected an integer", v.line, v.column);
    return static_cast<long long>(v.number);
  }
  std::vector<const ConfigValue*> Array(const std::string& sec, const std::string& key,
                                        bool required) {
    std::vector<const ConfigValue*> out;
    if (!required && !Has(sec, key)) return out;
    for (const ConfigValue& i : Want(Get(sec, key), ConfigValue::Kind::kArray, "an array").items) {
      out.push_back(&i);
    }
    return out;
  }
  std::vector<std::string> Names(const std::string& sec, const std::string& key, bool required) {
    std::vector<std::string> out;
    for (const ConfigValue* v : Array(sec, key, required)) {
      out.push_back(Want(*v, ConfigValue::Kind::kString, "a name string").text);
    }
    return out;
  }

  void CheckAllUsed() const {
    for (const auto& [sec, keys] : t_) {
      for (const auto& [key, v] : keys) {
        if (!used_.contains(sec + "." + key)) {
          throw ModelError("unknown key '" + key + "' in [" + sec + "]", v.line, v.column);
        }
      }
    }
  }

 private:
  const ConfigTable& t_;
  std::set<std::string> used_;
};

// Only reached for keys that were given, so the location is real.
[[noreturn]] void FailAt(Reader& r, const std::string& sec, const std::string& key,
                         const std::string& msg) {
  const ConfigValue& v = r.Get(sec, key);
  throw ModelError(msg, v.line, v.column);
}

Polynomial PolyAt(const ConfigValue& v, const VarRegistry& reg) {
  if (v.kind == ConfigValue::Kind::kNumber) return Polynomial::Constant(v.number, reg.size());
  Reader::Want(v, ConfigValue::Kind::kString, "a polynomial string");
  try {
    return ParsePolynomial(v.text, reg).Extended(reg.size());
  } catch (const PolyParseError& e) {
    std::string msg = e.what();
    if (auto p = msg.find(": "); p != std::string::npos) msg = msg.substr(p + 2);
    throw ModelError("polynomial: " + msg, v.line, v.column + e.column() - 1);
  }
}

std::vector<Polynomial> Polys(Reader& r, const std::string& sec, const std::string& key,
                              const VarRegistry& reg, bool required) {
  std::vector<Polynomial> out;
  for (const ConfigValue* v : r.Array(sec, key, required)) out.push_back(PolyAt(*v, reg));
  return out;
}

Eigen::MatrixXd Matrix(Reader& r, const std::string& sec, const std::string& key, int rows,
                       int cols) {
  const ConfigValue& v = r.Get(sec, key);
  Reader::Want(v, ConfigValue::Kind::kArray, "a matrix (array of rows)");
  if (static_cast<int>(v.items.size()) != rows) {
    throw ModelError(key + " needs " + std::to_string(rows) + " rows", v.line, v.column);
  }
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const ConfigValue& row = Reader::Want(v.items[i], ConfigValue::Kind::kArray, "a matrix row");
    if (static_cast<int>(row.items.size()) != cols) {
      throw ModelError(key + " rows need " + std::to_string(cols) + " entries", row.line,
                       row.column);
    }
    for (int j = 0; j < cols; ++j) {
      m(i, j) = Reader::Want(row.items[j], ConfigValue::Kind::kNumber, "a number").number;
    }
  }
  return m;
}

int MatrixCols(Reader& r, const std::string& sec, const std::string& key) {
  const ConfigValue& v = r.Get(sec, key);
  Reader::Want(v, ConfigValue::Kind::kArray, "a matrix (array of rows)");
  if (v.items.empty()) return 0;
  return static_cast<int>(
      Reader::Want(v.items[0], ConfigValue::Kind::kArray, "a matrix row").items.size());
}

std::vector<int> Indices(const VarRegistry& reg, const std::vector<std::string>& names) {
  std::vector<int> out;
  for (const std::string& n : names) out.push_back(reg.IndexOf(n));
  return out;
}

VarRegistry MakeRegistry(const std::vector<std::vector<std::string>>& groups, int line) {
  std::vector<std::string> all;
  std::set<std::string> seen;
  for (const auto& g : groups) {
    for (const std::string& n : g) {
      if (!seen.insert(n).second) throw ModelError("variable '" + n + "' declared twice", line, 1);
      all.push_back(n);
    }
  }
  return VarRegistry(all);
}

}  // namespace

ConfigTable ParseConfig(std::string_view text) { return ConfigParser(text).Parse(); }

Model ParseModel(std::string_view text, const std::string& name) {
  const ConfigTable table = ParseConfig(text);
  Reader r(table);
  Model m;
  m.name = name;
  {
    nlohmann::json canon = nlohmann::json::object();
    for (const auto& [sec, keys] : table) {
      for (const auto& [key, v] : keys) canon[sec][key] = ToJson(v);
    }
    m.canonical = canon.dump();
  }

  const int sys_line = 1;
  m.kind = r.String("system", "kind", "nominal");
  const std::vector<std::string> states = r.Names("system", "states", true);
  const std::vector<std::string> dist = r.Names("system", "disturbances", true);
  if (states.empty()) throw ModelError("[system] needs at least one state", sys_line, 1);

  m.uncertainty = r.String("uncertainty", "type", "none");
  m.theta = r.Number("uncertainty", "theta", 0.0);
  if (m.uncertainty != "none" && m.uncertainty != "delay") {
    const ConfigValue& v = r.Get("uncertainty", "type");
    throw ModelError("uncertainty type must be \"none\" or \"delay\"", v.line, v.column);
  }
  if (m.theta < 0.0) {
    const ConfigValue& v = r.Get("uncertainty", "theta");
    throw ModelError("theta must be >= 0", v.line, v.column);
  }

  if (m.kind == "nominal") {
    const std::vector<std::string> w = r.Names("system", "delay_inputs", false);
    const VarRegistry reg = MakeRegistry({states, w, dist}, sys_line);
    NominalSystem& ns = m.nominal;
    ns.registry = reg;
    ns.x = Indices(reg, states);
    ns.w = Indices(reg, w);
    ns.d = Indices(reg, dist);
    ns.f = Polys(r, "system", "f", reg, true);
    ns.g = Polys(r, "system", "g", reg, false);
    ns.h = Polys(r, "system", "h", reg, true);
    if (ns.f.size() != states.size()) {
      const ConfigValue& v = r.Get("system", "f");
      throw ModelError("f needs one entry per state", v.line, v.column);
    }
    try {
      ns.Validate();
    } catch (const std::invalid_argument& e) {
      throw ModelError(e.what(), sys_line, 1);
    }
    m.w_vars = ns.w;
    m.d_vars = ns.d;
    if (m.uncertainty == "delay" && (ns.nw() != 1 || ns.nv() != 1)) {
      throw ModelError("a delay uncertainty needs one delay input and one g entry", sys_line, 1);
    }
    if (m.uncertainty == "none" && ns.nw() != 0) {
      throw ModelError("delay_inputs given but [uncertainty] type is \"none\"", sys_line, 1);
    }
    if (r.HasSection("controller")) {
      throw ModelError("[controller] is only valid for kind = \"plant\"", sys_line, 1);
    }
  } else if (m.kind == "plant") {
    const int nx = static_cast<int>(states.size());
    const int nd = static_cast<int>(dist.size());
    const int nu = MatrixCols(r, "system", "B");
    if (nu < 1) throw ModelError("B needs at least one column", sys_line, 1);
    std::vector<std::string> w;
    for (int i = 0; i < nu; ++i) w.push_back(nu == 1 ? "w" : "w" + std::to_string(i + 1));
    const VarRegistry reg = MakeRegistry({states, w, dist}, sys_line);
    ControlPlant& p = m.plant;
    p.registry = reg;
    p.x = Indices(reg, states);
    p.f = Polys(r, "system", "f", reg, true);
    if (static_cast<int>(p.f.size()) != nx) {
      const ConfigValue& v = r.Get("system", "f");
      throw ModelError("f needs one entry per state", v.line, v.column);
    }
    for (const Polynomial& fi : p.f) {
      for (int v : fi.Variables()) {
        if (std::find(p.x.begin(), p.x.end(), v) == p.x.end()) {
          const ConfigValue& fv = r.Get("system", "f");
          throw ModelError("plant f may only use state variables", fv.line, fv.column);
        }
      }
    }
    p.b = Matrix(r, "system", "B", nx, nu);
    p.e = Matrix(r, "system", "E", nx, nd);
    const int ne = static_cast<int>(r.Array("system", "C", true).size());
    p.c = Matrix(r, "system", "C", ne, nx);
    p.d = Matrix(r, "system", "D", ne, nu);
    m.w_vars = Indices(reg, w);
    m.d_vars = Indices(reg, dist);

    m.controller = r.String("controller", "type", "");
    if (m.controller == "ccm") {
      m.y_degree = static_cast<int>(r.Integer("controller", "y_degree", 0));
      m.target_alpha = r.Number("controller", "target_alpha", 1.0);
    } else if (m.controller == "static") {
      const ConfigValue& kv = r.Get("controller", "K");
      Reader::Want(kv, ConfigValue::Kind::kArray, "a matrix (array of rows)");
      if (static_cast<int>(kv.items.size()) != nu) {
        throw ModelError("K needs one row per input", kv.line, kv.column);
      }
      m.gain = PolyMatrix(nu, nx);
      for (int i = 0; i < nu; ++i) {
        const ConfigValue& row = Reader::Want(kv.items[i], ConfigValue::Kind::kArray, "a row");
        if (static_cast<int>(row.items.size()) != nx) {
          throw ModelError("K rows need one entry per state", row.line, row.column);
        }
        for (int j = 0; j < nx; ++j) m.gain(i, j) = PolyAt(row.items[j], reg);
      }
    } else {
      const bool has = r.Has("controller", "type");
      const ConfigValue* v = has ? &r.Get("controller", "type") : nullptr;
      throw ModelError("plant models need [controller] type = \"ccm\" or \"static\"",
                       v ? v->line : 1, v ? v->column : 1);
    }
  } else {
    const ConfigValue& v = r.Get("system", "kind");
    throw ModelError("system kind must be \"nominal\" or \"plant\"", v.line, v.column);
  }

  const VarRegistry& reg = m.registry();
  m.region.generators = Polys(r, "analysis", "region", reg, false);
  m.p_degree = static_cast<int>(r.Integer("analysis", "p_degree", 2));
  m.mult_degree = static_cast<int>(r.Integer("analysis", "mult_degree", 2));
  const long long seed = r.Integer("analysis", "seed", 1);
  if (seed < 0) FailAt(r, "analysis", "seed", "seed must be >= 0");
  m.seed = static_cast<std::uint64_t>(seed);
  m.tol = r.Number("analysis", "tol", 1e-8);
  for (const ConfigValue* v : r.Array("analysis", "sweep", false)) {
    const double th = Reader::Want(*v, ConfigValue::Kind::kNumber, "a number").number;
    if (th < 0.0) throw ModelError("sweep values must be >= 0", v->line, v->column);
    m.sweep.push_back(th);
  }
  if (m.p_degree < 0 || m.p_degree % 2 != 0) {
    FailAt(r, "analysis", "p_degree", "p_degree must be a nonnegative even integer");
  }
  if (m.mult_degree < 0) FailAt(r, "analysis", "mult_degree", "mult_degree must be >= 0");
  if (!(m.tol > 0.0)) FailAt(r, "analysis", "tol", "tol must be positive");

  m.sim.horizon = r.Number("simulation", "horizon", 50.0);
  m.sim.h = r.Number("simulation", "h", 1e-3);
  m.sim.pairs = static_cast<int>(r.Integer("simulation", "pairs", 20));
  m.sim.energy = r.Number("simulation", "energy", 0.05);
  m.sim.slack = r.Number("simulation", "slack", 1.01);
  m.sim.seed = m.seed;
  if (!(m.sim.horizon > 0.0)) FailAt(r, "simulation", "horizon", "horizon must be positive");
  if (!(m.sim.h > 0.0)) FailAt(r, "simulation", "h", "h must be positive");
  if (m.sim.pairs < 1) FailAt(r, "simulation", "pairs", "pairs must be >= 1");
  if (!(m.sim.energy > 0.0)) FailAt(r, "simulation", "energy", "energy must be positive");
  if (!(m.sim.slack >= 1.0)) FailAt(r, "simulation", "slack", "slack must be >= 1");

  r.CheckAllUsed();
  return m;
}

Model LoadModel(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseModel(ss.str(), std::filesystem::path(path).stem().string());
}

std::string Sha256Hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace diqc
