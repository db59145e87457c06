#pragma once

// Structured text configs, CSV and JSON reports.
//
// Config format: optional `[section]` headers, `key = value` lines, `#`
// comments. Values are JSON; a bare word is read as a string. Keys keep their
// insertion order, so write -> read -> write reproduces the same bytes.

#include "vlift/heston.hpp"
#include "vlift/jump_lift.hpp"
#include "vlift/kernel_measure.hpp"

#include <json.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace vlift::io {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(path + ": cannot write");
  out << text;
  if (!out) throw ConfigError(path + ": write failed");
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

inline bool bare_word(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.' || c == '/')) return false;
  return !(std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '-' || s[0] == '.') && s != "true" &&
         s != "false" && s != "null";
}

}  // namespace detail

inline Json parse_kv(const std::string& text, const std::string& origin = "<config>") {
  Json root = Json::object();
  Json* section = &root;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = detail::trim(detail::strip_comment(raw));
    if (line.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header");
      const std::string name = detail::trim(line.substr(1, line.size() - 2));
      if (name.empty()) throw ConfigError(where + "empty section name");
      if (root.contains(name)) throw ConfigError(where + "duplicate section '" + name + "'");
      root[name] = Json::object();
      section = &root[name];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (section->contains(key)) throw ConfigError(where + "duplicate key '" + key + "'");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    if (detail::bare_word(value)) {
      (*section)[key] = value;
      continue;
    }
    try {
      (*section)[key] = Json::parse(value);
    } catch (const nlohmann::json::parse_error&) {
      throw ConfigError(where + "cannot parse value of '" + key + "'");
    }
  }
  return root;
}

inline Json read_kv(const std::string& path) { return parse_kv(read_text(path), path); }

inline std::string dump_kv(const Json& root) {
  std::ostringstream out;
  bool any_section = false;
  for (const auto& [k, v] : root.items())
    if (!v.is_object()) out << k << " = " << v.dump() << "\n";
  for (const auto& [k, v] : root.items()) {
    if (!v.is_object()) continue;
    if (any_section || out.tellp() > 0) out << "\n";
    any_section = true;
    out << "[" << k << "]\n";
    for (const auto& [kk, vv] : v.items()) {
      if (vv.is_object()) throw ConfigError("config: sections cannot nest ('" + k + "." + kk + "')");
      out << kk << " = " << vv.dump() << "\n";
    }
  }
  return out.str();
}

inline void write_kv(const std::string& path, const Json& root) { write_text(path, dump_kv(root)); }

// ---------------------------------------------------------------------------
// field access with diagnostics

inline const Json& field(const Json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline double number(const Json& v, const std::string& where) {
  if (!v.is_number()) throw ConfigError(where + ": expected a number");
  return v.get<double>();
}

inline double number_or(const Json& obj, const std::string& key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj.at(key), where + "." + key) : fallback;
}

inline std::size_t count(const Json& v, const std::string& where) {
  if (!v.is_number_integer() || v.get<long long>() < 0) throw ConfigError(where + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

inline std::vector<double> numbers(const Json& v, const std::string& where) {
  if (v.is_number()) return {v.get<double>()};
  if (!v.is_array()) throw ConfigError(where + ": expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline Vector vector_from(const Json& v, const std::string& where) {
  const auto x = numbers(v, where);
  return Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline Matrix matrix_from(const Json& v, const std::string& where) {
  if (v.is_number()) return Matrix::Constant(1, 1, v.get<double>());
  if (!v.is_array() || v.empty() || !v[0].is_array()) throw ConfigError(where + ": expected a matrix (list of rows)");
  const auto rows = static_cast<Eigen::Index>(v.size());
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto row = numbers(v[static_cast<std::size_t>(r)], where + "[" + std::to_string(r) + "]");
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError(where + ": ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

/// Matrix nesting depth of a JSON value: 0 number, 1 vector, 2 matrix, 3 list of matrices.
inline int depth(const Json& v) {
  int d = 0;
  const Json* p = &v;
  while (p->is_array() && !p->empty()) {
    ++d;
    p = &(*p)[0];
  }
  return d;
}

/// A single matrix or a list of matrices; scalars become 1 x 1.
inline std::vector<Matrix> matrices_from(const Json& v, const std::string& where) {
  const int dp = depth(v);
  if (dp == 0 && v.is_number()) return {matrix_from(v, where)};
  if (dp == 1) {
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(matrix_from(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }
  if (dp == 2) return {matrix_from(v, where)};
  if (dp == 3) {
    std::vector<Matrix> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(matrix_from(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
  }
  throw ConfigError(where + ": expected a matrix or a list of matrices");
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Json to_json(const std::vector<Matrix>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) out.push_back(to_json(m));
  return out;
}

// ---------------------------------------------------------------------------
// domain objects

inline AtomicMatrixMeasure measure_from(const Json& obj, const std::string& where) {
  const auto nodes = numbers(field(obj, "nodes", where), where + ".nodes");
  const auto weights = matrices_from(field(obj, "weights", where), where + ".weights");
  WeightShape shape = WeightShape::SymmetricD;
  if (obj.contains("shape")) {
    const Json& s = obj.at("shape");
    if (!s.is_string()) throw ConfigError(where + ".shape: expected 'symmetric' or 'general'");
    if (s == "general")
      shape = WeightShape::GeneralNxD;
    else if (s != "symmetric")
      throw ConfigError(where + ".shape: expected 'symmetric' or 'general'");
  }
  try {
    AtomicMatrixMeasure m(nodes, weights, shape);
    if (obj.contains("d") && count(obj.at("d"), where + ".d") != static_cast<std::size_t>(m.cols()))
      throw ConfigError(where + ".d: does not match the weight matrices");
    if (obj.contains("n") && count(obj.at("n"), where + ".n") != static_cast<std::size_t>(m.rows()))
      throw ConfigError(where + ".n: does not match the weight matrices");
    return m;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline Json measure_to_json(const AtomicMatrixMeasure& m) {
  Json o;
  o["shape"] = m.shape() == WeightShape::SymmetricD ? "symmetric" : "general";
  o["d"] = m.cols();
  o["n"] = m.rows();
  o["nodes"] = m.nodes();
  o["weights"] = to_json(m.weights());
  return o;
}

inline AtomicMatrixMeasure read_measure(const std::string& path) { return measure_from(read_kv(path), path); }
inline void write_measure(const std::string& path, const AtomicMatrixMeasure& m) { write_kv(path, measure_to_json(m)); }

/// Measure given inline in a section or by `file = ...`, relative to the directory of `where`.
inline AtomicMatrixMeasure measure_section(const Json& root, const std::string& where) {
  const Json& sec = field(root, "kernel", where);
  if (sec.contains("file")) {
    if (!sec.at("file").is_string()) throw ConfigError(where + ".kernel.file: expected a path");
    std::filesystem::path f = sec.at("file").get<std::string>();
    if (f.is_relative()) f = std::filesystem::path(where).parent_path() / f;
    return read_measure(f.string());
  }
  return measure_from(sec, where + ".kernel");
}

inline FractionalKernelSpec fractional_spec_from(const Json& obj, const std::string& where) {
  FractionalKernelSpec s;
  const Json& h = field(obj, "hurst", where);
  s.hurst = matrix_from(h, where + ".hurst");
  if (obj.contains("tolerance")) s.tolerance = number(obj.at("tolerance"), where + ".tolerance");
  return s;
}

/// gamma0 (one n x d matrix per node) from `gamma0 = [...]`, or zeros from `n = ...`.
inline OULiftState gamma0_from(const Json& obj, std::shared_ptr<const AtomicMatrixMeasure> nu, const std::string& where) {
  try {
    if (obj.contains("gamma0")) {
      return OULiftState(nu, matrices_from(obj.at("gamma0"), where + ".gamma0"));
    }
    return OULiftState::zero(nu, static_cast<Eigen::Index>(count(field(obj, "n", where), where + ".n")));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline std::vector<Matrix> lambda0_from(const Json& obj, const AtomicMatrixMeasure& nu, const std::string& where) {
  const auto l = matrices_from(field(obj, "lambda0", where), where + ".lambda0");
  if (l.size() != nu.size()) throw ConfigError(where + ".lambda0: one matrix per node required");
  return l;
}

inline JumpMeasureSpec jump_spec_from(const Json& obj, Eigen::Index d, const std::string& where) {
  JumpMeasureSpec s;
  if (obj.contains("preset")) {
    if (obj.at("preset") != "hawkes") throw ConfigError(where + ".preset: only 'hawkes' is known");
    s = hawkes_jump_spec(d);
  } else {
    s.atoms = matrices_from(field(obj, "atoms", where), where + ".atoms");
    s.weights = matrices_from(field(obj, "weights", where), where + ".weights");
  }
  s.epsilon_shift = number_or(obj, "epsilon_shift", 0.0, where);
  try {
    s.validate(d);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

/// Jump-process model: [kernel], [state] lambda0, [jumps].
struct JumpModel {
  std::shared_ptr<const AtomicMatrixMeasure> nu;
  std::vector<Matrix> lambda0;
  JumpMeasureSpec spec;
  std::size_t steps = 1000;
};

inline JumpModel jump_model_from(const Json& root, const std::string& where) {
  JumpModel m;
  m.nu = std::make_shared<AtomicMatrixMeasure>(measure_section(root, where));
  if (m.nu->shape() != WeightShape::SymmetricD) throw ConfigError(where + ".kernel: jump lift needs symmetric weights");
  m.lambda0 = lambda0_from(field(root, "state", where), *m.nu, where + ".state");
  m.spec = jump_spec_from(field(root, "jumps", where), m.nu->rows(), where + ".jumps");
  if (root.contains("numerics")) m.steps = count(field(root.at("numerics"), "steps", where + ".numerics"), where + ".numerics.steps");
  return m;
}

/// Heston model: [kernel], [heston] gamma0 rho p0, optional [price_jumps] xi m.
inline HestonModelSpec heston_model_from(const Json& root, const std::string& where) {
  auto nu = std::make_shared<AtomicMatrixMeasure>(measure_section(root, where));
  if (nu->shape() != WeightShape::SymmetricD) throw ConfigError(where + ".kernel: heston needs symmetric weights");
  const Json& h = field(root, "heston", where);
  HestonModelSpec m;
  m.gamma0 = gamma0_from(h, nu, where + ".heston");
  m.rho = h.contains("rho") ? vector_from(h.at("rho"), where + ".heston.rho") : Vector::Zero(nu->rows());
  m.p0 = h.contains("p0") ? vector_from(h.at("p0"), where + ".heston.p0") : Vector::Zero(nu->rows());
  if (root.contains("price_jumps")) {
    const Json& pj = root.at("price_jumps");
    const auto xi = field(pj, "xi", where + ".price_jumps");
    const auto ms = matrices_from(field(pj, "m", where + ".price_jumps"), where + ".price_jumps.m");
    if (depth(xi) == 1 && nu->rows() > 1) throw ConfigError(where + ".price_jumps.xi: expected a list of vectors");
    const std::size_t count_xi = depth(xi) == 2 ? xi.size() : 1;
    if (count_xi != ms.size()) throw ConfigError(where + ".price_jumps: xi and m lengths differ");
    for (std::size_t a = 0; a < count_xi; ++a)
      m.jumps.push_back({vector_from(depth(xi) == 2 ? xi[a] : xi, where + ".price_jumps.xi"), ms[a]});
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_number(double x) {
  if (x == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) {
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << "\n";
  }

  void row(const std::vector<double>& values) {
    if (values.size() != cols_) throw std::logic_error("csv: row width differs from header");
    for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
    out_ << "\n";
  }

  std::string str() const { return out_.str(); }
  void save(const std::string& path) const { write_text(path, str()); }

 private:
  std::size_t cols_;
  std::ostringstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv: no column '" + name + "'");
  }
};

inline CsvTable parse_csv(const std::string& text, const std::string& origin = "<csv>") {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(detail::trim(cell));
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto cells = split(detail::trim(line));
    if (t.header.empty()) {
      t.header = cells;
      continue;
    }
    if (cells.size() != t.header.size())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                        " columns");
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": '" + c + "' is not a number");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ConfigError(origin + ": missing header row");
  return t;
}

inline CsvTable read_csv(const std::string& path) { return parse_csv(read_text(path), path); }

inline std::string dump_csv(const CsvTable& t) {
  CsvWriter w(t.header);
  for (const auto& r : t.rows) w.row(r);
  return w.str();
}

/// Column `t` if present, else the first column.
inline std::vector<double> read_times(const std::string& path) {
  const auto t = read_csv(path);
  std::size_t c = 0;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == "t") c = i;
  std::vector<double> out;
  for (const auto& r : t.rows) out.push_back(r[c]);
  if (out.empty()) throw ConfigError(path + ": no rows");
  return out;
}

// ---------------------------------------------------------------------------
// reports

inline std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }
inline void write_json(const std::string& path, const Json& j) { write_text(path, dump_json(j)); }
inline Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Plain-text table of an array of flat objects; columns in order of first appearance.
inline std::string render_table(const Json& rows) {
  if (!rows.is_array() || rows.empty()) return "(no rows)\n";
  std::vector<std::string> cols;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.items())
      if (!v.is_object() && !v.is_array() && std::find(cols.begin(), cols.end(), k) == cols.end()) cols.push_back(k);
  auto cell = [](const Json& v) {
    if (v.is_number_float()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.6g", v.get<double>());
      return std::string(buf);
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  };
  std::vector<std::size_t> width;
  for (const auto& c : cols) width.push_back(c.size());
  for (const auto& r : rows)
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (r.contains(cols[i])) width[i] = std::max(width[i], cell(r.at(cols[i])).size());
  std::ostringstream out;
  auto line = [&](auto get) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      const std::string s = get(i);
      out << (i ? "  " : "") << s << std::string(width[i] - s.size(), ' ');
    }
    out << "\n";
  };
  line([&](std::size_t i) { return cols[i]; });
  line([&](std::size_t i) { return std::string(width[i], '-'); });
  for (const auto& r : rows) line([&](std::size_t i) { return r.contains(cols[i]) ? cell(r.at(cols[i])) : std::string(); });
  return out.str();
}

}  // namespace vlift::io
