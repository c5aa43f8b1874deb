#ifndef CCBF_TOML_HPP
#define CCBF_TOML_HPP

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ccbf::toml {

// Minimal TOML subset: comments, [tables], [[arrays of tables]], and
// key = string | number | bool | flat array. Enough for scenario files;
// every error carries the 1-based source line.

struct ParseError : std::runtime_error {
  int line;
  ParseError(int ln, const std::string& what)
      : std::runtime_error("line " + std::to_string(ln) + ": " + what),
        line(ln) {}
};

struct Value {
  enum class Kind { Str, Num, Bool, Arr } kind = Kind::Num;
  std::string str;
  double num = 0.0;
  bool boolean = false;
  std::vector<Value> arr;
  int line = 0;

  double as_num() const {
    if (kind != Kind::Num) throw ParseError(line, "expected a number");
    return num;
  }
  const std::string& as_str() const {
    if (kind != Kind::Str) throw ParseError(line, "expected a string");
    return str;
  }
  bool as_bool() const {
    if (kind != Kind::Bool) throw ParseError(line, "expected a boolean");
    return boolean;
  }
  std::vector<double> as_num_array() const {
    if (kind != Kind::Arr) throw ParseError(line, "expected an array");
    std::vector<double> out;
    for (const auto& v : arr) out.push_back(v.as_num());
    return out;
  }
};

using Table = std::map<std::string, Value>;

struct Document {
  Table root;  // dotted keys, e.g. "sim.dt"
  std::map<std::string, std::vector<Table>> table_arrays;  // e.g. "agents"
};

namespace detail {

inline std::string strip(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline Value parse_value(const std::string& raw, int line);

inline Value parse_array(const std::string& raw, int line) {
  Value v;
  v.kind = Value::Kind::Arr;
  v.line = line;
  std::string inner = strip(raw.substr(1, raw.size() - 2));
  if (inner.empty()) return v;
  size_t start = 0;
  int depth = 0;
  bool in_str = false;
  for (size_t i = 0; i <= inner.size(); ++i) {
    const bool end = i == inner.size();
    const char ch = end ? ',' : inner[i];
    if (!end && ch == '"') in_str = !in_str;
    if (!in_str && ch == '[') ++depth;
    if (!in_str && ch == ']') --depth;
    if (!in_str && depth == 0 && ch == ',') {
      v.arr.push_back(parse_value(strip(inner.substr(start, i - start)), line));
      start = i + 1;
    }
  }
  return v;
}

inline Value parse_value(const std::string& raw, int line) {
  if (raw.empty()) throw ParseError(line, "missing value");
  Value v;
  v.line = line;
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') {
      throw ParseError(line, "unterminated string");
    }
    v.kind = Value::Kind::Str;
    v.str = raw.substr(1, raw.size() - 2);
    return v;
  }
  if (raw.front() == '[') {
    if (raw.back() != ']') throw ParseError(line, "unterminated array");
    return parse_array(raw, line);
  }
  if (raw == "true" || raw == "false") {
    v.kind = Value::Kind::Bool;
    v.boolean = raw == "true";
    return v;
  }
  try {
    size_t pos = 0;
    v.num = std::stod(raw, &pos);
    if (pos != raw.size()) throw std::invalid_argument(raw);
  } catch (const std::exception&) {
    throw ParseError(line, "cannot parse value '" + raw + "'");
  }
  v.kind = Value::Kind::Num;
  return v;
}

inline std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

}  // namespace detail

inline Document parse(std::istream& in) {
  Document doc;
  std::string current_table;
  Table* current_array_elem = nullptr;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    const std::string s = detail::strip(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.size() > 3 && s.substr(0, 2) == "[[" &&
        s.substr(s.size() - 2) == "]]") {
      const std::string name = detail::strip(s.substr(2, s.size() - 4));
      if (name.empty()) throw ParseError(ln, "empty table-array name");
      doc.table_arrays[name].emplace_back();
      current_array_elem = &doc.table_arrays[name].back();
      current_table.clear();
      continue;
    }
    if (s.front() == '[' && s.back() == ']') {
      current_table = detail::strip(s.substr(1, s.size() - 2));
      if (current_table.empty()) throw ParseError(ln, "empty table name");
      current_array_elem = nullptr;
      continue;
    }
    const size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ParseError(ln, "expected 'key = value'");
    }
    const std::string key = detail::strip(s.substr(0, eq));
    if (key.empty()) throw ParseError(ln, "empty key");
    const Value v = detail::parse_value(detail::strip(s.substr(eq + 1)), ln);
    if (current_array_elem) {
      (*current_array_elem)[key] = v;
    } else {
      const std::string full =
          current_table.empty() ? key : current_table + "." + key;
      doc.root[full] = v;
    }
  }
  return doc;
}

inline Document parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario file: " + path);
  return parse(f);
}

}  // namespace ccbf::toml

#endif  // CCBF_TOML_HPP
