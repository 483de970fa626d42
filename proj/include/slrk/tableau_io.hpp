#pragma once

// Tableau files are JSON objects:
//   { "name": "trapezoid", "A": [["0","0"],["1/2","1/2"]], "b": ["1/2","1/2"] }
// Entries are "p/q" strings, integers, or decimal numbers/strings. "c" is
// optional and only cross-checked against A*1.

#include "slrk/tableau.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>

namespace slrk {

namespace detail {

struct RawEntry {
  bool exact = false;
  Rational q;
  double x = 0.0;
};

inline RawEntry read_entry(const nlohmann::json& j, const std::string& where) {
  RawEntry e;
  if (j.is_number_integer()) {
    e.exact = true;
    e.q = Rational(j.get<long long>());
    e.x = j.get<double>();
    return e;
  }
  if (j.is_number_float()) {
    e.x = j.get<double>();
    return e;
  }
  if (!j.is_string()) throw TableauError(where + ": entry must be a string or number");
  const auto text = j.get<std::string>();
  try {
    if (parse_rational(text, e.q)) {
      e.exact = true;
      e.x = to_double(e.q);
      return e;
    }
  } catch (const std::invalid_argument& ex) {
    throw TableauError(where + ": " + ex.what());
  }
  char* end = nullptr;
  e.x = std::strtod(text.c_str(), &end);
  if (text.empty() || end == text.c_str() || *end != '\0')
    throw TableauError(where + ": cannot parse \"" + text + "\" as a number");
  return e;
}

inline std::string float_entry(double x) {
  std::string s = format_scalar(x);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace detail

/// Parses a tableau document. Rational mode iff every entry is exact.
inline ButcherTableau parse_tableau(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw TableauError(std::string("malformed tableau document: ") + e.what());
  }
  if (!doc.is_object()) throw TableauError("tableau document must be an object");
  if (!doc.contains("A") || !doc["A"].is_array()) throw TableauError("missing field \"A\" (list of rows)");
  if (!doc.contains("b") || !doc["b"].is_array()) throw TableauError("missing field \"b\" (list)");
  const std::string name = doc.value("name", std::string("unnamed"));

  const auto& rows = doc["A"];
  const std::size_t s = rows.size();
  if (s == 0) throw TableauError("A has no rows");
  std::vector<std::vector<detail::RawEntry>> a(s);
  for (std::size_t i = 0; i < s; ++i) {
    if (!rows[i].is_array()) throw TableauError("A row " + std::to_string(i) + " is not a list");
    if (rows[i].size() != s)
      throw TableauError("dimension mismatch: A row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                         " entries, expected " + std::to_string(s));
    for (std::size_t j = 0; j < s; ++j)
      a[i].push_back(detail::read_entry(rows[i][j], "A[" + std::to_string(i) + "][" + std::to_string(j) + "]"));
  }
  auto read_vec = [&](const char* key) {
    const auto& arr = doc[key];
    if (arr.size() != s)
      throw TableauError(std::string("dimension mismatch: ") + key + " has " + std::to_string(arr.size()) +
                         " entries, expected " + std::to_string(s));
    std::vector<detail::RawEntry> v;
    for (std::size_t i = 0; i < s; ++i)
      v.push_back(detail::read_entry(arr[i], std::string(key) + "[" + std::to_string(i) + "]"));
    return v;
  };
  const auto b = read_vec("b");
  std::optional<std::vector<detail::RawEntry>> c;
  if (doc.contains("c") && !doc["c"].is_null()) {
    if (!doc["c"].is_array()) throw TableauError("field \"c\" must be a list");
    c = read_vec("c");
  }

  bool exact = true;
  for (const auto& row : a)
    for (const auto& e : row) exact = exact && e.exact;
  for (const auto& e : b) exact = exact && e.exact;
  if (c)
    for (const auto& e : *c) exact = exact && e.exact;

  auto build = [&]<class T>(T*) -> BasicTableau<T> {
    auto pick = [](const detail::RawEntry& e) -> T {
      if constexpr (is_rational_v<T>)
        return e.q;
      else
        return e.x;
    };
    Matrix<T> m(s, s);
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) m(i, j) = pick(a[i][j]);
    Vec<T> bv, cv;
    for (const auto& e : b) bv.push_back(pick(e));
    std::optional<Vec<T>> copt;
    if (c) {
      for (const auto& e : *c) cv.push_back(pick(e));
      copt = cv;
    }
    return BasicTableau<T>(name, std::move(m), std::move(bv), copt);
  };
  if (exact) return build(static_cast<Rational*>(nullptr));
  return build(static_cast<double*>(nullptr));
}

inline ButcherTableau load_tableau_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TableauError("cannot open tableau file \"" + path + "\"");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tableau(ss.str());
}

/// Serializes a tableau; rational entries are written as exact "p/q" strings.
inline std::string write_tableau(const ButcherTableau& tab) {
  return tab.visit([](const auto& t) {
    using T = typename std::decay_t<decltype(t)>::scalar_type;
    auto entry = [](const T& x) -> nlohmann::json {
      if constexpr (is_rational_v<T>)
        return x.str();
      else
        return detail::float_entry(x);
    };
    nlohmann::json doc;
    doc["name"] = t.name();
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t i = 0; i < t.stages(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < t.stages(); ++j) row.push_back(entry(t.A()(i, j)));
      a.push_back(row);
    }
    doc["A"] = a;
    nlohmann::json b = nlohmann::json::array(), c = nlohmann::json::array();
    for (const auto& x : t.b()) b.push_back(entry(x));
    for (const auto& x : t.c()) c.push_back(entry(x));
    doc["b"] = b;
    doc["c"] = c;
    return doc.dump(2);
  });
}

}  // namespace slrk
