#pragma once

// Strict scalar parsing shared by the text formats.

#include <cstdio>
#include <stdexcept>
#include <string>

#include "lf4d/tensor.hpp"

namespace lf4d::text {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline Index to_index(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long r = 0;
  try {
    r = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": expected an integer, got '" + v + "'");
  return static_cast<Index>(r);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double r = 0;
  try {
    r = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  return r;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument(key + ": expected a boolean, got '" + v + "'");
}

// Shortest decimal text that reads back to the same double.
inline std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace lf4d::text
