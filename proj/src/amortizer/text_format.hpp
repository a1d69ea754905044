#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "lgcpflow/errors.hpp"

namespace lgcpflow::detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("bad number '" + s + "'");
  return v;
}

template <class T>
T parse_integer(const std::string& s) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw FormatError("bad integer '" + s + "'");
  return v;
}

inline std::string join_doubles(const std::vector<double>& v, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep))
    if (!cur.empty()) out.push_back(cur);
  return out;
}

inline std::vector<double> parse_doubles(const std::string& s, char sep = ' ') {
  std::vector<double> out;
  for (const auto& tok : split(s, sep)) out.push_back(parse_double(tok));
  return out;
}

inline std::vector<int> parse_ints(const std::string& s, char sep) {
  std::vector<int> out;
  for (const auto& tok : split(s, sep)) out.push_back(parse_integer<int>(tok));
  return out;
}

class KeyValues {
 public:
  void set(const std::string& k, const std::string& v) {
    order_.push_back(k);
    map_[k] = v;
  }
  const std::string& get(const std::string& k) const {
    auto it = map_.find(k);
    if (it == map_.end()) throw FormatError("missing manifest key '" + k + "'");
    return it->second;
  }
  bool has(const std::string& k) const { return map_.count(k) != 0; }
  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> map_;
};

std::uint64_t fnv1a64(const char* data, std::size_t n);

}  // namespace lgcpflow::detail
