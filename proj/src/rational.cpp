#include "sdlab/rational.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>

namespace sdlab {

std::string i128_to_string(__int128 v) {
  if (v == 0) return "0";
  bool neg = v < 0;
  // careful with INT128_MIN: negate digit by digit
  unsigned __int128 u = neg ? (unsigned __int128)(-(v + 1)) + 1 : (unsigned __int128)v;
  std::string s;
  while (u) {
    s.push_back(char('0' + int(u % 10)));
    u /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

std::string Rat::str() const {
  if (den_ == 1) return i128_to_string(num_);
  return i128_to_string(num_) + "/" + i128_to_string(den_);
}

std::ostream& operator<<(std::ostream& os, const Rat& r) { return os << r.str(); }

Rat Rat::parse(const std::string& s) {
  auto trim = [](std::string t) {
    size_t a = t.find_first_not_of(" \t");
    size_t b = t.find_last_not_of(" \t");
    if (a == std::string::npos) return std::string();
    return t.substr(a, b - a + 1);
  };
  std::string t = trim(s);
  if (t.empty()) throw std::invalid_argument("empty rational literal");
  auto parse_int = [&](const std::string& p) -> Int {
    size_t i = 0;
    bool neg = false;
    if (p[i] == '+' || p[i] == '-') { neg = p[i] == '-'; ++i; }
    if (i == p.size()) throw std::invalid_argument("bad rational literal: " + s);
    Int v = 0;
    for (; i < p.size(); ++i) {
      if (!std::isdigit((unsigned char)p[i]))
        throw std::invalid_argument("bad rational literal: " + s);
      v = v * 10 + (p[i] - '0');
    }
    return neg ? -v : v;
  };
  size_t slash = t.find('/');
  if (slash == std::string::npos) return Rat(parse_int(t), 1);
  return Rat(parse_int(trim(t.substr(0, slash))), parse_int(trim(t.substr(slash + 1))));
}

}  // namespace sdlab
