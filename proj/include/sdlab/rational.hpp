#ifndef SDLAB_RATIONAL_HPP
#define SDLAB_RATIONAL_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <iosfwd>
#include <ostream>

namespace sdlab {

// Exact rational on 128-bit integers. Every operation normalizes and checks
// for overflow; identity tests must fail loudly, never wrap around.
struct RationalOverflow : std::runtime_error {
  RationalOverflow() : std::runtime_error("rational overflow (128-bit)") {}
};

class Rat {
public:
  using Int = __int128;

  Rat() : num_(0), den_(1) {}
  Rat(long long n) : num_(n), den_(1) {}
  Rat(int n) : num_(n), den_(1) {}
  Rat(Int n, Int d) : num_(n), den_(d) { normalize(); }

  static Rat of(long long n, long long d) { return Rat(Int(n), Int(d)); }

  Int num() const { return num_; }
  Int den() const { return den_; }
  bool is_zero() const { return num_ == 0; }
  int sign() const { return num_ > 0 ? 1 : (num_ < 0 ? -1 : 0); }

  friend Rat operator+(const Rat& a, const Rat& b) {
    return Rat(add_chk(mul_chk(a.num_, b.den_), mul_chk(b.num_, a.den_)),
               mul_chk(a.den_, b.den_));
  }
  friend Rat operator-(const Rat& a, const Rat& b) {
    return Rat(sub_chk(mul_chk(a.num_, b.den_), mul_chk(b.num_, a.den_)),
               mul_chk(a.den_, b.den_));
  }
  friend Rat operator*(const Rat& a, const Rat& b) {
    // cross-reduce first to keep intermediates small
    Int g1 = gcd(a.num_ < 0 ? -a.num_ : a.num_, b.den_);
    Int g2 = gcd(b.num_ < 0 ? -b.num_ : b.num_, a.den_);
    return Rat(mul_chk(a.num_ / g1, b.num_ / g2),
               mul_chk(a.den_ / g2, b.den_ / g1));
  }
  friend Rat operator/(const Rat& a, const Rat& b) {
    if (b.num_ == 0) throw std::domain_error("rational division by zero");
    return a * Rat(b.den_, b.num_);
  }
  Rat operator-() const { Rat r; r.num_ = -num_; r.den_ = den_; return r; }
  Rat& operator+=(const Rat& o) { *this = *this + o; return *this; }
  Rat& operator-=(const Rat& o) { *this = *this - o; return *this; }
  Rat& operator*=(const Rat& o) { *this = *this * o; return *this; }
  Rat& operator/=(const Rat& o) { *this = *this / o; return *this; }

  friend bool operator==(const Rat& a, const Rat& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend bool operator!=(const Rat& a, const Rat& b) { return !(a == b); }
  friend bool operator<(const Rat& a, const Rat& b) {
    return mul_chk(a.num_, b.den_) < mul_chk(b.num_, a.den_);
  }
  friend bool operator>(const Rat& a, const Rat& b) { return b < a; }
  friend bool operator<=(const Rat& a, const Rat& b) { return !(b < a); }
  friend bool operator>=(const Rat& a, const Rat& b) { return !(a < b); }

  Rat abs() const { return num_ < 0 ? -*this : *this; }

  double to_double() const {
    return static_cast<double>(num_) / static_cast<double>(den_);
  }

  // integral value accessors (throw when not integral / out of range)
  bool is_integer() const { return den_ == 1; }
  long long as_int() const {
    if (den_ != 1) throw std::domain_error("rational is not an integer");
    if (num_ > Int(INT64_MAX) || num_ < Int(INT64_MIN))
      throw RationalOverflow();
    return static_cast<long long>(num_);
  }

  Rat pow(long e) const {
    if (e < 0) return (Rat(1) / *this).pow(-e);
    Rat r(1), b = *this;
    while (e) {
      if (e & 1) r *= b;
      b = (e >>= 1) ? b * b : b;
    }
    return r;
  }

  static Int gcd(Int a, Int b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b) { Int t = a % b; a = b; b = t; }
    return a;
  }

  std::string str() const;  // "num/den" or "num"

  // "p/q", "p", also plain decimal integers with sign
  static Rat parse(const std::string& s);

private:
  Int num_, den_;

  void normalize() {
    if (den_ == 0) throw std::domain_error("rational with zero denominator");
    if (den_ < 0) { num_ = -num_; den_ = -den_; }
    Int g = gcd(num_, den_);
    if (g > 1) { num_ /= g; den_ /= g; }
    if (num_ == 0) den_ = 1;
  }
  static Int add_chk(Int a, Int b) {
    Int r;
    if (__builtin_add_overflow(a, b, &r)) throw RationalOverflow();
    return r;
  }
  static Int sub_chk(Int a, Int b) {
    Int r;
    if (__builtin_sub_overflow(a, b, &r)) throw RationalOverflow();
    return r;
  }
  static Int mul_chk(Int a, Int b) {
    Int r;
    if (__builtin_mul_overflow(a, b, &r)) throw RationalOverflow();
    return r;
  }
};

std::string i128_to_string(__int128 v);
std::ostream& operator<<(std::ostream& os, const Rat& r);

inline double to_double(const Rat& r) { return r.to_double(); }
inline double to_double(double x) { return x; }

// scalar conversion used by code templated on Scalar in {double, Rat}
template <class Scalar> Scalar scalar_from(const Rat& r);
template <> inline double scalar_from<double>(const Rat& r) { return r.to_double(); }
template <> inline Rat scalar_from<Rat>(const Rat& r) { return r; }

}  // namespace sdlab

#endif
