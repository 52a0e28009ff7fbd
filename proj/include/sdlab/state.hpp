#ifndef SDLAB_STATE_HPP
#define SDLAB_STATE_HPP

#include <vector>
#include <map>
#include <numeric>

#include "sdlab/model.hpp"
#include "sdlab/lattice.hpp"

namespace sdlab {

// Occupancy eta: dense per-site particle counts.
struct Occupancy {
  std::vector<int> counts;

  Occupancy() = default;
  explicit Occupancy(long long V) : counts(V, 0) {}

  long long total() const {
    long long s = 0;
    for (int c : counts) s += c;
    return s;
  }
  int operator[](long long x) const { return counts[x]; }
  int& operator[](long long x) { return counts[x]; }
  long long size() const { return (long long)counts.size(); }

  void apply_move(long long from, long long to) {
    --counts[from];
    ++counts[to];
  }
  bool valid_for(const ModelSpec& spec) const {
    long long cap = spec.site_cap();
    for (int c : counts)
      if (c < 0 || (cap >= 0 && c > cap)) return false;
    return true;
  }
  friend bool operator==(const Occupancy& a, const Occupancy& b) = default;
};

// Dual configuration xi: sparse site -> positive count, finite order k.
struct DualConfig {
  std::map<long long, int> counts;

  DualConfig() = default;
  DualConfig(std::initializer_list<std::pair<const long long, int>> il) : counts(il) {
    prune();
  }

  int order() const {
    int k = 0;
    for (auto& [x, c] : counts) k += c;
    return k;
  }
  int at(long long x) const {
    auto it = counts.find(x);
    return it == counts.end() ? 0 : it->second;
  }
  void add(long long x, int c = 1) {
    counts[x] += c;
    if (counts[x] == 0) counts.erase(x);
  }
  void apply_move(long long from, long long to) {
    add(from, -1);
    add(to, +1);
  }
  bool valid_for(const ModelSpec& spec) const {
    long long cap = spec.site_cap();
    for (auto& [x, c] : counts)
      if (c < 0 || (cap >= 0 && c > cap)) return false;
    return true;
  }
  void prune() {
    for (auto it = counts.begin(); it != counts.end();)
      it = it->second == 0 ? counts.erase(it) : std::next(it);
  }
  friend bool operator==(const DualConfig& a, const DualConfig& b) = default;
  friend bool operator<(const DualConfig& a, const DualConfig& b) {
    return a.counts < b.counts;
  }
};

// Labeled coordinate vector x = (x_1, ..., x_k).
struct CoordVector {
  std::vector<long long> coords;

  CoordVector() = default;
  explicit CoordVector(std::vector<long long> c) : coords(std::move(c)) {}

  int order() const { return (int)coords.size(); }
  DualConfig to_config() const {
    DualConfig xi;
    for (long long x : coords) xi.add(x);
    return xi;
  }
};

// Lambda(xi) = prod lambda(xi_i): reversible weight of the dual process.
// Configurations that exceed the exclusion cap carry weight zero.
inline Rat Lambda_of(const ModelSpec& spec, const DualConfig& xi) {
  Rat v(1);
  long long cap = spec.site_cap();
  for (auto& [x, c] : xi.counts) {
    if (cap >= 0 && c > cap) return Rat(0);
    v *= lambda_weight(spec, c);
  }
  return v;
}

// N(xi) = k! / prod xi_i!: number of labelings of xi.
inline Rat N_of(const DualConfig& xi) {
  Rat v(1);
  for (long long j = 2; j <= xi.order(); ++j) v *= Rat(j);
  for (auto& [x, c] : xi.counts)
    for (int j = 2; j <= c; ++j) v /= Rat(j);
  return v;
}

// Pi(x) = prod pi(xi_i(x)): reversible weight of the coordinate process.
// Cross identity: Pi(x) * N(xi(x)) = k! * Lambda(xi(x)).
inline Rat Pi_of(const ModelSpec& spec, const CoordVector& x) {
  Rat v(1);
  long long cap = spec.site_cap();
  for (auto& [site, c] : x.to_config().counts) {
    if (cap >= 0 && c > cap) return Rat(0);
    v *= pi_weight(spec, c);
  }
  return v;
}

}  // namespace sdlab

#endif
