#ifndef SDLAB_DYNAMICS_HPP
#define SDLAB_DYNAMICS_HPP

#include <vector>
#include <map>
#include <functional>
#include <stdexcept>
#include <cstdint>

#include "sdlab/model.hpp"
#include "sdlab/lattice.hpp"
#include "sdlab/state.hpp"
#include "sdlab/rng.hpp"
#include "sdlab/orthopoly.hpp"

namespace sdlab {

struct StateSpaceTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// jump rate of the move i -> i + r: p(r) eta_i (alpha + sigma eta_{i+r})
inline Rat rate_of_move(const ModelSpec& spec, const Occupancy& eta, long long i,
                        size_t r_index, const Kernel& kernel, const Torus& torus) {
  long long j = torus.shift(i, kernel.support[r_index]);
  Rat occ = Rat(spec.sigma) * Rat(eta[j]);
  return kernel.p[r_index] * Rat(eta[i]) * (spec.alpha + occ);
}

struct Event {
  double time;
  long long from, to;
};

struct Trajectory {
  Occupancy initial;
  std::vector<Event> events;
  double horizon = 0;
  long long time_scale = 1;  // rates were multiplied by time_scale^2
};

// ---------------------------------------------------------------------------
// Exact-jump simulation. Rates are kept as 64-bit integers over the common
// denominator Q*B (Q from the kernel, alpha = A/B), so categorical sampling
// is exact and trajectories replay bit-identically from (seed, stream).

class Fenwick {
public:
  explicit Fenwick(size_t n = 0) : tree_(n + 1, 0), n_(n) {}
  void add(size_t i, long long delta) {
    for (++i; i <= n_; i += i & (-i)) tree_[i] += delta;
  }
  long long total() const {
    long long s = 0;
    for (size_t i = n_; i; i -= i & (-i)) s += tree_[i];
    return s;
  }
  // smallest index with prefix sum > target (target in [0, total))
  size_t find(long long target) const {
    size_t pos = 0;
    size_t mask = 1;
    while ((mask << 1) <= n_) mask <<= 1;
    for (; mask; mask >>= 1) {
      size_t next = pos + mask;
      if (next <= n_ && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based element index
  }

private:
  std::vector<long long> tree_;
  size_t n_;
};

class JumpSimulator {
public:
  JumpSimulator(const ModelSpec& spec, const Kernel& kernel, const Torus& torus,
                const Occupancy& init, long long n_scale = 1)
      : spec_(spec), kernel_(kernel), torus_(torus), eta_(init),
        shifts_(torus.shift_table(kernel)), fen_(torus.V),
        wtilde_(spec.sigma ? torus.V : 0, 0) {
    torus.require_compatible(kernel);
    if (!init.valid_for(spec)) throw std::invalid_argument("initial state invalid");
    A_ = spec.alpha.num() > Rat::Int(INT64_MAX) ? throw RationalOverflow()
                                                : (long long)spec.alpha.num();
    B_ = (long long)spec.alpha.den();
    Q_ = kernel.p_den;
    rate_unit_ = double(n_scale) * double(n_scale) / (double(Q_) * double(B_));
    if (spec_.sigma != 0)
      for (long long x = 0; x < torus_.V; ++x) {
        long long w = 0;
        for (size_t r = 0; r < kernel_.size(); ++r)
          w += kernel_.p_num[r] * eta_[shifts_[x * kernel_.size() + r]];
        wtilde_[x] = w;
      }
    for (long long x = 0; x < torus_.V; ++x) {
      site_weight_.push_back(weight_of(x));
      fen_.add(x, site_weight_.back());
    }
  }

  const Occupancy& state() const { return eta_; }
  double total_rate() const { return double(fen_.total()) * rate_unit_; }

  // Runs until horizon. visitor(t, from, to) fires at each jump time with the
  // pre-jump state still in place; return false from it to stop early.
  template <class Visitor>
  double run(double horizon, CounterRng& rng, Visitor&& visitor) {
    double t = 0;
    for (;;) {
      long long total = fen_.total();
      if (total == 0) return horizon;  // absorbing (empty or fully blocked)
      t += rng.next_exponential(double(total) * rate_unit_);
      if (t >= horizon) return horizon;
      long long i = (long long)fen_.find((long long)rng.next_below((uint64_t)total));
      long long j = pick_target(i, rng);
      if (!visitor(t, i, j)) return t;
      apply(i, j);
    }
  }

  void apply(long long i, long long j) {
    eta_.apply_move(i, j);
    touch(i);
    touch(j);
    if (spec_.sigma != 0) {
      for (size_t r = 0; r < kernel_.size(); ++r) {
        long long yi = shifts_[i * kernel_.size() + r];
        long long yj = shifts_[j * kernel_.size() + r];
        wtilde_[yi] -= kernel_.p_num[r];
        wtilde_[yj] += kernel_.p_num[r];
        touch(yi);
        touch(yj);
      }
    }
    flush();
  }

private:
  ModelSpec spec_;
  Kernel kernel_;
  Torus torus_;
  Occupancy eta_;
  std::vector<long long> shifts_;
  Fenwick fen_;
  std::vector<long long> wtilde_;
  std::vector<long long> site_weight_;
  std::vector<long long> dirty_;
  long long A_ = 1, B_ = 1, Q_ = 1;
  double rate_unit_ = 1;

  long long weight_of(long long x) const {
    long long inter = A_ * Q_;
    if (spec_.sigma != 0) inter += spec_.sigma * B_ * wtilde_[x];
    return (long long)eta_[x] * inter;
  }
  void touch(long long x) { dirty_.push_back(x); }
  void flush() {
    for (long long x : dirty_) {
      long long w = weight_of(x);
      if (w != site_weight_[x]) {
        fen_.add(x, w - site_weight_[x]);
        site_weight_[x] = w;
      }
    }
    dirty_.clear();
  }
  long long pick_target(long long i, CounterRng& rng) {
    // weights P(r) (A B^{-1}... kept integer: P(r) (A + sigma B eta_j) / B)
    long long total = 0;
    small_.clear();
    for (size_t r = 0; r < kernel_.size(); ++r) {
      long long j = shifts_[i * kernel_.size() + r];
      long long w = kernel_.p_num[r] * (A_ + spec_.sigma * B_ * (long long)eta_[j]);
      small_.push_back(w);
      total += w;
    }
    long long u = (long long)rng.next_below((uint64_t)total);
    for (size_t r = 0; r < kernel_.size(); ++r) {
      if (u < small_[r]) return shifts_[i * kernel_.size() + r];
      u -= small_[r];
    }
    return shifts_[(i + 1) * kernel_.size() - 1];
  }
  std::vector<long long> small_;
};

inline Trajectory simulate(const ModelSpec& spec, const Kernel& kernel, const Torus& torus,
                           const Occupancy& eta0, double T, long long n_scale,
                           uint64_t seed, uint64_t stream = 0) {
  JumpSimulator sim(spec, kernel, torus, eta0, n_scale);
  CounterRng rng(seed, stream);
  Trajectory traj;
  traj.initial = eta0;
  traj.horizon = T;
  traj.time_scale = n_scale;
  sim.run(T, rng, [&](double t, long long i, long long j) {
    traj.events.push_back({t, i, j});
    return true;
  });
  return traj;
}

// dual process: same rates acting on a finite configuration
inline Trajectory simulate_dual(const ModelSpec& spec, const Kernel& kernel,
                                const Torus& torus, const DualConfig& xi0, double T,
                                uint64_t seed, uint64_t stream = 0,
                                long long n_scale = 1) {
  Occupancy dense(torus.V);
  for (auto& [x, c] : xi0.counts) dense[x] = c;
  return simulate(spec, kernel, torus, dense, T, n_scale, seed, stream);
}

// labeled coordinate process X^(k): particle i jumps x_i -> x_i + r at rate
// p(r) (alpha + sigma #{j != i : x_j = x_i + r})
inline std::vector<std::pair<double, CoordVector>> simulate_coordinate(
    const ModelSpec& spec, const Kernel& kernel, const Torus& torus,
    const CoordVector& x0, double T, uint64_t seed, uint64_t stream = 0) {
  torus.require_compatible(kernel);
  CoordVector x = x0;
  int k = x.order();
  CounterRng rng(seed, stream);
  std::vector<std::pair<double, CoordVector>> path{{0.0, x}};
  double t = 0;
  std::vector<double> rates(k * kernel.size());
  for (;;) {
    double total = 0;
    for (int i = 0; i < k; ++i)
      for (size_t r = 0; r < kernel.size(); ++r) {
        long long target = torus.shift(x.coords[i], kernel.support[r]);
        int occ = 0;
        for (int j = 0; j < k; ++j) occ += (j != i && x.coords[j] == target);
        double w = kernel.p[r].to_double() *
                   (spec.alpha.to_double() + spec.sigma * double(occ));
        rates[i * kernel.size() + r] = w;
        total += w;
      }
    if (total <= 0) return path;
    t += rng.next_exponential(total);
    if (t >= T) return path;
    double u = rng.next_uniform() * total;
    size_t pick = 0;
    for (; pick + 1 < rates.size(); ++pick) {
      if (u < rates[pick]) break;
      u -= rates[pick];
    }
    int i = int(pick / kernel.size());
    size_t r = pick % kernel.size();
    x.coords[i] = torus.shift(x.coords[i], kernel.support[r]);
    path.emplace_back(t, x);
  }
}

// [L f](eta) by explicit neighbor enumeration; Scalar is double or Rat
template <class Scalar, class F>
Scalar apply_generator(const ModelSpec& spec, const Kernel& kernel, const Torus& torus,
                       const Occupancy& eta, F&& f) {
  Scalar acc(0);
  Occupancy work = eta;
  Scalar base = f(work);
  for (long long i = 0; i < torus.V; ++i) {
    if (eta[i] == 0) continue;
    for (size_t r = 0; r < kernel.size(); ++r) {
      Rat rate = rate_of_move(spec, eta, i, r, kernel, torus);
      if (rate == Rat(0)) continue;
      long long j = torus.shift(i, kernel.support[r]);
      work.apply_move(i, j);
      acc += scalar_from<Scalar>(rate) * (f(work) - base);
      work.apply_move(j, i);
    }
  }
  return acc;
}

// [L D(xi, .)](eta) - [L^(k) D(., eta)](xi), exact; zero iff duality holds here
inline Rat check_duality_pointwise(const ModelSpec& spec, const Kernel& kernel,
                                   const Torus& torus, const DualConfig& xi,
                                   const Occupancy& eta, const DualityTable& table) {
  ProductDuality pd(table);
  Rat lhs = apply_generator<Rat>(spec, kernel, torus, eta,
                                 [&](const Occupancy& e) { return pd.eval_D(xi, e); });
  Rat rhs(0);
  Rat base = pd.eval_D(xi, eta);
  for (auto& [x, c] : xi.counts) {
    for (size_t r = 0; r < kernel.size(); ++r) {
      long long y = torus.shift(x, kernel.support[r]);
      Rat rate = kernel.p[r] * Rat(c) *
                 (spec.alpha + Rat(spec.sigma) * Rat(xi.at(y)));
      if (rate == Rat(0)) continue;
      DualConfig moved = xi;
      moved.apply_move(x, y);
      rhs += rate * (pd.eval_D(moved, eta) - base);
    }
  }
  return lhs - rhs;
}

// ---------------------------------------------------------------------------
// Enumerated dual state space Omega_k on a torus with its generator matrix.

struct DualStateSpace {
  ModelSpec spec;
  Kernel kernel;
  Torus torus;
  int k = 1;
  std::vector<std::vector<int>> states;       // dense counts per state
  std::map<std::vector<int>, int> index;

  struct Transition { int from, to; Rat rate; };
  std::vector<Transition> transitions;        // off-diagonal entries
  std::vector<Rat> exit_rate;                 // total rate out of each state

  DualStateSpace(const ModelSpec& s, const Kernel& ker, const Torus& tor, int kk,
                 long long max_states = 20000)
      : spec(s), kernel(ker), torus(tor), k(kk) {
    std::vector<int> cur(tor.V, 0);
    long long cap = s.site_cap() < 0 ? kk : std::min<long long>(kk, s.site_cap());
    enumerate(cur, 0, kk, cap, max_states);
    for (auto& st : states) {
      for (long long x = 0; x < tor.V; ++x) {
        if (st[x] == 0) continue;
        for (size_t r = 0; r < ker.size(); ++r) {
          long long y = tor.shift(x, ker.support[r]);
          Rat rate = ker.p[r] * Rat(st[x]) * (s.alpha + Rat(s.sigma) * Rat(st[y]));
          if (rate == Rat(0)) continue;
          auto nxt = st;
          --nxt[x];
          ++nxt[y];
          transitions.push_back({index.at(st), index.at(nxt), rate});
        }
      }
    }
    exit_rate.assign(states.size(), Rat(0));
    for (auto& tr : transitions) exit_rate[tr.from] += tr.rate;
  }

  size_t size() const { return states.size(); }

  DualConfig config(int idx) const {
    DualConfig xi;
    for (long long x = 0; x < torus.V; ++x)
      if (states[idx][x]) xi.add(x, states[idx][x]);
    return xi;
  }
  Rat Lambda(int idx) const { return Lambda_of(spec, config(idx)); }

  // max |Lambda(xi) q(xi, xi') - Lambda(xi') q(xi', xi)|, exact
  Rat self_adjointness_violation() const {
    std::map<std::pair<int, int>, Rat> q;
    for (auto& tr : transitions) q[{tr.from, tr.to}] += tr.rate;
    Rat worst(0);
    for (auto& [key, rate] : q) {
      auto rev = q.find({key.second, key.first});
      Rat back = rev == q.end() ? Rat(0) : rev->second;
      Rat res = (Lambda(key.first) * rate - Lambda(key.second) * back).abs();
      if (res > worst) worst = res;
    }
    return worst;
  }

private:
  void enumerate(std::vector<int>& cur, long long x, int left, long long cap,
                 long long max_states) {
    if (left == 0 || x == torus.V) {
      if (left == 0) {
        if ((long long)states.size() >= max_states)
          throw StateSpaceTooLarge("dual state space exceeds limit");
        index.emplace(cur, (int)states.size());
        states.push_back(cur);
      }
      return;
    }
    for (int c = std::min<long long>(left, cap); c >= 0; --c) {
      cur[x] = c;
      enumerate(cur, x + 1, left - c, cap, max_states);
      cur[x] = 0;
    }
  }
};

}  // namespace sdlab

#endif
