#ifndef SDLAB_BALANCE_HPP
#define SDLAB_BALANCE_HPP

#include <vector>
#include <functional>

#include "sdlab/dynamics.hpp"

namespace sdlab {

// Enumerates all occupancies on the torus with per-site counts <= cap and
// reports the worst detailed-balance violation of nu_rho against the jump
// rates (exact); transitions that leave the capped set are skipped, so the
// cap must be chosen to not bind for the states of interest.
inline Rat detailed_balance_nu(const ModelSpec& spec, const Kernel& kernel,
                               const Torus& torus, int cap,
                               double rate_perturbation = 0.0) {
  long long scap = spec.site_cap();
  if (scap >= 0) cap = (int)std::min<long long>(cap, scap);
  std::vector<int> cur(torus.V, 0);
  Rat worst(0);
  Rat bump = rate_perturbation == 0.0 ? Rat(0) : Rat::of((long long)(rate_perturbation * 1000), 1000);
  std::function<void(long long)> rec = [&](long long x) {
    if (x == torus.V) {
      Occupancy eta;
      eta.counts = cur;
      Rat nu_eta(1);
      for (int c : cur) nu_eta *= nu_weight(spec, c);
      for (long long i = 0; i < torus.V; ++i) {
        if (eta[i] == 0) continue;
        for (size_t r = 0; r < kernel.size(); ++r) {
          long long j = torus.shift(i, kernel.support[r]);
          if (eta[j] + 1 > cap) continue;  // stays inside the capped set
          Rat fwd = rate_of_move(spec, eta, i, r, kernel, torus) + bump;
          Occupancy to = eta;
          to.apply_move(i, j);
          Rat nu_to(1);
          for (int c : to.counts) nu_to *= nu_weight(spec, c);
          // reverse move j -> i uses displacement -r, same p by symmetry
          Rat bwd = kernel.p[r] * Rat(to[j]) *
                    (spec.alpha + Rat(spec.sigma) * Rat(to[i]));
          Rat res = (nu_eta * fwd - nu_to * bwd).abs();
          if (res > worst) worst = res;
        }
      }
      return;
    }
    for (int c = 0; c <= cap; ++c) {
      cur[x] = c;
      rec(x + 1);
    }
    cur[x] = 0;
  };
  rec(0);
  return worst;
}

// Same check for Lambda on the k-particle dual chain.
inline Rat detailed_balance_Lambda(const DualStateSpace& space) {
  Rat worst(0);
  for (auto& tr : space.transitions) {
    // find the reverse rate
    Rat back(0);
    const auto& to = space.states[tr.to];
    const auto& from = space.states[tr.from];
    for (long long x = 0; x < space.torus.V; ++x) {
      if (to[x] == 0) continue;
      for (size_t r = 0; r < space.kernel.size(); ++r) {
        long long y = space.torus.shift(x, space.kernel.support[r]);
        auto nxt = to;
        --nxt[x];
        ++nxt[y];
        if (nxt == from)
          back += space.kernel.p[r] * Rat(to[x]) *
                  (space.spec.alpha + Rat(space.spec.sigma) * Rat(to[y]));
      }
    }
    Rat res = (space.Lambda(tr.from) * tr.rate - space.Lambda(tr.to) * back).abs();
    if (res > worst) worst = res;
  }
  return worst;
}

// Pi on the labeled coordinate chain: particle moves x_i -> x_i + r at rate
// p(r)(alpha + sigma #{j != i at x_i + r}).
inline Rat detailed_balance_Pi(const ModelSpec& spec, const Kernel& kernel,
                               const Torus& torus, const CoordVector& x) {
  Rat worst(0);
  int k = x.order();
  for (int i = 0; i < k; ++i)
    for (size_t r = 0; r < kernel.size(); ++r) {
      CoordVector to = x;
      to.coords[i] = torus.shift(x.coords[i], kernel.support[r]);
      int occ_fwd = 0, occ_bwd = 0;
      for (int j = 0; j < k; ++j) {
        occ_fwd += (j != i && x.coords[j] == to.coords[i]);
        occ_bwd += (j != i && to.coords[j] == x.coords[i]);
      }
      Rat fwd = kernel.p[r] * (spec.alpha + Rat(spec.sigma) * Rat(occ_fwd));
      if (fwd == Rat(0)) continue;  // blocked move, no transition either way
      Rat bwd = kernel.p[r] * (spec.alpha + Rat(spec.sigma) * Rat(occ_bwd));
      Rat res = (Pi_of(spec, x) * fwd - Pi_of(spec, to) * bwd).abs();
      if (res > worst) worst = res;
    }
  return worst;
}

}  // namespace sdlab

#endif
