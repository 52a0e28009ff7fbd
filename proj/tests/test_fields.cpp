#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <functional>

#include "sdlab/fields.hpp"
#include "sdlab/martingale.hpp"
#include "sdlab/convention.hpp"
#include "sdlab/testfunc.hpp"

using namespace sdlab;

static const ModelSpec kIrw(0, Rat(1), Rat::of(1, 2));
static const ModelSpec kSep(-1, Rat(2), Rat::of(1, 2));
static const ModelSpec kSip(1, Rat(1), Rat::of(1, 2));

namespace {

// brute-force sum over all dual configurations of order k (enumeration oracle)
template <class Scalar, class F>
void for_each_config(long long V, int k, long long cap, F&& fn) {
  std::vector<int> xi(V, 0);
  std::function<void(long long, int)> rec = [&](long long x, int left) {
    if (left == 0) { fn(xi); return; }
    if (x == V) return;
    for (int c = 0; c <= std::min<long long>(left, cap); ++c) {
      xi[x] = c;
      rec(x + 1, left - c);
    }
    xi[x] = 0;
  };
  rec(0, k);
}

template <class Scalar>
Scalar brute_force_field(const DualityTable& t, const std::vector<Scalar>& phi,
                         const Occupancy& eta, int k) {
  long long cap = t.spec.site_cap() < 0 ? k : t.spec.site_cap();
  Scalar total(0);
  for_each_config<Scalar>(eta.size(), k, cap, [&](const std::vector<int>& xi) {
    Scalar v(1);
    for (long long x = 0; x < eta.size(); ++x) {
      if (!xi[x]) continue;
      Scalar pw(1);
      for (int e = 0; e < xi[x]; ++e) pw = pw * phi[x];
      v = v * pw * fields_detail::TableGet<Scalar>::get(t, xi[x], eta[x]);
    }
    total += v;
  });
  return total;
}

Occupancy random_eta(const ModelSpec& spec, long long V, CounterRng& rng, int lim = 4) {
  Occupancy eta(V);
  long long cap = spec.site_cap() < 0 ? lim : spec.site_cap();
  for (long long x = 0; x < V; ++x) eta[x] = (int)rng.next_below((uint64_t)cap + 1);
  return eta;
}

std::vector<double> phi_values{0.7, -0.3, 1.1, 0.4, -0.9, 0.2, 1.3, -0.5};

}  // namespace

TEST_CASE("field coefficient extraction equals the configuration sum") {
  Torus torus(1, 5);
  Kernel kern = nearest_neighbor_kernel(1);
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 8);
    CounterRng rng(321, spec.sigma + 1);
    std::vector<double> phi(phi_values.begin(), phi_values.begin() + torus.V);
    for (int trial = 0; trial < 4; ++trial) {
      Occupancy eta = random_eta(spec, torus.V, rng);
      for (int k = 0; k <= 3; ++k) {
        FieldEvaluator<double> ev(spec, torus, kern, t, phi, k, eta);
        double brute = brute_force_field<double>(t, phi, eta, k);
        CHECK(ev.coeff(k) == doctest::Approx(brute).epsilon(1e-12));
        if (k == 0) CHECK(field_eval(ev, torus).value == 1.0);
      }
    }
  }
}

TEST_CASE("exact rational field evaluation and partition identity") {
  Torus torus(1, 5);
  Kernel kern = nearest_neighbor_kernel(1);
  std::vector<Rat> phi{Rat(3), Rat(-1), Rat(2), Rat(5), Rat(-2)};
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 8);
    Occupancy eta(torus.V);
    eta[0] = 2;
    eta[2] = 1;
    eta[3] = spec.sigma == -1 ? 2 : 3;
    eta[4] = 1;
    for (int k = 1; k <= 3; ++k) {
      FieldEvaluator<Rat> ev(spec, torus, kern, t, phi, k, eta);
      CHECK(ev.coeff(k) == brute_force_field<Rat>(t, phi, eta, k));
      // partition of Omega_k by xi_i + xi_j: exact
      for (auto [i, j] : std::vector<std::pair<long long, long long>>{{0, 1}, {2, 4}}) {
        Rat sum(0);
        for (int ell = 0; ell <= k; ++ell) sum += ev.z_raw(k, ell, i, j);
        CHECK(sum == ev.coeff(k));
      }
    }
  }
}

TEST_CASE("k=1 field is the scaled linear statistic") {
  Torus torus(1, 8);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSip, 3, 8);
  CounterRng rng(9, 0);
  Occupancy eta = random_eta(kSip, torus.V, rng);
  FieldEvaluator<double> ev(kSip, torus, kern, t, phi_values, 1, eta);
  double direct = 0;
  for (long long x = 0; x < torus.V; ++x) direct += phi_values[x] * t.dd_f(1, eta[x]);
  CHECK(field_eval(ev, torus).value ==
        doctest::Approx(direct / std::sqrt(double(torus.L))).epsilon(1e-13));
  // proportional to the centered density statistic
  double c = t.g(1).to_double();
  double centered = 0;
  for (long long x = 0; x < torus.V; ++x)
    centered += phi_values[x] * (eta[x] - kSip.rho.to_double());
  CHECK(direct == doctest::Approx(c * centered).epsilon(1e-12));
}

TEST_CASE("mixed field: degenerate case and coordinate-sum oracle") {
  Torus torus(1, 5);
  Kernel kern = nearest_neighbor_kernel(1);
  std::vector<Rat> phi{Rat(3), Rat(-1), Rat(2), Rat(5), Rat(-2)};
  std::vector<Rat> psi{Rat(1), Rat(4), Rat(-3), Rat(2), Rat(1)};
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 8);
    Occupancy eta(torus.V);
    eta[0] = 2;
    eta[1] = 1;
    eta[3] = 1;
    for (int k = 1; k <= 3; ++k) {
      FieldEvaluator<Rat> ev(spec, torus, kern, t, phi, k, eta);
      // psi = phi collapses to k * field coefficient
      CHECK(ev.mixed_raw(phi) == Rat(k) * ev.coeff(k));
      // oracle: ordered coordinate tuples weighted by Lambda(xi)/N(xi)
      Rat oracle(0);
      std::vector<long long> tuple(k, 0);
      std::function<void(int)> rec = [&](int pos) {
        if (pos == k) {
          DualConfig xi;
          for (long long c : tuple) xi.add(c);
          if (!xi.valid_for(spec)) return;
          Rat w = Lambda_of(spec, xi) / N_of(xi);
          Rat f(1);
          for (int a = 0; a + 1 < k; ++a) f *= phi[tuple[a]];
          f *= psi[tuple[k - 1]];
          Rat D(1);
          for (auto& [site, c] : xi.counts) D *= t.d(c, eta[site]);
          oracle += w * f * D;
          return;
        }
        for (long long x = 0; x < torus.V; ++x) {
          tuple[pos] = x;
          rec(pos + 1);
        }
      };
      rec(0);
      // mixed_raw = k * n^{kd/2} X(phi^(k-1) (x) psi); the raw sum equals
      // k * sum over tuples (no n powers at raw level)
      CHECK(ev.mixed_raw(psi) == Rat(k) * oracle);
    }
  }
}

TEST_CASE("gradient field: anchors and hand formula at k=1") {
  Torus torus(1, 6);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSip, 3, 9);
  Occupancy eta(torus.V);
  eta[0] = 2;
  eta[1] = 2;
  eta[4] = 1;
  std::vector<double> phi(torus.V);
  for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
  phi[1] = phi[0];  // symmetric swap anchor

  FieldEvaluator<double> ev(kSip, torus, kern, t, phi, 2, eta);
  CHECK(grad_field(ev, torus, 0, 1) == doctest::Approx(0.0).epsilon(1e-14));

  FieldEvaluator<double> ev1(kSip, torus, kern, t, phi, 1, eta);
  double n = double(torus.L);
  double expect = std::pow(n, 1.5) * (1.0 / std::sqrt(n)) *
                  (phi[5] * (t.dd_f(1, eta[5] + 1) - t.dd_f(1, eta[5])) +
                   phi[4] * (t.dd_f(1, eta[4] - 1) - t.dd_f(1, eta[4])));
  CHECK(grad_field(ev1, torus, 4, 5) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("gradient decomposition through shift coefficients") {
  Torus torus(1, 6);
  Kernel kern = nearest_neighbor_kernel(1);
  double n = double(torus.L);
  int cases_checked = 0;
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 5, 9);
    CounterRng rng(77, spec.sigma + 5);
    std::vector<double> phi(torus.V);
    for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
    for (int k = 1; k <= 3; ++k) {
      for (int trial = 0; trial < 24; ++trial) {
        Occupancy eta = random_eta(spec, torus.V, rng);
        long long i = (long long)rng.next_below(torus.V);
        long long j = (i + 1 + (long long)rng.next_below(2)) % torus.V;
        if (eta[i] < 1) continue;
        long long cap = spec.site_cap();
        if (cap >= 0 && eta[j] + 1 > cap) continue;

        FieldEvaluator<double> ev(spec, torus, kern, t, phi, k, eta);
        double lhs = grad_field(ev, torus, i, j);

        Occupancy minus = eta;
        minus[i] -= 1;
        FieldEvaluator<double> evm(spec, torus, kern, t, phi, k, minus);
        // sum over s of the constrained fields; the n-power balances per m
        // (the pair-site sum of order s-m joins the order-(k-m) field)
        double rhs = 0;
        for (int s = 1; s <= k; ++s)
          for (int m = 1; m <= s; ++m) {
            double gm = t.g(m).to_double();
            if (gm == 0) continue;
            double phidiff = std::pow(phi[j], m) - std::pow(phi[i], m);
            double zf = z_field(evm, torus, k - m, s - m, i, j);
            rhs += std::pow(n, -0.5 * (m - 1) * torus.d) * n * phidiff * gm * zf;
          }
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));

        // collapsed form: partition over the constraint gives lower-order fields
        double rhs2 = 0;
        for (int m = 1; m <= k; ++m) {
          double gm = t.g(m).to_double();
          if (gm == 0) continue;
          double phidiff = std::pow(phi[j], m) - std::pow(phi[i], m);
          double ykm = field_scale(torus, k - m) * evm.coeff(k - m);
          rhs2 += std::pow(n, -0.5 * (m - 1) * torus.d) * n * phidiff * gm * ykm;
        }
        CHECK(lhs == doctest::Approx(rhs2).epsilon(1e-8));

        // isolated m = 1 term: -c n (phi_j - phi_i) Z^{(n,k-1,0)} at eta itself
        double c = t.c_measured().to_double();
        double term1 = -c * n * (phi[j] - phi[i]) * z_field(evm, torus, k - 1, 0, i, j);
        FieldEvaluator<double> ev0(spec, torus, kern, t, phi, k, eta);
        double term1_at_eta = -c * n * (phi[j] - phi[i]) *
                              z_field(ev0, torus, k - 1, 0, i, j);
        CHECK(term1 == doctest::Approx(term1_at_eta).epsilon(1e-10));
        ++cases_checked;
      }
    }
  }
  CHECK(cases_checked >= 100);
}

TEST_CASE("z field: masked product anchor") {
  Torus torus(1, 6);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSep, 4, 6);
  Occupancy eta(torus.V);
  eta[0] = 1;
  eta[2] = 2;
  eta[5] = 1;
  std::vector<double> phi(torus.V);
  for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
  int k = 2;
  FieldEvaluator<double> ev(kSep, torus, kern, t, phi, k, eta);
  std::vector<double> masked = phi;
  masked[1] = masked[3] = 0.0;
  FieldEvaluator<double> evm(kSep, torus, kern, t, masked, k, eta);
  CHECK(z_field(ev, torus, k, 0, 1, 3) ==
        doctest::Approx(field_eval(evm, torus).value).epsilon(1e-13));
}

TEST_CASE("drift: exact generator action agrees with the sweep") {
  Torus torus(1, 6);
  Kernel kern = nearest_neighbor_kernel(1);
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 9);
    CounterRng rng(15, spec.sigma + 9);
    std::vector<double> phi(torus.V);
    for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
    for (int k = 1; k <= 2; ++k) {
      for (int trial = 0; trial < 3; ++trial) {
        Occupancy eta = random_eta(spec, torus.V, rng);
        FieldEvaluator<double> ev(spec, torus, kern, t, phi, k, eta);
        auto dc = drift_cdc_exact(ev, torus);
        double n2 = double(torus.L) * double(torus.L);
        double via_gen = n2 * apply_generator<double>(spec, kern, torus, eta,
            [&](const Occupancy& e) {
              FieldEvaluator<double> f(spec, torus, kern, t, phi, k, e);
              return field_eval(f, torus).value;
            });
        CHECK(dc.drift_exact == doctest::Approx(via_gen).epsilon(1e-10));
      }
    }
  }
  // empty configuration anchor
  DualityTable t = build_resolved_table(kSip, 3, 6);
  std::vector<double> phi(torus.V);
  for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
  FieldEvaluator<double> ev(kSip, torus, kern, t, phi, 2, Occupancy(torus.V));
  auto dc = drift_cdc_exact(ev, torus);
  CHECK(dc.drift_exact == 0.0);
  CHECK(dc.cdc_exact == 0.0);
}

TEST_CASE("drift via the dual-side generator on the configuration space") {
  // n^2 L Y = n^{-kd/2} sum_xi n^2 [L^(k) Phi_n](xi) DD(xi, eta)
  Torus torus(1, 5);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSip, 3, 8);
  int k = 2;
  DualStateSpace space(kSip, kern, torus, k);
  std::vector<double> phi(torus.V);
  for (long long x = 0; x < torus.V; ++x) phi[x] = phi_values[x];
  CounterRng rng(4, 4);
  Occupancy eta = random_eta(kSip, torus.V, rng);
  FieldEvaluator<double> ev(kSip, torus, kern, t, phi, k, eta);
  double lhs = drift_cdc_exact(ev, torus).drift_exact;

  auto Phi_n = [&](const std::vector<int>& xi) {
    double v = 1;
    for (long long x = 0; x < torus.V; ++x)
      for (int e = 0; e < xi[x]; ++e) v *= phi[x];
    return v;
  };
  double n2 = double(torus.L) * double(torus.L);
  std::vector<double> genPhi(space.size(), 0.0);
  for (auto& tr : space.transitions)
    genPhi[tr.from] += tr.rate.to_double() *
                       (Phi_n(space.states[tr.to]) - Phi_n(space.states[tr.from]));
  double rhs = 0;
  for (size_t s = 0; s < space.size(); ++s) {
    double DD = 1;
    for (long long x = 0; x < torus.V; ++x)
      if (space.states[s][x]) DD *= t.dd_f(space.states[s][x], eta[x]);
    rhs += n2 * genPhi[s] * DD;
  }
  rhs *= field_scale(torus, k);
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("carre-du-champ: defining form equals sum of squares, exactly") {
  Torus torus(1, 5);
  Kernel kern = nearest_neighbor_kernel(1);
  std::vector<Rat> phi{Rat(3), Rat(-1), Rat(2), Rat(5), Rat(-2)};
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 9);
    Occupancy eta(torus.V);
    eta[0] = 2;
    eta[1] = 1;
    eta[3] = spec.sigma == -1 ? 2 : 4;
    for (int k = 1; k <= 3; ++k) {
      auto fval = [&](const Occupancy& e) {
        FieldEvaluator<Rat> f(spec, torus, kern, t, phi, k, e);
        return f.coeff(k);
      };
      Rat f0 = fval(eta);
      Rat defining = apply_generator<Rat>(spec, kern, torus, eta,
                         [&](const Occupancy& e) { return fval(e) * fval(e); }) -
                     Rat(2) * f0 *
                         apply_generator<Rat>(spec, kern, torus, eta, fval);
      FieldEvaluator<Rat> ev(spec, torus, kern, t, phi, k, eta);
      Rat sum_squares = ev.drift_cdc_raw().cdc_sum;
      CHECK(defining == sum_squares);
    }
  }
}

TEST_CASE("incremental updates stay coherent with a rebuild") {
  Torus torus(1, 16);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSip, 3, 10);
  CounterRng rng(3131, 0);
  Occupancy eta = random_eta(kSip, torus.V, rng, 3);
  std::vector<double> phi(torus.V);
  for (long long x = 0; x < torus.V; ++x)
    phi[x] = std::sin(2 * 3.14159265358979 * x / torus.V) + 0.3;
  FieldEvaluator<double> ev(kSip, torus, kern, t, phi, 3, eta);
  int applied = 0;
  for (int step = 0; step < 400; ++step) {
    long long i = (long long)rng.next_below(torus.V);
    if (ev.state()[i] == 0) continue;
    long long j = (i + 1 + (long long)rng.next_below(torus.V - 2)) % torus.V;
    ev.apply_move(i, j);
    ++applied;
  }
  CHECK(applied > 100);
  for (int k = 0; k <= 3; ++k) {
    double inc = ev.coeff(k);
    double fresh = ev.coeff_rebuilt(k);
    CHECK(inc == doctest::Approx(fresh).epsilon(1e-12));
  }
}

TEST_CASE("qv_closed anchors") {
  Torus torus(1, 8);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSip, 3, 8);
  TestFunction constant = tf_constant(1, 2.0);
  auto grads = sample_gradient(constant, torus);
  CHECK(grad_quad_sum(kern, torus, grads) == 0.0);

  // k = 1: closed quadratic variation is deterministic (field of order 0 is 1)
  TestFunction sine = tf_sin(1);
  auto g2 = grad_quad_sum(kern, torus, sample_gradient(sine, torus));
  Occupancy eta(torus.V);
  eta[0] = 1;
  std::vector<double> phi = sample_on_torus(sine, torus);
  FieldEvaluator<double> ev(kSip, torus, kern, t, phi, 1, eta);
  double c = t.c_measured().to_double();
  double rho = kSip.rho.to_double();
  double expect = rho * (kSip.alpha.to_double() + kSip.sigma * rho) * c * c *
                  g2 / double(torus.L);
  CHECK(qv_closed(ev, torus, g2) == doctest::Approx(expect).epsilon(1e-13));
}

TEST_CASE("dynkin martingale bookkeeping") {
  Torus torus(1, 8);
  Kernel kern = nearest_neighbor_kernel(1);
  DualityTable t = build_resolved_table(kSep, 3, 4);
  TestFunction sine = tf_sin(1);
  std::vector<double> phi = sample_on_torus(sine, torus);

  // empty configuration: Y constant 0 for k >= 1, M and N vanish identically
  Trajectory empty_traj;
  empty_traj.initial = Occupancy(torus.V);
  empty_traj.horizon = 0.5;
  empty_traj.time_scale = torus.L;
  std::vector<double> grid{0.0, 0.1, 0.25, 0.5};
  MartingaleSample ms = dynkin_martingale(kSep, torus, kern, t, phi, 2, empty_traj, grid);
  CHECK(ms.M[0] == 0.0);
  CHECK(ms.N[0] == 0.0);
  for (double m : ms.M) CHECK(m == 0.0);
  for (double nval : ms.N) CHECK(nval == 0.0);

  // a real trajectory: M_0 = N_0 = 0 and the integrals accumulate
  CounterRng init(55, 0);
  Occupancy eta0(torus.V);
  for (long long x = 0; x < torus.V; ++x) eta0[x] = (int)nu_marginal_sample(kSep, init);
  Trajectory traj = simulate(kSep, kern, torus, eta0, 0.05, torus.L, 99, 1);
  MartingaleSample ms2 =
      dynkin_martingale(kSep, torus, kern, t, phi, 2, traj, {0.0, 0.02, 0.05});
  CHECK(ms2.M[0] == 0.0);
  CHECK(ms2.N[0] == 0.0);
  CHECK(ms2.drift_integral[0] == 0.0);
  CHECK(ms2.cdc_integral.back() >= 0.0);

  CHECK_THROWS_AS(
      dynkin_martingale(kSep, torus, kern, t, phi, 2, traj, {0.0, 0.2}),
      GridBeyondHorizon);
}
