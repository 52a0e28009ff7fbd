#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdlab/rational.hpp"
#include "sdlab/series.hpp"
#include "sdlab/model.hpp"
#include "sdlab/lattice.hpp"
#include "sdlab/state.hpp"
#include "sdlab/rng.hpp"

using namespace sdlab;

TEST_CASE("rational arithmetic and parsing") {
  CHECK(Rat::of(2, 4) == Rat::of(1, 2));
  CHECK(Rat::of(1, 3) + Rat::of(1, 6) == Rat::of(1, 2));
  CHECK(Rat::of(-3, 9).str() == "-1/3");
  CHECK(Rat::parse("7/2") == Rat::of(7, 2));
  CHECK(Rat::parse(" -5 ") == Rat(-5));
  CHECK(Rat::of(1, 2).pow(3) == Rat::of(1, 8));
  CHECK(Rat::of(2, 3).to_double() == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(Rat::of(1, 0), std::domain_error);
  CHECK(Rat::of(7, -14) == Rat::of(-1, 2));
}

TEST_CASE("series multiply / invert round trip") {
  auto h = mobius_series(Rat(3), Rat(1), 10);  // (1-3t)/(1-t)
  auto hi = series_inv(h);
  auto id = series_mul(h, hi);
  CHECK(id[0] == Rat(1));
  for (int m = 1; m <= 10; ++m) CHECK(id[m] == Rat(0));
  auto e = exp_series(Rat(-1), 6);
  CHECK(e[0] == Rat(1));
  CHECK(e[1] == Rat(-1));
  CHECK(e[2] == Rat::of(1, 2));
  CHECK(e[3] == Rat::of(-1, 6));
}

TEST_CASE("model validation") {
  CHECK_NOTHROW(ModelSpec(0, Rat(1), Rat::of(1, 2)));
  CHECK_NOTHROW(ModelSpec(1, Rat::of(1, 2), Rat(2)));
  CHECK_THROWS_AS(ModelSpec(-1, Rat::of(3, 2), Rat(1)), InvalidModel);  // non-integer alpha
  CHECK_THROWS_AS(ModelSpec(-1, Rat(2), Rat(2)), InvalidModel);         // rho = alpha
  CHECK_THROWS_AS(ModelSpec(2, Rat(1), Rat(1)), InvalidModel);
}

TEST_CASE("lambda and pi weights") {
  ModelSpec irw(0, Rat(1), Rat(1));
  CHECK(lambda_weight(irw, 3) == Rat::of(1, 6));
  CHECK(pi_weight(irw, 5) == Rat(1));

  ModelSpec sep(-1, Rat(2), Rat(1));
  CHECK(lambda_weight(sep, 1) == Rat(2));
  CHECK(pi_weight(sep, 2) == Rat(2));  // alpha!/(alpha-m)! = 2!/0!
  CHECK_THROWS_AS(lambda_weight(sep, 3), OutOfSupport);

  ModelSpec sip(1, Rat(1), Rat(1));
  CHECK(pi_weight(sip, 3) == Rat(6));  // Gamma(4)/Gamma(1)
  // detailed-balance reading: lambda(m) = Gamma(a+m)/(m! Gamma(a)); for a=1 all 1
  CHECK(lambda_weight(sip, 2) == Rat(1));
}

TEST_CASE("nu marginal pmf values and normalization") {
  ModelSpec irw(0, Rat(1), Rat(1));
  CHECK(nu_marginal_pmf(irw, 0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));

  ModelSpec sep(-1, Rat(2), Rat(1));
  CHECK(nu_marginal_pmf(sep, 1) == doctest::Approx(0.5).epsilon(1e-14));

  ModelSpec sip(1, Rat(1), Rat(1));
  CHECK(nu_marginal_pmf(sip, 0) == doctest::Approx(0.5).epsilon(1e-14));

  for (const auto& spec : {irw, sep, sip}) {
    double tot = 0, w = nu_marginal_pmf(spec, 0);
    long long n = 0;
    while (w > 1e-18 && n < 400) {
      tot += w;
      w *= nu_pmf_ratio(spec, n);
      ++n;
    }
    CHECK(tot == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("nu moments match closed forms") {
  for (const auto& spec : {ModelSpec(0, Rat(2), Rat::of(3, 2)),
                           ModelSpec(-1, Rat(3), Rat::of(3, 2)),
                           ModelSpec(1, Rat::of(3, 2), Rat::of(1, 2))}) {
    CHECK(nu_power_moment(spec, 0) == Rat(1));
    CHECK(nu_power_moment(spec, 1) == spec.rho);
    Rat var = nu_power_moment(spec, 2) - spec.rho * spec.rho;
    Rat expected = spec.rho * (Rat(1) + Rat(spec.sigma) * spec.rho / spec.alpha);
    CHECK(var == expected);
  }
}

TEST_CASE("kernel validation and chi") {
  // d=1 nearest neighbor
  Kernel k1 = nearest_neighbor_kernel(1);
  CHECK(k1.chi == Rat(1));

  // d=2 nearest neighbor: chi = 1/2
  Kernel k2 = nearest_neighbor_kernel(2);
  CHECK(k2.chi == Rat::of(1, 2));

  // asymmetric weights rejected
  std::map<Offset, Rat> bad{{{-1}, Rat::of(1, 3)}, {{1}, Rat::of(2, 3)}};
  CHECK_THROWS_AS(build_kernel(1, 1, bad), SymmetryViolation);

  // missing orbit member rejected
  std::map<Offset, Rat> half{{{1}, Rat(1)}};
  CHECK_THROWS_AS(build_kernel(1, 1, half), SymmetryViolation);

  // p(0) != 0 rejected
  std::map<Offset, Rat> origin{{{0}, Rat::of(1, 2)}, {{1}, Rat::of(1, 4)}, {{-1}, Rat::of(1, 4)}};
  CHECK_THROWS_AS(build_kernel(1, 1, origin), ZeroAtOriginViolation);

  // even support does not generate Z
  std::map<Offset, Rat> even{{{2}, Rat::of(1, 2)}, {{-2}, Rat::of(1, 2)}};
  CHECK_THROWS_AS(build_kernel(1, 2, even), ReducibleKernel);

  // diagonal moves in d=2 generate the checkerboard sublattice only
  std::map<Offset, Rat> diag;
  for (int a : {-1, 1})
    for (int b : {-1, 1}) diag[{a, b}] = Rat::of(1, 4);
  CHECK_THROWS_AS(build_kernel(2, 1, diag), ReducibleKernel);

  // range-2 kernel normalizes and keeps chi consistent across axes
  std::map<Offset, Rat> r2{{{1}, Rat(2)}, {{-1}, Rat(2)}, {{2}, Rat(1)}, {{-2}, Rat(1)}};
  Kernel k3 = build_kernel(1, 2, r2);
  Rat total(0);
  for (auto& w : k3.p) total += w;
  CHECK(total == Rat(1));
  CHECK(k3.chi == Rat(2));  // 2*(1/3)*1 + 2*(1/6)*4
}

TEST_CASE("torus geometry and compatibility") {
  Torus t(2, 5);
  CHECK(t.V == 25);
  CHECK(t.shift(0, {-1, -1}) == t.site({4, 4}));
  Kernel k = nearest_neighbor_kernel(2);
  CHECK_NOTHROW(t.require_compatible(k));
  Torus small(1, 2);
  CHECK_THROWS(small.require_compatible(nearest_neighbor_kernel(1)));
}

TEST_CASE("Lambda / Pi / N cross identity") {
  ModelSpec sip(1, Rat(2), Rat(1));
  DualConfig xi{{0, 2}, {3, 1}};  // k = 3
  CHECK(xi.order() == 3);
  CHECK(N_of(xi) == Rat(3));      // 3!/2!
  CoordVector x({0, 3, 0});
  Rat kfact(6);
  CHECK(Pi_of(sip, x) * N_of(xi) == kfact * Lambda_of(sip, xi));

  // IRW example: xi = 2 delta_0, Lambda = 1/2, N = 1, Pi((0,0)) = 1
  ModelSpec irw(0, Rat(1), Rat(1));
  DualConfig two{{0, 2}};
  CHECK(Lambda_of(irw, two) == Rat::of(1, 2));
  CHECK(N_of(two) == Rat(1));
  CHECK(Pi_of(irw, CoordVector({0, 0})) == Rat(1));
}

TEST_CASE("rng determinism and sampling moments") {
  CounterRng a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differ = false;
  CounterRng a2(42, 7);
  for (int i = 0; i < 16; ++i) differ |= (a2.next_u64() != c.next_u64());
  CHECK(differ);

  for (const auto& spec : {ModelSpec(0, Rat(1), Rat::of(1, 2)),
                           ModelSpec(-1, Rat(2), Rat::of(1, 2)),
                           ModelSpec(1, Rat(1), Rat::of(1, 2))}) {
    CounterRng rng(1234, spec.sigma + 1);
    const int N = 200000;
    double sum = 0, sumsq = 0;
    long long cap = spec.site_cap();
    for (int i = 0; i < N; ++i) {
      long long n = nu_marginal_sample(spec, rng);
      if (cap >= 0) CHECK(n <= cap);
      sum += double(n);
      sumsq += double(n) * double(n);
    }
    double mean = sum / N;
    double var = sumsq / N - mean * mean;
    double se_mean = std::sqrt(nu_variance(spec) / N);
    CHECK(std::abs(mean - nu_mean(spec)) < 3.5 * se_mean);
    CHECK(std::abs(var - nu_variance(spec)) < 0.05 * nu_variance(spec) + 3 * se_mean);
  }
}
