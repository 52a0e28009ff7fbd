#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sdlab/orthopoly.hpp"
#include "sdlab/convention.hpp"

using namespace sdlab;

static const ModelSpec kIrw(0, Rat(1), Rat::of(1, 2));
static const ModelSpec kSep(-1, Rat(2), Rat::of(1, 2));
static const ModelSpec kSip(1, Rat(1), Rat::of(1, 2));

TEST_CASE("printed generating pair matches hand values") {
  ModelSpec irw(0, Rat(1), Rat(1));
  GeneratingPair gp = build_generating_pair(irw, 6, +1, +1);
  // h = (1 - t/rho) with rho = 1
  CHECK(gp.h_coeffs[0] == Rat(1));
  CHECK(gp.h_coeffs[1] == Rat(-1));
  CHECK(gp.h_coeffs[2] == Rat(0));
  // e = e^{-t}
  CHECK(gp.e_coeffs[2] == Rat::of(1, 2));
  CHECK(gp.e_coeffs[3] == Rat::of(-1, 6));
  // h * h^{-1} = 1 exactly
  auto id = series_mul(gp.h_coeffs, gp.h_inv_coeffs);
  CHECK(id[0] == Rat(1));
  for (size_t m = 1; m < id.size(); ++m) CHECK(id[m] == Rat(0));
}

TEST_CASE("convention resolution per model") {
  Torus small(1, 4);

  SUBCASE("irw: printed signs fail mean-zero, flipped h passes") {
    ModelSpec irw(0, Rat(1), Rat(1));
    GeneratingPair printed = build_generating_pair(irw, 6, +1, +1);
    CHECK(printed.e_coeffs[1] + irw.rho * printed.h_coeffs[1] == Rat(-2));
    ResolvedConvention rc = resolve_convention(irw, small);
    CHECK(rc.info.stage == 1);
    CHECK(rc.info.sign_e == +1);
    CHECK(rc.info.sign_h == -1);
    // resolved step of dd(1, .) is +1 at rho = 1
    CHECK(rc.pair.h_coeffs[1] == Rat(1));
    CHECK(rc.info.d1_constant == Rat(1));  // d(1,n) = (n - rho)/rho
  }

  SUBCASE("sep: all sign variants fail, mean-zero-derived h with family e wins") {
    ResolvedConvention rc = resolve_convention(kSep, small);
    CHECK(rc.info.stage == 2);
    CHECK(rc.info.e_form == "family");
    CHECK(rc.info.h_form == "derived");
    // e = (1+t)^alpha, h = (1 - ((alpha-rho)/rho) t)/(1 + t)
    CHECK(rc.pair.e_coeffs[1] == kSep.alpha);
    Rat cstar = (kSep.alpha - kSep.rho) / kSep.rho;
    CHECK(rc.pair.h_coeffs[1] == Rat(-1) - cstar + Rat(0));  // g(1) = sigma - cstar
    CHECK(rc.info.c_measured == kSep.alpha / kSep.rho);
  }

  SUBCASE("sip: printed (+,+) is mean-zero but fails orthogonality; family e wins") {
    GeneratingPair printed = build_generating_pair(kSip, 6, +1, +1);
    CHECK(printed.e_coeffs[1] + kSip.rho * printed.h_coeffs[1] == Rat(0));
    CHECK_FALSE(detail::orthogonality_holds(kSip, printed, 3, 1e-10));
    ResolvedConvention rc = resolve_convention(kSip, small);
    CHECK(rc.info.stage == 2);
    CHECK(rc.info.e_form == "family");
    CHECK(rc.info.c_measured == kSip.alpha / kSip.rho);
  }

  SUBCASE("non-integer alpha inclusion resolves too") {
    ModelSpec frac(1, Rat::of(1, 2), Rat::of(1, 2));
    ResolvedConvention rc = resolve_convention(frac, small);
    CHECK(rc.info.stage == 2);
  }
}

TEST_CASE("d(0, n) = 1 and degree cap for exclusion") {
  DualityTable t = build_resolved_table(kSep, 4, 10);
  for (int n = 0; n <= 2; ++n) CHECK(t.dd(0, n) == Rat(1));
  // sigma = -1, alpha = 2: dd(3, n) = 0 on the physical range n <= alpha
  for (int n = 0; n <= 2; ++n) CHECK(t.dd(3, n) == Rat(0));

  DualityTable ti = build_resolved_table(kIrw, 4, 10);
  for (int n = 0; n <= 10; ++n) CHECK(ti.dd(0, n) == Rat(1));
}

TEST_CASE("recursion theorem: shift-built columns match direct expansion") {
  // structural route builds columns by dd(m, n+1) = sum g(m-j) dd(j, n);
  // the independent route expands e(t) h(t)^n by repeated multiplication from
  // scratch at each n and compares coefficient by coefficient.
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 6, 40);
    Series<Rat> hn(t.pair.h_coeffs.begin(), t.pair.h_coeffs.begin() + 7);
    Series<Rat> direct(t.pair.e_coeffs.begin(), t.pair.e_coeffs.begin() + 7);
    for (int n = 0; n <= 40; ++n) {
      for (int m = 0; m <= 6; ++m) CHECK(t.dd(m, n) == direct[m]);
      direct = series_mul(direct, hn);
    }
    // downward shift: dd(m, n-1) = sum gtilde(m-j) dd(j, n)
    for (int n = 1; n <= 10; ++n)
      for (int m = 0; m <= 6; ++m) {
        Rat s(0);
        for (int j = 0; j <= m; ++j) s += t.g_tilde(m - j) * t.dd(j, n);
        CHECK(s == t.dd(m, n - 1));
      }
  }
}

TEST_CASE("g and gtilde closed forms in the resolved convention") {
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 6, 5);
    CHECK(t.g(0) == Rat(1));
    CHECK(t.g_tilde(0) == Rat(1));
    // g tilde(1) = c = -g(1)
    CHECK(t.g_tilde(1) == -t.g(1));
    CHECK(t.g_tilde(1) == t.c_measured());
    // g(m) = g(1) sigma^{m-1}; gtilde(m) = gtilde(1) cstar^{m-1}
    Rat cstar = Rat(spec.sigma) - t.g(1);
    for (int m = 2; m <= 6; ++m) {
      CHECK(t.g(m) == t.g(1) * Rat(spec.sigma).pow(m - 1));
      CHECK(t.g_tilde(m) == t.g_tilde(1) * cstar.pow(m - 1));
    }
    if (spec.sigma == 0)
      for (int m = 2; m <= 6; ++m) CHECK(t.g(m) == Rat(0));
  }
}

TEST_CASE("gram-schmidt oracle agrees with the generating-function route") {
  for (const auto& spec : {kIrw, kSep, kSip}) {
    int mmax = spec.sigma == -1 ? 2 : 4;
    auto q = gram_schmidt_oracle(spec, mmax);
    CHECK(q[0] == std::vector<Rat>{Rat(1)});
    // q_1(n) = n - rho for every model
    CHECK(q[1][0] == -spec.rho);
    CHECK(q[1][1] == Rat(1));
    DualityTable t = build_resolved_table(spec, mmax, 12);
    for (int m = 1; m <= mmax; ++m) {
      // d(m, .) is a scalar multiple of q_m: constant ratio over n
      Rat ratio = t.d(m, 0) / poly_eval(q[m], 0);
      CHECK(ratio != Rat(0));
      for (long long n = 1; n <= 9; ++n) {
        Rat qv = poly_eval(q[m], n);
        CHECK(t.d(m, n) == ratio * qv);
      }
    }
  }
}

TEST_CASE("orthogonality: gram matrix diagonal and norms") {
  // exact for exclusion
  {
    DualityTable t = build_resolved_table(kSep, 2, 4);
    const auto& n2 = t.norm2_exact();
    long long A = kSep.alpha.as_int();
    Rat Z(0);
    for (long long n = 0; n <= A; ++n) Z += nu_weight(kSep, n);
    for (int m = 0; m <= 2; ++m)
      for (int mp = 0; mp < m; ++mp) {
        Rat s(0);
        for (long long n = 0; n <= A; ++n)
          s += t.d(m, n) * t.d(mp, n) * nu_weight(kSep, n);
        CHECK(s == Rat(0));
      }
    // variance of d(1, .): d(1,n) = c (n - rho) so norm2 = c^2 Var(n)
    Rat c = t.convention.d1_constant;
    Rat var = kSep.rho * (Rat(1) + Rat(-1) * kSep.rho / kSep.alpha);
    CHECK(n2[1] == c * c * var);
  }
  // float with certified tail for the unbounded families
  for (const auto& spec : {kIrw, kSip}) {
    DualityTable t = build_resolved_table(spec, 4, 10);
    const auto& n2 = t.norm2();
    CHECK(n2[0] == doctest::Approx(1.0).epsilon(1e-13));
    double c = t.convention.d1_constant.to_double();
    CHECK(n2[1] == doctest::Approx(c * c * nu_variance(spec)).epsilon(1e-12));
    for (int m = 1; m <= 4; ++m) CHECK(n2[m] > 0);
  }
}

TEST_CASE("mu and the Lambda/mu ratio is constant on Omega_k") {
  for (const auto& spec : {kIrw, kSep, kSip}) {
    DualityTable t = build_resolved_table(spec, 3, 10);
    ProductDuality pd(t);
    CHECK(pd.mu_of(DualConfig{}) == doctest::Approx(1.0));
    for (int k = 1; k <= 3; ++k) {
      if (spec.sigma == -1 && k > spec.alpha.as_int() * 2) continue;
      // all shapes of k particles on sites {0, 1, 2}
      std::vector<DualConfig> shapes;
      for (int a = 0; a <= k; ++a)
        for (int b = 0; a + b <= k; ++b) {
          int c = k - a - b;
          DualConfig xi;
          if (a) xi.add(0, a);
          if (b) xi.add(1, b);
          if (c) xi.add(2, c);
          if (xi.valid_for(spec)) shapes.push_back(xi);
        }
      double ref = 0;
      for (auto& xi : shapes) {
        double ratio = Lambda_of(spec, xi).to_double() / pd.mu_of(xi);
        if (ref == 0) ref = ratio;
        CHECK(ratio == doctest::Approx(ref).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("sip lambda reading: printed m! variant breaks the ratio") {
  // with the printed lambda(m) = m! Gamma(a+m)/Gamma(a) the dual-measure /
  // norm ratio cannot be constant on Omega_2
  DualityTable t = build_resolved_table(kSip, 2, 10);
  ProductDuality pd(t);
  DualConfig same{{0, 2}};
  DualConfig split{{0, 1}, {1, 1}};
  auto printed_lambda = [&](int m) {
    Rat v(1);
    for (int j = 1; j <= m; ++j) v *= Rat(j);
    for (int j = 0; j < m; ++j) v *= (kSip.alpha + Rat(j));
    return v;
  };
  double good_same = Lambda_of(kSip, same).to_double() / pd.mu_of(same);
  double good_split = Lambda_of(kSip, split).to_double() / pd.mu_of(split);
  CHECK(good_same == doctest::Approx(good_split).epsilon(1e-10));
  double bad_same = (printed_lambda(2) * printed_lambda(0)).to_double() / pd.mu_of(same);
  double bad_split = (printed_lambda(1) * printed_lambda(1)).to_double() / pd.mu_of(split);
  CHECK(std::abs(bad_same / bad_split - 1.0) > 0.5);
}

TEST_CASE("table extension preserves prefix") {
  DualityTable t = build_resolved_table(kSip, 3, 6);
  DualityTable big = t.extended(12);
  for (int m = 0; m <= 3; ++m)
    for (int n = 0; n <= 6; ++n) CHECK(t.dd(m, n) == big.dd(m, n));
  CHECK_THROWS_AS(t.dd(0, 7), TableOverflow);
  CHECK_NOTHROW(big.dd(0, 12));
  CHECK_THROWS_AS(t.dd(4, 0), TableOverflow);
}
