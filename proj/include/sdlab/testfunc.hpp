#ifndef SDLAB_TESTFUNC_HPP
#define SDLAB_TESTFUNC_HPP

#include <functional>
#include <string>
#include <vector>
#include <cmath>
#include <numbers>

#include "sdlab/lattice.hpp"

namespace sdlab {

// Smooth periodic test function on the continuum torus [0,1)^d with analytic
// first and second derivatives.
struct TestFunction {
  int d = 1;
  std::string name;
  std::function<double(const std::vector<double>&)> value;
  std::function<std::vector<double>(const std::vector<double>&)> gradient;
  std::function<double(const std::vector<double>&)> laplacian;

  double operator()(const std::vector<double>& u) const { return value(u); }
};

inline TestFunction tf_constant(int d, double v) {
  TestFunction f;
  f.d = d;
  f.name = "const";
  f.value = [v](const std::vector<double>&) { return v; };
  f.gradient = [d](const std::vector<double>&) { return std::vector<double>(d, 0.0); };
  f.laplacian = [](const std::vector<double>&) { return 0.0; };
  return f;
}

// amplitude * prod_i sin(2 pi freq u_i + phase)
inline TestFunction tf_sin(int d, int freq = 1, double amplitude = 1.0,
                           double phase = 0.0) {
  TestFunction f;
  f.d = d;
  f.name = "sin";
  const double w = 2.0 * std::numbers::pi * freq;
  f.value = [=](const std::vector<double>& u) {
    double v = amplitude;
    for (int i = 0; i < d; ++i) v *= std::sin(w * u[i] + phase);
    return v;
  };
  f.gradient = [=](const std::vector<double>& u) {
    std::vector<double> g(d);
    for (int i = 0; i < d; ++i) {
      double v = amplitude;
      for (int j = 0; j < d; ++j)
        v *= (j == i) ? w * std::cos(w * u[j] + phase) : std::sin(w * u[j] + phase);
      g[i] = v;
    }
    return g;
  };
  f.laplacian = [=](const std::vector<double>& u) {
    double base = amplitude;
    for (int i = 0; i < d; ++i) base *= std::sin(w * u[i] + phase);
    return -double(d) * w * w * base;
  };
  return f;
}

inline TestFunction tf_cos(int d, int freq = 1, double amplitude = 1.0) {
  return tf_sin(d, freq, amplitude, std::numbers::pi / 2.0);
}

// periodized gaussian bump: sum over images m in Z of exp(-(u-c-m)^2/(2 w^2)),
// product across axes; image sum truncated far below double precision
inline TestFunction tf_gauss_bump(int d, double center = 0.5, double width = 0.1,
                                  double amplitude = 1.0) {
  TestFunction f;
  f.d = d;
  f.name = "gauss_bump";
  int images = (int)std::ceil(9.0 * width) + 2;
  auto g0 = [=](double u) {
    double s = 0;
    for (int m = -images; m <= images; ++m) {
      double z = u - center - m;
      s += std::exp(-z * z / (2 * width * width));
    }
    return s;
  };
  auto g1 = [=](double u) {
    double s = 0;
    for (int m = -images; m <= images; ++m) {
      double z = u - center - m;
      s += -z / (width * width) * std::exp(-z * z / (2 * width * width));
    }
    return s;
  };
  auto g2 = [=](double u) {
    double s = 0;
    for (int m = -images; m <= images; ++m) {
      double z = u - center - m;
      s += (z * z / (width * width) - 1.0) / (width * width) *
           std::exp(-z * z / (2 * width * width));
    }
    return s;
  };
  f.value = [=](const std::vector<double>& u) {
    double v = amplitude;
    for (int i = 0; i < d; ++i) v *= g0(u[i]);
    return v;
  };
  f.gradient = [=](const std::vector<double>& u) {
    std::vector<double> g(d);
    for (int i = 0; i < d; ++i) {
      double v = amplitude;
      for (int j = 0; j < d; ++j) v *= (j == i) ? g1(u[j]) : g0(u[j]);
      g[i] = v;
    }
    return g;
  };
  f.laplacian = [=](const std::vector<double>& u) {
    double s = 0;
    for (int i = 0; i < d; ++i) {
      double v = amplitude;
      for (int j = 0; j < d; ++j) v *= (j == i) ? g2(u[j]) : g0(u[j]);
      s += v;
    }
    return s;
  };
  return f;
}

// per-site samples phi(x/L) on the torus
inline std::vector<double> sample_on_torus(const TestFunction& f, const Torus& torus) {
  std::vector<double> out(torus.V);
  for (long long x = 0; x < torus.V; ++x) {
    auto c = torus.coords(x);
    std::vector<double> u(torus.d);
    for (int i = 0; i < torus.d; ++i) u[i] = double(c[i]) / double(torus.L);
    out[x] = f.value(u);
  }
  return out;
}
inline std::vector<double> sample_laplacian(const TestFunction& f, const Torus& torus) {
  std::vector<double> out(torus.V);
  for (long long x = 0; x < torus.V; ++x) {
    auto c = torus.coords(x);
    std::vector<double> u(torus.d);
    for (int i = 0; i < torus.d; ++i) u[i] = double(c[i]) / double(torus.L);
    out[x] = f.laplacian(u);
  }
  return out;
}
inline std::vector<std::vector<double>> sample_gradient(const TestFunction& f,
                                                        const Torus& torus) {
  std::vector<std::vector<double>> out(torus.V);
  for (long long x = 0; x < torus.V; ++x) {
    auto c = torus.coords(x);
    std::vector<double> u(torus.d);
    for (int i = 0; i < torus.d; ++i) u[i] = double(c[i]) / double(torus.L);
    out[x] = f.gradient(u);
  }
  return out;
}

}  // namespace sdlab

#endif
