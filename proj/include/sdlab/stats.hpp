#ifndef SDLAB_STATS_HPP
#define SDLAB_STATS_HPP

#include <vector>
#include <cmath>
#include <stdexcept>
#include <Eigen/Dense>

namespace sdlab {

// Mean with standard error over independent replicas. Aggregation uses sums
// and sums of squares only, so results do not depend on evaluation order.
struct EstimateWithError {
  double mean = 0;
  double std_error = 0;
  long long replicas = 0;

  static EstimateWithError from_samples(const std::vector<double>& v) {
    if (v.size() < 2) throw std::invalid_argument("need at least 2 replicas");
    double s = 0, s2 = 0;
    for (double x : v) { s += x; s2 += x * x; }
    EstimateWithError e;
    e.replicas = (long long)v.size();
    e.mean = s / double(v.size());
    double var = std::max(0.0, (s2 - s * s / double(v.size())) / double(v.size() - 1));
    e.std_error = std::sqrt(var / double(v.size()));
    return e;
  }
  bool within_sigmas(double target, double sigmas) const {
    return std::abs(mean - target) <= sigmas * std_error;
  }
};

// pooled two-sample comparison
inline bool agree_within_sigmas(const EstimateWithError& a, const EstimateWithError& b,
                                double sigmas) {
  double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  return std::abs(a.mean - b.mean) <= sigmas * se;
}

struct SlopeFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
};

// least squares y = a + b x with the usual slope standard error
inline SlopeFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const int n = (int)x.size();
  if (n < 2 || y.size() != x.size()) throw std::invalid_argument("bad fit input");
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = x[i];
    b(i) = y[i];
  }
  Eigen::Vector2d coef = A.colPivHouseholderQr().solve(b);
  SlopeFit f;
  f.intercept = coef(0);
  f.slope = coef(1);
  if (n > 2) {
    double rss = (A * coef - b).squaredNorm();
    double xbar = A.col(1).mean();
    double sxx = (A.col(1).array() - xbar).square().sum();
    f.slope_se = std::sqrt(rss / double(n - 2) / sxx);
  }
  return f;
}

// log-log scaling fit against a target exponent
struct ScalingReport {
  std::vector<double> n_values;
  std::vector<double> errors;       // per-n statistic (e.g. mean squared integral)
  SlopeFit fit;
  double target = 0;
  double tolerance = 0;
  bool pass = false;

  static ScalingReport against(const std::vector<double>& ns,
                               const std::vector<double>& errs, double target,
                               double tolerance) {
    if (ns.size() < 3) throw std::invalid_argument("scaling fit needs >= 3 points");
    std::vector<double> lx, ly;
    for (size_t i = 0; i < ns.size(); ++i) {
      lx.push_back(std::log(ns[i]));
      ly.push_back(std::log(std::max(errs[i], 1e-300)));
    }
    ScalingReport r;
    r.n_values = ns;
    r.errors = errs;
    r.fit = fit_line(lx, ly);
    r.target = target;
    r.tolerance = tolerance;
    r.pass = std::abs(r.fit.slope - target) <= tolerance;
    return r;
  }
};

}  // namespace sdlab

#endif
