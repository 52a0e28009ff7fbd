#ifndef SDLAB_MARTINGALE_HPP
#define SDLAB_MARTINGALE_HPP

#include <vector>
#include <stdexcept>

#include "sdlab/fields.hpp"

namespace sdlab {

struct GridBeyondHorizon : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Y_t, the Dynkin martingale M_t = Y_t - Y_0 - int n^2 L Y ds, and
// N_t = M_t^2 - int n^2 Gamma Y ds, sampled on a time grid. Between jumps the
// integrands are constant, so the integrals are exact sums of
// holding-time * value; the field is updated incrementally at each jump.
struct MartingaleSample {
  std::vector<double> grid;
  std::vector<double> Y, M, N, drift_integral, cdc_integral;
};

inline MartingaleSample dynkin_martingale(const ModelSpec& spec, const Torus& torus,
                                          const Kernel& kernel, const DualityTable& table,
                                          const std::vector<double>& phi, int k,
                                          const Trajectory& traj,
                                          const std::vector<double>& grid) {
  for (double g : grid)
    if (g > traj.horizon) throw GridBeyondHorizon("grid point beyond trajectory horizon");
  if (traj.time_scale != torus.L)
    throw std::invalid_argument("trajectory clock must match the torus scale n = L");

  FieldEvaluator<double> ev(spec, torus, kernel, table, phi, k, traj.initial);
  MartingaleSample out;
  out.grid = grid;

  double t = 0;
  double drift_int = 0, cdc_int = 0;
  const double Y0 = field_eval(ev, torus).value;
  size_t gi = 0;

  auto cur = drift_cdc_exact(ev, torus);
  double curY = Y0;

  auto emit_until = [&](double tnext) {
    while (gi < grid.size() && grid[gi] <= tnext) {
      double dt = grid[gi] - t;
      double di = drift_int + dt * cur.drift_exact;
      double ci = cdc_int + dt * cur.cdc_exact;
      double M = curY - Y0 - di;
      out.Y.push_back(curY);
      out.M.push_back(M);
      out.N.push_back(M * M - ci);
      out.drift_integral.push_back(di);
      out.cdc_integral.push_back(ci);
      ++gi;
    }
  };

  for (const Event& evn : traj.events) {
    emit_until(evn.time);
    drift_int += (evn.time - t) * cur.drift_exact;
    cdc_int += (evn.time - t) * cur.cdc_exact;
    t = evn.time;
    ev.apply_move(evn.from, evn.to);
    cur = drift_cdc_exact(ev, torus);
    curY = field_eval(ev, torus).value;
  }
  emit_until(traj.horizon);
  return out;
}

}  // namespace sdlab

#endif
