#include <algorithm>
#include <cmath>

#include "engine_internal.hpp"

namespace mcd {

std::vector<double> cumulative_integral(const std::vector<double>& x, const std::vector<double>& f,
                                        const std::vector<double>& df) {
  if (x.size() != f.size() || x.size() != df.size()) throw ConfigError("cumulative_integral: size mismatch");
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 1; i < x.size(); ++i) {
    const double h = x[i] - x[i - 1];
    out[i] = out[i - 1] + 0.5 * h * (f[i - 1] + f[i]) + h * h / 12.0 * (df[i - 1] - df[i]);
  }
  return out;
}

double norm_squared(const MatrixSolution& psi) {
  std::vector<double> f(psi.size()), df(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const Mat v = psi.value(i), d = psi.derivative(i);
    f[i] = v.squaredNorm();
    df[i] = 2.0 * (v.array() * d.array()).sum();
  }
  return psi.size() < 2 ? 0.0 : cumulative_integral(psi.x, f, df).back();
}

double residual(const ChannelSystem& sys, const MatrixSolution& sol, double energy) {
  const auto& x = sol.x;
  const std::size_t m = x.size();
  if (m < 5) return 0.0;
  const auto bps = sys.potential.breakpoints(x.front(), x.back());
  const Mat lam = sys.threshold_matrix();
  double vmax = 0.0, pmax = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < m; ++i) pmax = std::max(pmax, sol.value(i).cwiseAbs().maxCoeff());
  for (std::size_t i = 2; i + 2 < m; ++i) {
    const double h = x[i + 1] - x[i];
    bool uniform = true;
    for (std::size_t k = i - 2; k < i + 2; ++k)
      if (std::abs((x[k + 1] - x[k]) - h) > 1e-9 * h) uniform = false;
    if (!uniform) continue;
    auto bp = std::lower_bound(bps.begin(), bps.end(), x[i - 2] - 1e-12);
    if (bp != bps.end() && *bp <= x[i + 2] + 1e-12) continue;
    const Mat d2 = (8.0 * (sol.derivative(i + 1) - sol.derivative(i - 1)) -
                    (sol.derivative(i + 2) - sol.derivative(i - 2))) /
                   (12.0 * h);
    const Mat v = sys.potential.smooth(x[i]);
    vmax = std::max(vmax, v.cwiseAbs().maxCoeff());
    const Mat r = -d2 + (v + lam - energy * Mat::Identity(v.rows(), v.cols())) * sol.value(i);
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  const double scale = (1.0 + std::abs(energy) + vmax) * pmax;
  return scale > 0 ? worst / scale : worst;
}

Mat monodromy(const ChannelSystem& sys, double energy, double x0, double x1, const SolverConfig& cfg) {
  cfg.validate();
  if (!(x1 > x0)) throw ConfigError("monodromy: need x1 > x0");
  const Discretization d(sys, make_grid(x0, x1, cfg.h, sys.potential.breakpoints(x0, x1)));
  const int n = sys.channels();
  const PMat<double> y0 = PMat<double>::Identity(2 * n, 2 * n);
  return propagate<double>(d, energy, 0, d.size() - 1, y0, 0, false).final_state;
}

}  // namespace mcd
