#include "mcd/gl.hpp"

#include <algorithm>
#include <cmath>

#include "mcd/errors.hpp"

namespace mcd {

namespace {

void free_step(double q, double d, double p, double dp, double& out, double& dout) {
  if (q > 0) {
    const double k = std::sqrt(q);
    out = p * std::cos(k * d) + dp * std::sin(k * d) / k;
    dout = -p * k * std::sin(k * d) + dp * std::cos(k * d);
  } else if (q < 0) {
    const double k = std::sqrt(-q);
    out = p * std::cosh(k * d) + dp * std::sinh(k * d) / k;
    dout = p * k * std::sinh(k * d) + dp * std::cosh(k * d);
  } else {
    out = p + dp * d;
    dout = dp;
  }
}

void samples(const MatrixSolution& s, std::vector<Mat>& v, std::vector<Mat>& d) {
  v.resize(s.size());
  d.resize(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    v[i] = s.value(i);
    d[i] = s.derivative(i);
  }
}

Vec tail_rates(const BoundState& b) {
  // On an interval the state vanishes at the end, so any positive rate gives a zero tail.
  return b.kappa.size() > 0 ? b.kappa : Vec::Ones(b.psi.rows);
}

void fit(const std::vector<double>& t, const std::vector<double>& y, double& slope, double& rms) {
  const double n = static_cast<double>(t.size());
  double st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    st += t[i];
    sy += y[i];
    stt += t[i] * t[i];
    sty += t[i] * y[i];
  }
  slope = (n * sty - st * sy) / (n * stt - st * st);
  const double icpt = (sy - slope * st) / n;
  double ss = 0;
  for (std::size_t i = 0; i < t.size(); ++i) ss += std::pow(y[i] - icpt - slope * t[i], 2);
  rms = std::sqrt(ss / n);
}

// Beyond xa a closed-channel component is A e^{-k d} + B e^{k d}. When every B is at the level
// of the integration error, the weights are the physical ones and B is rounding: keep only A.
void drop_rounding_growth(const ChannelSystem& base, double energy, const std::vector<double>& x, double xa,
                          std::vector<Mat>& u, std::vector<Mat>& du) {
  const std::size_t ia = std::lower_bound(x.begin(), x.end(), xa - 1e-12) - x.begin();
  if (ia + 1 >= x.size()) return;
  const int n = base.channels();
  double scale = 0.0, grow = 0.0;
  for (int a = 0; a < n; ++a) {
    const double k = std::sqrt(std::abs(energy - base.thresholds[a]));
    scale = std::max(scale, std::hypot(u[ia](a, 0), du[ia](a, 0) / std::max(k, 1e-12)));
    if (energy < base.thresholds[a]) grow = std::max(grow, std::abs(u[ia](a, 0) + du[ia](a, 0) / k) / 2);
  }
  if (!(grow < 1e-8 * scale)) return;
  for (int a = 0; a < n; ++a) {
    if (energy >= base.thresholds[a]) continue;
    const double k = std::sqrt(base.thresholds[a] - energy);
    const double amp = (u[ia](a, 0) - du[ia](a, 0) / k) / 2;
    for (std::size_t i = ia + 1; i < x.size(); ++i) {
      u[i](a, 0) = amp * std::exp(-k * (x[i] - x[ia]));
      du[i](a, 0) = -k * u[i](a, 0);
    }
  }
}

}  // namespace

MatrixSolution regular_continued(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                 const SolverConfig& cfg) {
  if (sys.domain == DomainKind::interval) return integrate_regular_on(sys, energy, grid);
  const double xa = right_asymptotic_point(sys, cfg);
  const std::size_t ia = std::lower_bound(grid.begin(), grid.end(), xa - 1e-12) - grid.begin();
  if (ia >= grid.size() - 1) return integrate_regular_on(sys, energy, grid);
  MatrixSolution out = integrate_regular_on(sys, energy, std::vector<double>(grid.begin(), grid.begin() + ia + 1));
  const int n = sys.channels();
  const Mat p = out.value(ia), dp = out.derivative(ia);
  Mat v(n, n), d(n, n);
  out.reserve(grid.size());
  for (std::size_t i = ia + 1; i < grid.size(); ++i) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        free_step(energy - sys.thresholds[a], grid[i] - grid[ia], p(a, b), dp(a, b), v(a, b), d(a, b));
    out.push(grid[i], v, d);
  }
  return out;
}

TransformResult swv_scale_one_channel(const ChannelSystem& base, const BoundState& psi0, double ratio) {
  if (base.channels() != 1) throw ConfigError("swv_scale_one_channel: one channel only");
  if (!(ratio > 0)) throw ConfigError("swv_scale_one_channel: ratio must be positive");
  const double a = ratio * ratio - 1.0;
  std::vector<Mat> v, d;
  samples(psi0.psi, v, d);
  const auto tail = gram_tail(psi0.psi.x, v, d, {tail_rates(psi0)});

  // P = 1 + a int_0^x psi0^2 = ratio^2 - a int_x^inf psi0^2 keeps full precision on both ends.
  const double w = std::sqrt(std::abs(a));
  std::vector<Mat> u(v.size()), du(v.size()), p(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    u[i] = w * v[i];
    du[i] = w * d[i];
    p[i] = Mat::Constant(1, 1, ratio * ratio - a * tail[i](0, 0));
  }
  auto r = assemble_transform(base, Anchor::origin, psi0.psi.x, std::move(u), std::move(du), p,
                              Mat::Constant(1, 1, a < 0 ? -1.0 : 1.0), {});
  r.energies = {psi0.energy};
  r.states = MatrixSolution(psi0.energy, MatrixSolution::Kind::bound, 1, 1);
  r.states.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double pp = p[i](0, 0), dpp = a * v[i](0, 0) * v[i](0, 0);
    r.states.push(r.x[i], ratio * v[i] / pp, ratio * (d[i] / pp - v[i] * dpp / (pp * pp)));
  }
  return r;
}

TransformResult transform_bound_state(const ChannelSystem& base, const BoundState& old_state, double e_new,
                                      const Vec& c_new, const SolverConfig& cfg) {
  cfg.validate();
  if (base.domain == DomainKind::whole_line) throw ConfigError("transform_bound_state: needs a half line or interval");
  const int n = base.channels();
  if (c_new.size() != n) throw ConfigError("transform_bound_state: weight vector size != channel count");
  auto x = refine_grid(system_grid(base, cfg.h));
  const BoundState old = refine_bound_state(base, old_state.energy, x, cfg);
  const Vec c0 = old.c->weights;

  std::vector<Mat> psi, dpsi;
  samples(old.psi, psi, dpsi);
  std::vector<Mat> u(x.size(), Mat(n, 2)), du(x.size(), Mat(n, 2));
  if (e_new == old_state.energy) {
    // Same level: the part along the old weights is the old state itself, exact at large x.
    const double lam = c_new.dot(c0) / c0.squaredNorm();
    const Vec perp = c_new - lam * c0;
    const auto phi = regular_continued(base, old.energy, x, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      u[i].col(0) = lam * psi[i] + phi.value(i) * perp;
      du[i].col(0) = lam * dpsi[i] + phi.derivative(i) * perp;
    }
  } else {
    const auto phi = regular_continued(base, e_new, x, cfg);
    for (std::size_t i = 0; i < x.size(); ++i) {
      u[i].col(0) = phi.value(i) * c_new;
      du[i].col(0) = phi.derivative(i) * c_new;
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i].col(1) = psi[i];
    du[i].col(1) = dpsi[i];
  }

  Mat s = Mat::Identity(2, 2);
  s(1, 1) = -1.0;
  const auto j = gram_from_origin(x, u, du);
  const auto tail = gram_tail(x, psi, dpsi, {tail_rates(old)});
  std::vector<Mat> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = Mat::Identity(2, 2) + s * j[i];
    p[i](1, 1) = tail[i](0, 0);
    if (e_new != old_state.energy) {
      // Wronskian form of int_0^x u1 psi; the quadrature loses the small part that dV needs at large x.
      const double w = (u[i].col(0).dot(dpsi[i].col(0)) - du[i].col(0).dot(psi[i].col(0))) / (e_new - old.energy);
      p[i](0, 1) = w;
      p[i](1, 0) = -w;
    }
  }
  auto r = assemble_transform(base, Anchor::origin, std::move(x), std::move(u), std::move(du), p, s, {0});
  r.states.energy = e_new;
  r.energies = {e_new == old_state.energy ? old.energy : e_new, old.energy};
  return r;
}

Mat physical_coefficients(const ChannelSystem& base, double energy, const SolverConfig& cfg) {
  if (base.domain != DomainKind::half_line) throw ConfigError("physical_coefficients: half line only");
  const int n = base.channels();
  // Same grid and matching point as regular_continued, so create_bsec sees the same Phi.
  const double xa = right_asymptotic_point(base, cfg);
  auto grid = refine_grid(system_grid(base, cfg.h));
  grid.erase(std::lower_bound(grid.begin(), grid.end(), xa - 1e-12) + 1, grid.end());
  const auto phi = integrate_regular_on(base, energy, grid);
  const Mat p = phi.value(phi.size() - 1), dp = phi.derivative(phi.size() - 1);
  std::vector<int> closed;
  for (int a = 0; a < n; ++a)
    if (energy < base.thresholds[a]) closed.push_back(a);
  if (closed.empty()) return Mat::Identity(n, n);
  Mat g(closed.size(), n);
  for (std::size_t r = 0; r < closed.size(); ++r) {
    const int a = closed[r];
    g.row(r) = std::sqrt(base.thresholds[a] - energy) * p.row(a) + dp.row(a);
  }
  Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullV);
  const int k = n - static_cast<int>(closed.size());
  Mat out = svd.matrixV().rightCols(k);
  for (int j = 0; j < k; ++j) {
    int big = 0;
    out.col(j).cwiseAbs().maxCoeff(&big);
    if (out(big, j) < 0) out.col(j) *= -1.0;
  }
  return out;
}

TailFit classify_tail(const MatrixSolution& psi, const std::vector<double>& thresholds, double energy, double lo,
                      double hi) {
  std::vector<double> lx, xs, la;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double x = psi.x[i];
    if (x < lo || x > hi || x <= 0) continue;
    const Mat v = psi.value(i), d = psi.derivative(i);
    double amp = 0.0;
    for (int a = 0; a < v.rows(); ++a) {
      const double q = std::max(std::abs(energy - thresholds[a]), 1e-12);
      amp += v.row(a).squaredNorm() + d.row(a).squaredNorm() / q;
    }
    lx.push_back(std::log(x));
    xs.push_back(x);
    la.push_back(0.5 * std::log(amp));
  }
  if (xs.size() < 3) throw ConfigError("classify_tail: fit window holds too few nodes");
  TailFit f;
  fit(lx, la, f.loglog_slope, f.loglog_rms);
  fit(xs, la, f.loglin_slope, f.loglin_rms);
  f.kind = f.loglog_rms < f.loglin_rms ? TailKind::power_law : TailKind::exponential;
  return f;
}

TransformResult add_level(const ChannelSystem& base, double energy, const Vec& c, const SolverConfig& cfg) {
  cfg.validate();
  if (base.domain == DomainKind::whole_line) throw ConfigError("add_level: needs a half line or interval");
  const int n = base.channels();
  if (c.size() != n || c.cwiseAbs().maxCoeff() == 0.0) throw ConfigError("add_level: need nonzero weights");
  auto x = refine_grid(system_grid(base, cfg.h));
  const auto phi = regular_continued(base, energy, x, cfg);
  std::vector<Mat> u(x.size()), du(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i] = phi.value(i) * c;
    du[i] = phi.derivative(i) * c;
  }
  auto p = gram_from_origin(x, u, du);
  for (auto& pi : p) pi += Mat::Identity(1, 1);
  auto r = assemble_transform(base, Anchor::origin, std::move(x), std::move(u), std::move(du), p, Mat::Identity(1, 1), {0});
  r.states.energy = energy;
  r.energies = {energy};
  return r;
}

BsecResult create_bsec(const ChannelSystem& base, double energy, const Vec& c, const SolverConfig& cfg,
                       double fit_lo, double fit_hi) {
  cfg.validate();
  if (base.domain != DomainKind::half_line) throw ConfigError("create_bsec: half line only");
  const int n = base.channels();
  if (c.size() != n || c.cwiseAbs().maxCoeff() == 0.0) throw ConfigError("create_bsec: need nonzero weights");
  if (energy < *std::min_element(base.thresholds.begin(), base.thresholds.end()))
    throw ConfigError("create_bsec: energy below every threshold is an ordinary bound state");

  auto x = refine_grid(system_grid(base, cfg.h));
  const auto phi = regular_continued(base, energy, x, cfg);
  std::vector<Mat> u(x.size()), du(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i] = phi.value(i) * c;
    du[i] = phi.derivative(i) * c;
  }
  drop_rounding_growth(base, energy, x, right_asymptotic_point(base, cfg), u, du);
  auto p = gram_from_origin(x, u, du);
  for (auto& pi : p) pi += Mat::Identity(1, 1);
  const double deficit = 1.0 / p.back()(0, 0);
  if (!(deficit < 0.1))
    throw ConstructionError("create_bsec: state not normalizable on the grid (norm deficit " + std::to_string(deficit) +
                            ")");

  BsecResult out;
  out.norm_deficit = deficit;
  out.transform =
      assemble_transform(base, Anchor::origin, std::move(x), std::move(u), std::move(du), p, Mat::Identity(1, 1), {0});
  out.transform.states.energy = energy;
  out.transform.energies = {energy};
  const double hi = base.hi();
  out.tail = classify_tail(out.transform.states, base.thresholds, energy, std::isnan(fit_lo) ? 2.0 * hi / 3.0 : fit_lo,
                           std::isnan(fit_hi) ? hi : fit_hi);
  return out;
}

}  // namespace mcd
