#include "mcd/engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "engine_internal.hpp"

namespace mcd {

void SolverConfig::validate() const {
  if (!(h > 0)) throw ConfigError("solver: step h must be positive");
  if (!(matching_tolerance > 0)) throw ConfigError("solver: matching tolerance must be positive");
  if (!(bracket_resolution > 0)) throw ConfigError("solver: bracket resolution must be positive");
  if (!(decay_tolerance > 0)) throw ConfigError("solver: decay tolerance must be positive");
  if (!(threshold_offset >= 0)) throw ConfigError("solver: threshold offset must be nonnegative");
  if (qr_interval < 1) throw ConfigError("solver: qr interval must be at least 1");
  if (!(seed_tolerance > 0)) throw ConfigError("solver: seed tolerance must be positive");
}

std::vector<double> system_grid(const ChannelSystem& sys, double h) {
  return make_grid(sys.lo(), sys.hi(), h, sys.potential.breakpoints(sys.lo(), sys.hi()));
}

namespace detail {

namespace {

std::size_t right_node(const Discretization& d, const SolverConfig& cfg) {
  const std::size_t last = d.size() - 1;
  if (!std::isnan(cfg.x_match)) {
    const ChannelSystem& s = d.system();
    if (cfg.x_match < s.lo() || cfg.x_match > s.hi()) throw ConfigError("solver: x_match outside the domain");
    const std::size_t i = d.locate(cfg.x_match);
    if (d.tail_size_right(i) >= cfg.decay_tolerance) {
      std::ostringstream os;
      os << "potential not decayed beyond x_match = " << cfg.x_match << " (|V| = " << d.tail_size_right(i) << ")";
      throw ConfigError(os.str());
    }
    return i;
  }
  if (d.tail_size_right(last) >= cfg.decay_tolerance)
    throw ConfigError("potential not decayed at the right edge of the domain; increase x_max");
  std::size_t lo = 0, hi = last;  // tail_size_right is nonincreasing
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (d.tail_size_right(mid) < cfg.decay_tolerance)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

std::size_t left_node(const Discretization& d, const SolverConfig& cfg) {
  if (d.tail_size_left(0) >= cfg.decay_tolerance)
    throw ConfigError("potential not decayed at the left edge of the domain; increase x_max");
  std::size_t lo = 0, hi = d.size() - 1;  // tail_size_left is nondecreasing
  while (lo < hi) {
    const std::size_t mid = (lo + hi + 1) / 2;
    if (d.tail_size_left(mid) < cfg.decay_tolerance)
      lo = mid;
    else
      hi = mid - 1;
  }
  return lo;
}

std::size_t centroid_node(const Discretization& d, std::size_t a, std::size_t b) {
  const auto& g = d.grid();
  double w = 0.0, wx = 0.0;
  for (std::size_t i = a; i <= b; ++i) {
    const double span = 0.5 * (g[std::min(i + 1, b)] - g[i > a ? i - 1 : a]);
    double rho = d.v_right(i).norm() * span;
    if (const Mat* dl = d.delta(i)) rho += dl->norm();
    w += rho;
    wx += rho * g[i];
  }
  const double xc = w > 0 ? wx / w : 0.5 * (g[a] + g[b]);
  return std::clamp(d.locate(xc), a + 1, b - 1);
}

}  // namespace

Context::Context(const ChannelSystem& s, const SolverConfig& c) : Context(s, c, system_grid(s, c.h)) {}

Context::Context(const ChannelSystem& s, const SolverConfig& c, std::vector<double> grid)
    : sys(&s), cfg(c), d(s, std::move(grid)) {
  s.validate();
  cfg.validate();
  const std::size_t last = d.size() - 1;
  if (last < 4) throw ConfigError("solver: grid too coarse");
  switch (s.domain) {
    case DomainKind::interval:
      i_la = 0;
      i_a = last;
      break;
    case DomainKind::half_line:
      i_la = 0;
      i_a = std::max<std::size_t>(right_node(d, cfg), 2);
      break;
    case DomainKind::whole_line: {
      i_a = right_node(d, cfg);
      i_la = left_node(d, cfg);
      if (i_la > i_a) {  // nothing in between; centre on the origin
        i_la = i_a = std::clamp<std::size_t>(d.locate(0.0), 1, last - 1);
      }
      if (i_a - i_la < 2) {
        i_la = i_la > 0 ? i_la - 1 : 0;
        i_a = std::min(last, i_la + 2);
      }
      break;
    }
  }
  i_m = centroid_node(d, i_la, i_a);
}

std::vector<bool> open_mask(const ChannelSystem& sys, double energy) {
  std::vector<bool> open(sys.thresholds.size());
  for (std::size_t a = 0; a < open.size(); ++a) open[a] = energy > sys.thresholds[a];
  return open;
}

void check_threshold_distance(const ChannelSystem& sys, double energy, double tol) {
  for (double t : sys.thresholds) {
    if (std::abs(energy - t) < tol) {
      std::ostringstream os;
      os << "energy " << energy << " within " << tol << " of threshold " << t;
      throw ThresholdError(os.str());
    }
  }
}

MatrixSolution to_solution(const Trajectory<double>& tr, const Discretization& d, double energy,
                           MatrixSolution::Kind kind) {
  const int n = d.channels();
  MatrixSolution out(energy, kind, n, tr.cols);
  const std::size_t m = tr.steps();
  out.reserve(m);
  const bool forward = tr.to >= tr.from;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t s = forward ? k : m - 1 - k;
    const std::size_t node = forward ? tr.from + s : tr.from - s;
    const PMat<double> y = tr.state(s);
    out.push(d.grid()[node], y.topRows(n), y.bottomRows(n));
  }
  return out;
}

Matching match(const Context& c, double energy, bool store) {
  const ChannelSystem& s = *c.sys;
  const int n = s.channels();
  PMat<double> yl = PMat<double>::Zero(2 * n, n);
  PMat<double> yr = PMat<double>::Zero(2 * n, n);
  if (s.domain == DomainKind::interval) {
    yl.bottomRows(n).setIdentity();
    yr.bottomRows(n).setIdentity();
  } else {
    for (int a = 0; a < n; ++a) {
      if (!(s.thresholds[a] > energy)) throw ThresholdError("matching: energy not below every threshold");
      const double kap = std::sqrt(s.thresholds[a] - energy);
      yr(a, a) = 1.0;
      yr(n + a, a) = -kap;
      if (s.domain == DomainKind::whole_line) {
        yl(a, a) = 1.0;
        yl(n + a, a) = kap;
      } else {
        yl(n + a, a) = 1.0;
      }
    }
  }
  Matching out;
  out.left = propagate<double>(c.d, energy, c.i_la, c.i_m, yl, c.cfg.qr_interval, store);
  out.right = propagate<double>(c.d, energy, c.i_a, c.i_m, yr, c.cfg.qr_interval, store);
  PMat<double> ql, qr;
  positive_qr<double>(out.left.final_state, ql, out.r_left);
  positive_qr<double>(out.right.final_state, qr, out.r_right);
  out.m.resize(2 * n, 2 * n);
  out.m.leftCols(n) = ql;
  out.m.rightCols(n) = qr;
  return out;
}

}  // namespace detail

double right_asymptotic_point(const ChannelSystem& sys, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  return c.x(c.i_a);
}

double left_asymptotic_point(const ChannelSystem& sys, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  return c.x(c.i_la);
}

MatrixSolution integrate_regular(const ChannelSystem& sys, double energy, const SolverConfig& cfg) {
  cfg.validate();
  return integrate_regular_on(sys, energy, system_grid(sys, cfg.h));
}

MatrixSolution integrate_regular_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid) {
  if (sys.domain == DomainKind::whole_line) throw ConfigError("integrate_regular: needs a half-line system");
  const int n = sys.channels();
  Mat psi0 = Mat::Zero(n, n);
  Mat dpsi0 = Mat::Identity(n, n);
  MatrixSolution out = integrate_initial_value(sys, energy, psi0, dpsi0, grid);
  out.kind = MatrixSolution::Kind::regular;
  return out;
}

MatrixSolution integrate_initial_value(const ChannelSystem& sys, double energy, const Mat& psi0, const Mat& dpsi0,
                                       const std::vector<double>& grid) {
  sys.validate();
  const int n = sys.channels();
  if (psi0.rows() != n || dpsi0.rows() != n || psi0.cols() != dpsi0.cols())
    throw ConfigError("initial value: data must be N x k");
  const Discretization d(sys, grid);
  PMat<double> y0(2 * n, psi0.cols());
  y0.topRows(n) = psi0;
  y0.bottomRows(n) = dpsi0;
  const auto tr = propagate<double>(d, energy, 0, d.size() - 1, y0, 0, true);
  return detail::to_solution(tr, d, energy, MatrixSolution::Kind::general);
}

MatrixSolution integrate_jost(const ChannelSystem& sys, double energy, const SolverConfig& cfg) {
  cfg.validate();
  return integrate_jost_on(sys, energy, system_grid(sys, cfg.h), cfg);
}

MatrixSolution integrate_jost_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                 const SolverConfig& cfg) {
  if (sys.domain == DomainKind::interval) throw ConfigError("integrate_jost: no asymptotic region on an interval");
  const detail::Context c(sys, cfg, grid);
  const int n = sys.channels();
  Vec kap(n);
  for (int a = 0; a < n; ++a) {
    if (!(sys.thresholds[a] > energy))
      throw ConfigError("integrate_jost: energy above a threshold; use scattering_solution");
    kap(a) = std::sqrt(sys.thresholds[a] - energy);
  }
  const double xa = c.x(c.i_a);
  PMat<double> y0 = PMat<double>::Zero(2 * n, n);
  for (int a = 0; a < n; ++a) {
    y0(a, a) = std::exp(-kap(a) * xa);
    y0(n + a, a) = -kap(a) * y0(a, a);
  }
  const auto tr = propagate<double>(c.d, energy, c.i_a, 0, y0, 0, true);
  MatrixSolution out = detail::to_solution(tr, c.d, energy, MatrixSolution::Kind::jost);
  for (std::size_t i = c.i_a + 1; i < c.d.size(); ++i) {
    const double x = c.x(i);
    Mat v = Mat::Zero(n, n), dv = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      v(a, a) = std::exp(-kap(a) * x);
      dv(a, a) = -kap(a) * v(a, a);
    }
    out.push(x, v, dv);
  }
  return out;
}

MatrixSolution integrate_left_jost_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                      const SolverConfig& cfg) {
  if (sys.domain != DomainKind::whole_line) throw ConfigError("integrate_left_jost: needs a whole-line system");
  const detail::Context c(sys, cfg, grid);
  const int n = sys.channels();
  Vec kap(n);
  for (int a = 0; a < n; ++a) {
    if (!(sys.thresholds[a] > energy))
      throw ConfigError("integrate_left_jost: energy above a threshold; use scattering_solution");
    kap(a) = std::sqrt(sys.thresholds[a] - energy);
  }
  auto free = [&](double x, Mat& v, Mat& dv) {
    v = Mat::Zero(n, n);
    dv = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a) {
      v(a, a) = std::exp(kap(a) * x);
      dv(a, a) = kap(a) * v(a, a);
    }
  };
  Mat v, dv;
  free(c.x(c.i_la), v, dv);
  PMat<double> y0(2 * n, n);
  y0.topRows(n) = v;
  y0.bottomRows(n) = dv;
  const auto tr = propagate<double>(c.d, energy, c.i_la, c.d.size() - 1, y0, 0, true);
  const MatrixSolution inner = detail::to_solution(tr, c.d, energy, MatrixSolution::Kind::left_jost);
  MatrixSolution out(energy, MatrixSolution::Kind::left_jost, n, n);
  out.reserve(c.d.size());
  for (std::size_t i = 0; i < c.i_la; ++i) {
    free(c.x(i), v, dv);
    out.push(c.x(i), v, dv);
  }
  for (std::size_t i = 0; i < inner.size(); ++i) out.push(inner.x[i], inner.value(i), inner.derivative(i));
  return out;
}

}  // namespace mcd
