#include <algorithm>
#include <cmath>

#include <boost/math/tools/roots.hpp>

#include "engine_internal.hpp"

namespace mcd {

namespace {

struct Sample {
  double det = 0.0;
  double smin = 0.0;  // smallest singular value relative to the largest
};

Sample sample(const detail::Context& c, double e) {
  const auto mt = detail::match(c, e, false);
  Eigen::JacobiSVD<Mat> svd(mt.m);
  const Vec sv = svd.singularValues();
  return {mt.m.partialPivLu().determinant(), sv(sv.size() - 1) / sv(0)};
}

// Golden section on a possibly V-shaped function; Brent's parabolic steps gain
// nothing there and the library version stops near sqrt(eps).
template <class F>
double golden_min(F f, double a, double b, double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

double refine_root(const detail::Context& c, double a, double b, double fa, double fb) {
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve([&](double e) { return sample(c, e).det; }, a, b, fa, fb,
                                                   boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

Vec decay_constants(const ChannelSystem& s, double e) {
  if (s.domain == DomainKind::interval) return Vec();
  Vec k(s.channels());
  for (int a = 0; a < s.channels(); ++a) k(a) = std::sqrt(s.thresholds[a] - e);
  return k;
}

MatrixSolution assemble(const detail::Context& c, const detail::Matching& mt, const Vec& null, double e,
                        const Vec& kap) {
  const int n = c.sys->channels();
  const PMat<double> cl = mt.r_left.triangularView<Eigen::Upper>().solve(PMat<double>(null.head(n)));
  const PMat<double> cr = mt.r_right.triangularView<Eigen::Upper>().solve(PMat<double>(-null.tail(n)));
  const auto left = backtrack<double>(mt.left, cl);
  const auto right = backtrack<double>(mt.right, cr);

  MatrixSolution out(e, MatrixSolution::Kind::bound, n, 1);
  out.reserve(c.d.size());
  Mat v(n, 1), dv(n, 1);
  const double xla = c.x(c.i_la), xa = c.x(c.i_a);
  for (std::size_t i = 0; i < c.d.size(); ++i) {
    const double x = c.x(i);
    if (i < c.i_la) {
      for (int a = 0; a < n; ++a) {
        v(a, 0) = left[0](a) * std::exp(kap(a) * (x - xla));
        dv(a, 0) = kap(a) * v(a, 0);
      }
    } else if (i <= c.i_m) {
      v = left[i - c.i_la].head(n);
      dv = left[i - c.i_la].tail(n);
    } else if (i <= c.i_a) {
      v = right[c.i_a - i].head(n);
      dv = right[c.i_a - i].tail(n);
    } else {
      for (int a = 0; a < n; ++a) {
        v(a, 0) = right[0](a) * std::exp(-kap(a) * (x - xa));
        dv(a, 0) = -kap(a) * v(a, 0);
      }
    }
    out.push(x, v, dv);
  }
  return out;
}

void scale(MatrixSolution& s, double f) {
  for (double& v : s.val) v *= f;
  for (double& v : s.der) v *= f;
}

void axpy(MatrixSolution& y, double a, const MatrixSolution& x) {
  for (std::size_t i = 0; i < y.val.size(); ++i) {
    y.val[i] += a * x.val[i];
    y.der[i] += a * x.der[i];
  }
}

std::vector<BoundState> states_at(const detail::Context& c, double e) {
  const ChannelSystem& s = *c.sys;
  const int n = s.channels();
  const auto mt = detail::match(c, e, true);
  Eigen::JacobiSVD<Mat> svd(mt.m, Eigen::ComputeFullV);
  const Vec sv = svd.singularValues();
  int rank_def = 0;
  for (int j = 0; j < sv.size(); ++j)
    if (sv(j) < c.cfg.matching_tolerance * sv(0)) ++rank_def;
  rank_def = std::max(rank_def, 1);

  const Vec kap = decay_constants(s, e);
  std::vector<BoundState> out;
  for (int j = 0; j < rank_def; ++j) {
    BoundState b;
    b.energy = e;
    b.domain = s.domain;
    b.kappa = kap;
    b.multiplicity = rank_def;
    b.psi = assemble(c, mt, svd.matrixV().col(2 * n - 1 - j), e, kap);
    for (const auto& prev : out) axpy(b.psi, -overlap(prev, b), prev.psi);
    scale(b.psi, 1.0 / std::sqrt(overlap(b, b)));
    out.push_back(std::move(b));
  }

  for (auto& b : out) {
    Vec cw(n), mw(n);
    const Mat d0 = b.psi.derivative(0);
    const Mat va = b.psi.value(c.i_a);
    for (int a = 0; a < n; ++a) {
      cw(a) = d0(a, 0);
      mw(a) = s.domain == DomainKind::interval ? 0.0 : va(a, 0) * std::exp(kap(a) * c.x(c.i_a));
    }
    // Fix the overall sign so the dominant weight is positive.
    const Vec& ref = s.domain == DomainKind::whole_line ? mw : cw;
    int big = 0;
    ref.cwiseAbs().maxCoeff(&big);
    if (ref(big) < 0) {
      scale(b.psi, -1.0);
      cw = -cw;
      mw = -mw;
    }
    if (s.domain != DomainKind::whole_line) b.c = SpectralDatum::make(s.thresholds, e, WeightKind::C, cw);
    if (s.domain != DomainKind::interval) b.m = SpectralDatum::make(s.thresholds, e, WeightKind::M, mw);
  }
  return out;
}

}  // namespace

MatchingValue matching_function(const ChannelSystem& sys, double energy, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  const auto mt = detail::match(c, energy, false);
  Eigen::JacobiSVD<Mat> svd(mt.m);
  return {mt.m.partialPivLu().determinant(), svd.singularValues()};
}

namespace {

std::vector<BoundState> search(const detail::Context& c, double e_lo, double e_hi);

}  // namespace

std::vector<BoundState> find_bound_states(const ChannelSystem& sys, double e_lo, double e_hi,
                                          const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  return search(c, e_lo, e_hi);
}

std::vector<BoundState> find_bound_states_on(const ChannelSystem& sys, double e_lo, double e_hi,
                                             const std::vector<double>& grid, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg, grid);
  return search(c, e_lo, e_hi);
}

namespace {

std::vector<BoundState> search(const detail::Context& c, double e_lo, double e_hi) {
  const ChannelSystem& sys = *c.sys;
  const SolverConfig& cfg = c.cfg;
  if (sys.domain != DomainKind::interval) {
    const double floor = *std::min_element(sys.thresholds.begin(), sys.thresholds.end());
    e_hi = std::min(e_hi, floor - cfg.threshold_offset);
  }
  if (!(e_hi > e_lo)) return {};

  const long steps = std::max(2L, static_cast<long>(std::ceil((e_hi - e_lo) / cfg.bracket_resolution)));
  std::vector<double> es(steps + 1);
  std::vector<Sample> fs(steps + 1);
  for (long i = 0; i <= steps; ++i) {
    es[i] = e_lo + (e_hi - e_lo) * static_cast<double>(i) / static_cast<double>(steps);
    fs[i] = sample(c, es[i]);
  }

  std::vector<double> roots;
  auto sign_change = [&](long i) { return fs[i].det * fs[i + 1].det < 0; };
  for (long i = 0; i <= steps; ++i) {
    if (fs[i].det == 0.0) roots.push_back(es[i]);
    if (i < steps && sign_change(i)) roots.push_back(refine_root(c, es[i], es[i + 1], fs[i].det, fs[i + 1].det));
  }
  // Tangential zeros (even multiplicity, e.g. degenerate pairs) and pairs of close
  // roots hiding between two samples show up as dips of the smallest singular value.
  for (long i = 1; i < steps; ++i) {
    if (!(fs[i].smin <= fs[i - 1].smin && fs[i].smin <= fs[i + 1].smin)) continue;
    if (sign_change(i - 1) || sign_change(i)) continue;
    const double tol = 1e-13 * std::max(1.0, std::abs(es[i]));
    const double e = golden_min([&](double x) { return sample(c, x).smin; }, es[i - 1], es[i + 1], tol);
    const Sample f = sample(c, e);
    if (f.smin < cfg.matching_tolerance) {
      roots.push_back(e);
    } else if (f.det * fs[i - 1].det < 0) {
      roots.push_back(refine_root(c, es[i - 1], e, fs[i - 1].det, f.det));
      roots.push_back(refine_root(c, e, es[i + 1], f.det, fs[i + 1].det));
    }
  }
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](double a, double b) { return std::abs(a - b) < 1e-10 * std::max(1.0, std::abs(a)); }),
              roots.end());

  std::vector<BoundState> out;
  for (double e : roots) {
    auto st = states_at(c, e);
    for (auto& s : st) out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

BoundState refine_bound_state(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                              const SolverConfig& cfg) {
  for (double w = 1e-5 * std::max(1.0, std::abs(energy)); w < 1e-1 * std::max(1.0, std::abs(energy)); w *= 10) {
    SolverConfig local = cfg;
    local.bracket_resolution = w / 10;
    detail::Context lc(sys, local, grid);
    auto st = search(lc, energy - w, energy + w);
    if (st.empty()) continue;
    std::size_t best = 0;
    for (std::size_t i = 1; i < st.size(); ++i)
      if (std::abs(st[i].energy - energy) < std::abs(st[best].energy - energy)) best = i;
    return std::move(st[best]);
  }
  throw ConfigError("refine_bound_state: no level near the given energy");
}

double overlap(const BoundState& a, const BoundState& b) {
  const MatrixSolution& p = a.psi;
  const MatrixSolution& q = b.psi;
  if (p.size() != q.size() || p.rows != q.rows) throw ConfigError("overlap: states sampled on different grids");
  const int n = p.rows;
  auto f = [&](std::size_t i) { return (p.value(i).transpose() * q.value(i))(0, 0); };
  auto df = [&](std::size_t i) {
    return (p.derivative(i).transpose() * q.value(i) + p.value(i).transpose() * q.derivative(i))(0, 0);
  };
  double sum = 0.0;
  double f0 = f(0), d0 = df(0);
  for (std::size_t i = 1; i < p.size(); ++i) {
    const double f1 = f(i), d1 = df(i);
    const double h = p.x[i] - p.x[i - 1];
    sum += 0.5 * h * (f0 + f1) + h * h / 12.0 * (d0 - d1);
    f0 = f1;
    d0 = d1;
  }
  if (a.kappa.size() == n && b.kappa.size() == n) {
    const Mat pr = p.value(p.size() - 1), qr = q.value(q.size() - 1);
    for (int c = 0; c < n; ++c) sum += pr(c, 0) * qr(c, 0) / (a.kappa(c) + b.kappa(c));
    if (a.domain == DomainKind::whole_line) {
      const Mat pl = p.value(0), ql = q.value(0);
      for (int c = 0; c < n; ++c) sum += pl(c, 0) * ql(c, 0) / (a.kappa(c) + b.kappa(c));
    }
  }
  return sum;
}

double orthonormality_check(const std::vector<BoundState>& states) {
  double worst = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i; j < states.size(); ++j)
      worst = std::max(worst, std::abs(overlap(states[i], states[j]) - (i == j ? 1.0 : 0.0)));
  return worst;
}

}  // namespace mcd
