#include "mcd/marchenko.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mcd/errors.hpp"

namespace mcd {

namespace {

Vec kappas(const std::vector<double>& eps, double e) {
  Vec k(eps.size());
  for (std::size_t a = 0; a < eps.size(); ++a) {
    if (!(e < eps[a])) throw ConfigError("creation: level must lie below every threshold");
    k(a) = std::sqrt(eps[a] - e);
  }
  return k;
}

// Linear dependence of weight vectors sharing one energy.
void check_independent(const std::vector<Level>& lv) {
  for (std::size_t i = 0; i < lv.size(); ++i) {
    std::vector<const Vec*> group;
    for (std::size_t j = 0; j < lv.size(); ++j)
      if (lv[j].energy == lv[i].energy) group.push_back(&lv[j].m);
    if (group.size() < 2) continue;
    Mat g(lv[i].m.size(), group.size());
    for (std::size_t j = 0; j < group.size(); ++j) g.col(j) = group[j]->normalized();
    const Vec sv = Eigen::JacobiSVD<Mat>(g).singularValues();
    if (static_cast<long>(group.size()) > g.rows() || sv(sv.size() - 1) < 1e-12 * sv(0))
      throw SingularTransformError("creation: degenerate levels need linearly independent weights",
                                   -std::numeric_limits<double>::infinity());
  }
}

}  // namespace

Reflectionless::Reflectionless(std::vector<double> thresholds, std::vector<Level> levels)
    : eps_(std::move(thresholds)) {
  if (eps_.empty()) throw ConfigError("creation: no channels");
  for (auto& l : levels) {
    if (l.m.size() != channels()) throw ConfigError("creation: weight vector size != channel count");
    if (!l.m.allFinite()) throw ConfigError("creation: non-finite weights");
    if (l.m.cwiseAbs().maxCoeff() == 0.0) continue;
    kappa_.push_back(kappas(eps_, l.energy));
    levels_.push_back(std::move(l));
  }
  degenerate_ = levels_.empty();
  check_independent(levels_);
}

Vec Reflectionless::kappa(std::size_t level) const { return kappa_.at(level); }

Reflectionless::Eval Reflectionless::eval(double x) const {
  const int n = channels();
  const int k = static_cast<int>(levels_.size());
  Eval e{Mat(n, k), Mat(n, k), Mat()};
  for (int j = 0; j < k; ++j)
    for (int a = 0; a < n; ++a) {
      e.u(a, j) = levels_[j].m(a) * std::exp(-kappa_[j](a) * x);
      e.du(a, j) = -kappa_[j](a) * e.u(a, j);
    }
  Mat p = Mat::Identity(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      for (int a = 0; a < n; ++a) p(i, j) += e.u(a, i) * e.u(a, j) / (kappa_[i](a) + kappa_[j](a));
  e.pinv = p.llt().solve(Mat::Identity(k, k));
  return e;
}

Mat Reflectionless::potential(double x) const {
  const int n = channels();
  if (degenerate_) return Mat::Zero(n, n);
  const Eval e = eval(x);
  const Mat y = e.u * e.pinv;
  const Mat g = e.du * y.transpose() + y * e.du.transpose() + y * (e.u.transpose() * e.u) * y.transpose();
  const Mat v = 2.0 * g;
  return 0.5 * (v + v.transpose());
}

Mat Reflectionless::states(double x) const {
  if (degenerate_) return Mat(channels(), 0);
  const Eval e = eval(x);
  return e.u * e.pinv;
}

Mat Reflectionless::state_derivatives(double x) const {
  if (degenerate_) return Mat(channels(), 0);
  const Eval e = eval(x);
  return e.du * e.pinv + e.u * e.pinv * (e.u.transpose() * e.u) * e.pinv;
}

ChannelSystem Reflectionless::system(double x_max) const {
  std::vector<double> params = eps_;
  for (const auto& l : levels_) {
    params.push_back(l.energy);
    params.insert(params.end(), l.m.data(), l.m.data() + l.m.size());
  }
  const Reflectionless self = *this;
  return ChannelSystem(eps_, DomainKind::whole_line, x_max,
                       PotentialMatrix::closed_form("reflectionless", std::move(params), channels(),
                                                    [self](double x) { return self.potential(x); }));
}

Reflectionless create_reflectionless(const std::vector<double>& thresholds, double e_b, const Vec& m) {
  return Reflectionless(thresholds, {Level{e_b, m}});
}

Reflectionless create_two_states(const std::vector<double>& thresholds, const Level& a, const Level& b) {
  return Reflectionless(thresholds, {a, b});
}

AnomalyReport asymptotic_anomaly_report(const Reflectionless& r, double x_max) {
  if (r.levels().size() != 1) throw ConfigError("anomaly report: needs exactly one created level");
  const int n = r.channels();
  const Vec k = r.kappa(0);
  AnomalyReport rep;
  rep.natural = k;
  rep.expected = Vec::Constant(n, 2.0 * k.maxCoeff()) - k;
  rep.fitted = Vec::Zero(n);
  rep.anomalous.assign(n, false);

  // Least-squares slope of log|psi_a| against x.
  const int samples = 400;
  const double a0 = -x_max, a1 = -x_max / 3.0;
  for (int c = 0; c < n; ++c) {
    if (r.levels()[0].m(c) == 0.0) continue;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < samples; ++i) {
      const double x = a0 + (a1 - a0) * i / (samples - 1.0);
      const double y = std::log(std::abs(r.states(x)(c, 0)));
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    rep.fitted(c) = (samples * sxy - sx * sy) / (samples * sxx - sx * sx);
    rep.anomalous[c] = std::abs(rep.fitted(c) - k(c)) > 0.02 * k(c);
  }
  return rep;
}

EffectiveChannel::EffectiveChannel(std::vector<double> thresholds, double e_b, const Vec& m)
    : r_(thresholds, {Level{e_b, m}}), e_b_(e_b) {
  if (r_.channels() != 2) throw ConfigError("effective channel: needs two channels");
  if (m(0) == 0.0) throw ConfigError("effective channel: M1 = 0 leaves the channel ratio undefined");
  const Vec k = r_.kappa(0);
  k1_ = k(0);
  k2_ = k(1);
  ratio_ = m(1) / m(0);
}

double EffectiveChannel::potential(double x) const {
  const Mat v = r_.potential(x);
  return v(0, 0) + v(0, 1) * ratio_ * std::exp((k1_ - k2_) * x);
}

double EffectiveChannel::psi(double x) const { return r_.states(x)(0, 0); }
double EffectiveChannel::dpsi(double x) const { return r_.state_derivatives(x)(0, 0); }
double EffectiveChannel::left_asymptote() const { return 4.0 * k2_ * (k2_ - k1_); }

EffectiveChannel effective_one_channel(const std::vector<double>& thresholds, double e_b, const Vec& m) {
  return EffectiveChannel(thresholds, e_b, m);
}

TransformResult add_bound_state(const ChannelSystem& base, double e_b, const Vec& m, const SolverConfig& cfg) {
  cfg.validate();
  if (base.domain != DomainKind::whole_line)
    throw ConfigError("add_bound_state: whole-line backgrounds only (on the half line S would change)");
  const int n = base.channels();
  if (m.size() != n) throw ConfigError("add_bound_state: weight vector size != channel count");
  const Vec k = kappas(base.thresholds, e_b);

  auto x = refine_grid(system_grid(base, cfg.h));
  const auto f = integrate_jost_on(base, e_b, x, cfg);
  std::vector<Mat> u(x.size()), du(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    u[i] = f.value(i) * m;
    du[i] = f.derivative(i) * m;
  }
  std::vector<Vec> kap{k};
  auto p = gram_tail(x, u, du, kap);
  for (auto& pi : p) pi += Mat::Identity(1, 1);
  auto r = assemble_transform(base, Anchor::infinity, std::move(x), std::move(u), std::move(du), p,
                              Mat::Identity(1, 1), {0}, kap);
  r.states.energy = e_b;
  return r;
}

TransformResult change_asymptotic_weights(const ChannelSystem& base, const BoundState& old_state, const Vec& m_new,
                                          const SolverConfig& cfg) {
  cfg.validate();
  if (base.domain == DomainKind::interval) throw ConfigError("change_asymptotic_weights: no asymptotics on an interval");
  const int n = base.channels();
  if (m_new.size() != n) throw ConfigError("change_asymptotic_weights: weight vector size != channel count");
  auto x = refine_grid(system_grid(base, cfg.h));
  const BoundState old = refine_bound_state(base, old_state.energy, x, cfg);
  const Vec m0 = old.m->weights;
  const Vec k = old.kappa;

  // The component along the old weights is the old state itself.
  const double lam = m_new.dot(m0) / m0.squaredNorm();
  const Vec perp = m_new - lam * m0;
  const auto f = integrate_jost_on(base, old.energy, x, cfg);
  std::vector<Mat> u(x.size(), Mat(n, 2)), du(x.size(), Mat(n, 2)), psi(x.size()), dpsi(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    psi[i] = old.psi.value(i);
    dpsi[i] = old.psi.derivative(i);
    u[i].col(0) = lam * psi[i] + f.value(i) * perp;
    du[i].col(0) = lam * dpsi[i] + f.derivative(i) * perp;
    u[i].col(1) = psi[i];
    du[i].col(1) = dpsi[i];
  }
  Mat s = Mat::Identity(2, 2);
  s(1, 1) = -1.0;
  const std::vector<Vec> kap{k, k};
  const auto j = gram_tail(x, u, du, kap);
  // 1 - int_x^inf psi0^2 accumulated from the left end, where it is small.
  auto head = gram_from_origin(x, psi, dpsi);
  double left = 0.0;
  if (base.domain == DomainKind::whole_line) {
    const Mat p0 = psi.front();
    for (int a = 0; a < n; ++a) left += p0(a, 0) * p0(a, 0) / (2.0 * k(a));
  }
  std::vector<Mat> p(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    p[i] = Mat::Identity(2, 2) + s * j[i];
    p[i](1, 1) = head[i](0, 0) + left;
  }
  auto r = assemble_transform(base, Anchor::infinity, std::move(x), std::move(u), std::move(du), p, s, {0}, kap);
  r.states.energy = old.energy;
  return r;
}

std::vector<Block> potential_blocks(const std::function<Mat(double)>& v, double lo, double hi, double step,
                                    double cut) {
  const std::size_t m = static_cast<std::size_t>(std::ceil((hi - lo) / step)) + 1;
  std::vector<double> xs(m), f(m);
  for (std::size_t i = 0; i < m; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(m - 1);
    f[i] = v(xs[i]).norm();
  }
  std::vector<std::size_t> cuts{0};
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (!(f[i] <= f[i - 1] && f[i] < f[i + 1])) continue;
    const double left = *std::max_element(f.begin() + cuts.back(), f.begin() + i + 1);
    const double right = *std::max_element(f.begin() + i, f.end());
    if (f[i] < cut * std::min(left, right)) cuts.push_back(i);
  }
  cuts.push_back(m - 1);

  double total = 0.0;
  for (std::size_t i = 1; i < m; ++i) total += 0.5 * (xs[i] - xs[i - 1]) * (f[i] + f[i - 1]);
  std::vector<Block> out;
  for (std::size_t b = 0; b + 1 < cuts.size(); ++b) {
    Block blk;
    blk.lo = xs[cuts[b]];
    blk.hi = xs[cuts[b + 1]];
    double mom = 0.0;
    for (std::size_t i = cuts[b] + 1; i <= cuts[b + 1]; ++i) {
      const double h = xs[i] - xs[i - 1];
      blk.weight += 0.5 * h * (f[i] + f[i - 1]);
      mom += 0.5 * h * (xs[i] * f[i] + xs[i - 1] * f[i - 1]);
    }
    if (blk.weight <= 1e-6 * total) continue;
    blk.centroid = mom / blk.weight;
    out.push_back(blk);
  }
  return out;
}

}  // namespace mcd
