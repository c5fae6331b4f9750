#include "mcd/bands.hpp"

#include <algorithm>
#include <cmath>

#include "mcd/errors.hpp"

namespace mcd {

namespace {

// sin(ka)/k and cos(ka) for k^2 = q, continued to sinh/cosh for q < 0.
double sinc_a(double q, double a) {
  const double k = std::sqrt(std::abs(q));
  if (k * a < 1e-4) return a * (1.0 - q * a * a / 6.0);
  return q >= 0 ? std::sin(k * a) / k : std::sinh(k * a) / k;
}

double cos_a(double q, double a) {
  const double k = std::sqrt(std::abs(q));
  return q >= 0 ? std::cos(k * a) : std::cosh(k * a);
}

std::vector<Zone> zones_of(const std::vector<double>& e, const std::vector<char>& ok, auto&& allowed_at) {
  std::vector<Zone> out;
  auto edge = [&](double lo, double hi, bool lo_ok) {
    for (int it = 0; it < 60 && hi - lo > 1e-8; ++it) {
      const double mid = 0.5 * (lo + hi);
      (allowed_at(mid) == lo_ok ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double start = 0.0;
  bool open = false;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (i == 0) {
      open = ok[0];
      start = e[0];
      continue;
    }
    if (ok[i] == ok[i - 1]) continue;
    const double x = edge(e[i - 1], e[i], ok[i - 1]);
    if (ok[i]) {
      start = x;
      open = true;
    } else {
      out.push_back({start, x});
      open = false;
    }
  }
  if (open) out.push_back({start, e.back()});
  return out;
}

std::vector<Zone> merge(std::vector<Zone> z) {
  std::sort(z.begin(), z.end(), [](const Zone& a, const Zone& b) { return a.lo < b.lo; });
  std::vector<Zone> out;
  for (const auto& r : z) {
    if (!out.empty() && r.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, r.hi);
    else
      out.push_back(r);
  }
  return out;
}

std::vector<Zone> intersect(const std::vector<Zone>& a, const std::vector<Zone>& b) {
  std::vector<Zone> out;
  for (const auto& x : a)
    for (const auto& y : b) {
      const double lo = std::max(x.lo, y.lo), hi = std::min(x.hi, y.hi);
      if (hi > lo) out.push_back({lo, hi});
    }
  return merge(out);
}

}  // namespace

void CombSpec::validate() const {
  if (!(period > 0)) throw ConfigError("comb: period must be positive");
  const auto n = static_cast<Eigen::Index>(thresholds.size());
  if (strength.rows() != n || strength.cols() != n) throw ConfigError("comb: strength must be N x N");
  if ((strength - strength.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + strength.cwiseAbs().maxCoeff()))
    throw ConfigError("comb: strength must be symmetric");
}

ChannelSystem CombSpec::system(int cells) const {
  validate();
  if (cells < 1) throw ConfigError("comb: need at least one cell");
  return ChannelSystem(thresholds, DomainKind::half_line, cells * period,
                       PotentialMatrix::comb(period, strength, 0.0, 1, cells));
}

double band_uncoupled(double v, double eps, double a, double energy) {
  const double q = energy - eps;
  return 0.5 * v * sinc_a(q, a) + cos_a(q, a);
}

std::array<std::complex<double>, 2> band_coupled(const CombSpec& spec, double energy) {
  spec.validate();
  if (spec.thresholds.size() != 2) throw ConfigError("band_coupled: needs two channels");
  const double a = spec.period;
  const double c1 = band_uncoupled(spec.strength(0, 0), spec.thresholds[0], a, energy);
  const double c2 = band_uncoupled(spec.strength(1, 1), spec.thresholds[1], a, energy);
  const double w = spec.strength(0, 1);
  const double disc = (c1 - c2) * (c1 - c2) +
                      w * w * sinc_a(energy - spec.thresholds[0], a) * sinc_a(energy - spec.thresholds[1], a);
  const std::complex<double> root = std::sqrt(std::complex<double>(disc, 0.0));
  const double mean = c1 + c2;
  return {0.5 * (mean + root), 0.5 * (mean - root)};
}

bool is_allowed(std::complex<double> c) { return c.imag() == 0.0 && std::abs(c.real()) <= 1.0; }

BandDiagram scan_zones(const CombSpec& spec, double e_lo, double e_hi, int samples) {
  spec.validate();
  if (spec.thresholds.size() != 2) throw ConfigError("scan_zones: needs two channels");
  if (!(e_hi > e_lo) || samples < 2) throw ConfigError("scan_zones: bad energy range");
  BandDiagram d;
  d.energy.resize(samples);
  for (int i = 0; i < samples; ++i) d.energy[i] = e_lo + (e_hi - e_lo) * i / (samples - 1);
  std::array<std::vector<char>, 2> ok_c, ok_u;
  for (double e : d.energy) {
    const auto c = band_coupled(spec, e);
    std::array<double, 2> u{};
    for (int b = 0; b < 2; ++b) {
      u[b] = band_uncoupled(spec.strength(b, b), spec.thresholds[b], spec.period, e);
      ok_c[b].push_back(is_allowed(c[b]));
      ok_u[b].push_back(std::abs(u[b]) <= 1.0);
    }
    d.coupled.push_back(c);
    d.uncoupled.push_back(u);
  }
  for (int b = 0; b < 2; ++b) {
    d.allowed[b] = zones_of(d.energy, ok_c[b], [&](double e) { return is_allowed(band_coupled(spec, e)[b]); });
    d.uncoupled_allowed[b] = zones_of(d.energy, ok_u[b], [&](double e) {
      return std::abs(band_uncoupled(spec.strength(b, b), spec.thresholds[b], spec.period, e)) <= 1.0;
    });
  }
  std::vector<Zone> all = d.allowed[0];
  all.insert(all.end(), d.allowed[1].begin(), d.allowed[1].end());
  d.coupled_union = merge(all);
  d.uncoupled_intersection = intersect(d.uncoupled_allowed[0], d.uncoupled_allowed[1]);
  return d;
}

BlochGrowth bloch_growth_factor(const ChannelSystem& block, double energy, const SolverConfig& cfg) {
  cfg.validate();
  if (block.domain != DomainKind::interval) throw ConfigError("bloch_growth_factor: needs an interval block");
  BlochGrowth g;
  g.state = refine_bound_state(block, energy, refine_grid(system_grid(block, cfg.h)), cfg);
  if (std::abs(g.state.energy - energy) > 1e-6 * std::max(1.0, std::abs(energy)))
    throw ConfigError("bloch_growth_factor: energy is not a level of the block");
  g.energy = g.state.energy;
  const auto& psi = g.state.psi;
  const Vec d0 = psi.derivative(0).col(0), d1 = psi.derivative(psi.size() - 1).col(0);
  if (psi.value(psi.size() - 1).norm() > 1e-6 * d1.norm())
    throw ConstructionError("bloch_growth_factor: state does not vanish at the right end");
  g.theta = d1.dot(d0) / d0.squaredNorm();
  g.ratio_defect = (d1 - g.theta * d0).norm() / d1.norm();
  if (g.ratio_defect > 1e-4)
    throw ConstructionError("bloch_growth_factor: derivative ratios differ between channels");
  g.forbidden = std::abs(std::abs(g.theta) - 1.0) > 1e-6;
  return g;
}

}  // namespace mcd
