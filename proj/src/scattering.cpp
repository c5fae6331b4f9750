#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "engine_internal.hpp"

namespace mcd {

namespace {

using CPMat = PMat<cplx>;
constexpr cplx I1{0.0, 1.0};

struct Channels {
  std::vector<bool> open;
  std::vector<int> open_index;
  Vec k;  // k for open channels, kappa for closed ones
};

Channels channels_at(const ChannelSystem& s, double e) {
  Channels ch;
  ch.open = detail::open_mask(s, e);
  ch.k.resize(s.channels());
  for (int a = 0; a < s.channels(); ++a) {
    ch.k(a) = std::sqrt(std::abs(e - s.thresholds[a]));
    if (ch.open[a]) ch.open_index.push_back(a);
  }
  return ch;
}

// Rows: incoming amplitude for open channels, growing amplitude (unscaled) for closed
// ones. `toward_right` selects the decomposition at the right end (incoming exp(-ikx))
// or at the left end (incoming exp(+ikx)).
CMat incoming_rows(const CPMat& y, int n, double x, const Channels& ch, bool toward_right) {
  CMat m(n, y.cols());
  const double sgn = toward_right ? 1.0 : -1.0;
  for (int a = 0; a < n; ++a) {
    const double k = ch.k(a);
    if (ch.open[a]) {
      // right: A = (ik psi - psi') e^{ikx} / (2ik); left: A' = (ik psi + psi') e^{-ikx} / (2ik)
      const cplx ph = std::exp(sgn * I1 * k * x);
      m.row(a) = (I1 * k * y.row(a) - sgn * y.row(n + a)) * ph / (2.0 * I1 * k);
    } else {
      m.row(a) = k * y.row(a) + sgn * y.row(n + a);
    }
  }
  return m;
}

// Outgoing amplitudes of the open channels, one row per open channel.
CMat outgoing_rows(const CPMat& y, int n, double x, const Channels& ch, bool toward_right) {
  const int no = static_cast<int>(ch.open_index.size());
  CMat m(no, y.cols());
  const double sgn = toward_right ? 1.0 : -1.0;
  for (int r = 0; r < no; ++r) {
    const int a = ch.open_index[r];
    const double k = ch.k(a);
    const cplx ph = std::exp(-sgn * I1 * k * x);
    m.row(r) = (I1 * k * y.row(a) + sgn * y.row(n + a)) * ph / (2.0 * I1 * k);
  }
  return m;
}

// Coefficients c (N x No) with unit-flux incidence exp(-+ikx)/sqrt(k) in each open channel
// and no growing closed components.
CMat incidence_coefficients(const CMat& rows, const Channels& ch) {
  const int n = static_cast<int>(rows.rows());
  const int no = static_cast<int>(ch.open_index.size());
  CMat rhs = CMat::Zero(n, no);
  for (int r = 0; r < no; ++r) rhs(ch.open_index[r], r) = 1.0 / std::sqrt(ch.k(ch.open_index[r]));
  return rows.colPivHouseholderQr().solve(rhs);
}

CMat row_sqrt_k(const CMat& m, const Channels& ch) {
  CMat out = m;
  for (int r = 0; r < out.rows(); ++r) out.row(r) *= std::sqrt(ch.k(ch.open_index[r]));
  return out;
}

CMat open_rows(const CMat& m, const Channels& ch) {
  CMat out(static_cast<int>(ch.open_index.size()), m.cols());
  for (int r = 0; r < out.rows(); ++r) out.row(r) = m.row(ch.open_index[r]);
  return out;
}

// Start data of pure asymptotic columns: exp(-+ikx) open, exp(+-kappa (x - x0)) closed.
CPMat pure_start(int n, double x, const Channels& ch, bool at_left) {
  CPMat y = CPMat::Zero(2 * n, n);
  for (int a = 0; a < n; ++a) {
    const double k = ch.k(a);
    if (ch.open[a]) {
      const cplx ik = at_left ? -I1 * k : I1 * k;
      y(a, a) = std::exp(ik * x);
      y(n + a, a) = ik * y(a, a);
    } else {
      y(a, a) = 1.0;
      y(n + a, a) = at_left ? k : -k;
    }
  }
  return y;
}

double spectral_norm(const CMat& m) {
  Eigen::JacobiSVD<CMat> svd(m);
  return svd.singularValues()(0);
}

Vec eigenphases(const CMat& s) {
  Eigen::ComplexEigenSolver<CMat> es(s);
  Vec out(s.rows());
  for (int i = 0; i < s.rows(); ++i) out(i) = 0.5 * std::arg(es.eigenvalues()(i));
  std::sort(out.data(), out.data() + out.size());
  return out;
}

void free_continue(int n, const Channels& ch, double d, const CVec& y, CVec& psi, CVec& dpsi) {
  psi.resize(n);
  dpsi.resize(n);
  for (int a = 0; a < n; ++a) {
    const double k = ch.k(a);
    const cplx p = y(a), dp = y(n + a);
    if (ch.open[a]) {
      psi(a) = p * std::cos(k * d) + dp * std::sin(k * d) / k;
      dpsi(a) = -p * k * std::sin(k * d) + dp * std::cos(k * d);
    } else {
      psi(a) = p * std::cosh(k * d) + dp * std::sinh(k * d) / k;
      dpsi(a) = p * k * std::sinh(k * d) + dp * std::cosh(k * d);
    }
  }
}

}  // namespace

namespace detail {

ScatteringData scattering(const Context& c, double e) {
  const ChannelSystem& s = *c.sys;
  if (s.domain == DomainKind::interval) throw ConfigError("scattering: an interval has no continuum");
  check_threshold_distance(s, e, 1e-9);
  const int n = s.channels();
  const Channels ch = channels_at(s, e);
  if (ch.open_index.empty()) throw ConfigError("scattering: energy below every threshold");
  const int no = static_cast<int>(ch.open_index.size());

  ScatteringData out;
  out.energy = e;
  out.open = ch.open;
  out.open_index = ch.open_index;
  const double xa = c.x(c.i_a);

  if (s.domain == DomainKind::half_line) {
    PMat<double> y0 = PMat<double>::Zero(2 * n, n);
    y0.bottomRows(n).setIdentity();
    const auto tr = propagate<double>(c.d, e, 0, c.i_a, y0, c.cfg.qr_interval, false);
    const CPMat y = tr.final_state.cast<cplx>();
    const CMat coef = incidence_coefficients(incoming_rows(y, n, xa, ch, true), ch);
    out.S = -row_sqrt_k(outgoing_rows(y, n, xa, ch, true) * coef, ch);
    out.unitarity_defect = spectral_norm(out.S.adjoint() * out.S - CMat::Identity(no, no));
    out.eigenphases = eigenphases(out.S);
    return out;
  }

  const double xla = c.x(c.i_la);
  {
    const auto tr = propagate<cplx>(c.d, e, c.i_la, c.i_a, pure_start(n, xla, ch, true), c.cfg.qr_interval, false);
    const CMat coef = incidence_coefficients(incoming_rows(tr.final_state, n, xa, ch, true), ch);
    out.r_right = row_sqrt_k(outgoing_rows(tr.final_state, n, xa, ch, true) * coef, ch);
    const CMat ctrue = tr.accumulated.triangularView<Eigen::Upper>().solve(coef);
    out.t_right = row_sqrt_k(open_rows(ctrue, ch), ch);
  }
  {
    const auto tr = propagate<cplx>(c.d, e, c.i_a, c.i_la, pure_start(n, xa, ch, false), c.cfg.qr_interval, false);
    const CMat coef = incidence_coefficients(incoming_rows(tr.final_state, n, xla, ch, false), ch);
    out.r_left = row_sqrt_k(outgoing_rows(tr.final_state, n, xla, ch, false) * coef, ch);
    const CMat ctrue = tr.accumulated.triangularView<Eigen::Upper>().solve(coef);
    out.t_left = row_sqrt_k(open_rows(ctrue, ch), ch);
  }
  const CMat full = out.whole_line_s();
  out.unitarity_defect = spectral_norm(full.adjoint() * full - CMat::Identity(2 * no, 2 * no));
  out.eigenphases = eigenphases(full);
  return out;
}

}  // namespace detail

ScatteringData scattering_matrix(const ChannelSystem& sys, double energy, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  return detail::scattering(c, energy);
}

ComplexSolution scattering_solution(const ChannelSystem& sys, double energy, const CVec& incident,
                                    const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  const ChannelSystem& s = sys;
  if (s.domain == DomainKind::interval) throw ConfigError("scattering: an interval has no continuum");
  detail::check_threshold_distance(s, energy, 1e-9);
  const int n = s.channels();
  const Channels ch = channels_at(s, energy);
  if (ch.open_index.empty()) throw ConfigError("scattering: energy below every threshold");
  if (incident.size() != static_cast<int>(ch.open_index.size()))
    throw ConfigError("scattering_solution: incident vector must have one entry per open channel");
  const double xa = c.x(c.i_a), xla = c.x(c.i_la);

  CPMat y0;
  if (s.domain == DomainKind::half_line) {
    y0 = CPMat::Zero(2 * n, n);
    y0.bottomRows(n).setIdentity();
  } else {
    y0 = pure_start(n, xla, ch, true);
  }
  const auto tr = propagate<cplx>(c.d, energy, c.i_la, c.i_a, y0, c.cfg.qr_interval, true);
  const CMat coef = incidence_coefficients(incoming_rows(tr.final_state, n, xa, ch, true), ch);
  const CPMat cv = coef * incident;
  const auto path = backtrack<cplx>(tr, cv);

  ComplexSolution out;
  out.energy = energy;
  out.x = c.d.grid();
  out.psi.resize(out.x.size());
  out.dpsi.resize(out.x.size());
  for (std::size_t i = 0; i < out.x.size(); ++i) {
    if (i < c.i_la) {
      free_continue(n, ch, out.x[i] - xla, path.front(), out.psi[i], out.dpsi[i]);
    } else if (i > c.i_a) {
      free_continue(n, ch, out.x[i] - xa, path.back(), out.psi[i], out.dpsi[i]);
    } else {
      out.psi[i] = path[i - c.i_la].head(n);
      out.dpsi[i] = path[i - c.i_la].tail(n);
    }
  }
  return out;
}

double total_flux(const CVec& psi, const CVec& dpsi) { return partial_flux(psi, dpsi).sum(); }

Vec partial_flux(const CVec& psi, const CVec& dpsi) {
  Vec out(psi.size());
  for (int a = 0; a < psi.size(); ++a) out(a) = std::imag(std::conj(psi(a)) * dpsi(a));
  return out;
}

ResonanceEstimate estimate_resonance_width(const ChannelSystem& sys, double e_center, double e_halfwidth,
                                           int entrance_channel, const SolverConfig& cfg) {
  const detail::Context c(sys, cfg);
  if (entrance_channel < 0 || entrance_channel >= sys.channels())
    throw ConfigError("resonance: entrance channel out of range");
  double a = e_center - e_halfwidth, b = e_center + e_halfwidth;
  if (!(a > sys.thresholds[entrance_channel] + cfg.threshold_offset))
    throw ConfigError("resonance: window must lie above the entrance-channel threshold");

  auto amplitude = [&](double e) {
    const ScatteringData sd = detail::scattering(c, e);
    const auto it = std::find(sd.open_index.begin(), sd.open_index.end(), entrance_channel);
    const int r = static_cast<int>(it - sd.open_index.begin());
    return sys.domain == DomainKind::half_line ? sd.S(r, r) : sd.t_right(r, r);
  };
  // Phase whose energy derivative is half the time delay.
  const double phase_scale = sys.domain == DomainKind::half_line ? 0.5 : 1.0;

  constexpr int K = 201;
  ResonanceEstimate est;
  std::vector<double> es(K);
  std::vector<cplx> xs(K);
  std::vector<double> tau(K, 0.0);
  double e_peak = 0.0, tau_peak = 0.0;
  for (int pass = 0; pass < 4; ++pass) {
    std::vector<double> ph(K);
    for (int i = 0; i < K; ++i) {
      es[i] = a + (b - a) * i / (K - 1.0);
      xs[i] = amplitude(es[i]);
      ph[i] = std::arg(xs[i]);
      if (i > 0) {
        double d = ph[i] - ph[i - 1];
        d -= 2 * std::numbers::pi * std::round(d / (2 * std::numbers::pi));
        ph[i] = ph[i - 1] + d;
      }
    }
    for (int i = 1; i + 1 < K; ++i) tau[i] = 2.0 * phase_scale * (ph[i + 1] - ph[i - 1]) / (es[i + 1] - es[i - 1]);
    const int ipk = static_cast<int>(std::max_element(tau.begin() + 1, tau.end() - 1) - tau.begin());
    tau_peak = tau[ipk];
    const double edge = std::max(std::abs(tau[1]), std::abs(tau[K - 2]));
    if (!(tau_peak > 0) || ipk <= 2 || ipk >= K - 3 || tau_peak < 3.0 * edge) return est;
    // Parabolic vertex through the three samples around the peak.
    const double t0 = tau[ipk - 1], t1 = tau[ipk], t2 = tau[ipk + 1];
    const double den = t0 - 2 * t1 + t2;
    const double shift = den != 0.0 ? 0.5 * (t0 - t2) / den : 0.0;
    const double de = es[1] - es[0];
    e_peak = es[ipk] + shift * de;
    tau_peak = t1 - 0.25 * (t0 - t2) * shift;
    const double gamma = 4.0 / tau_peak;
    const double na = std::max(a, e_peak - 8 * gamma), nb = std::min(b, e_peak + 8 * gamma);
    if (nb - na > 0.9 * (b - a)) break;
    a = na;
    b = nb;
  }

  est.energy = e_peak;
  est.peak_time_delay = tau_peak;
  est.width_time_delay = 4.0 / tau_peak;

  const cplx bg = 0.5 * (xs.front() + xs.back());
  std::vector<double> l(K);
  for (int i = 0; i < K; ++i) l[i] = std::norm(xs[i] - bg);
  const int imax = static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
  const double half = 0.5 * l[imax];
  int il = imax, ir = imax;
  while (il > 0 && l[il] > half) --il;
  while (ir < K - 1 && l[ir] > half) ++ir;
  if (l[il] > half || l[ir] > half) return est;
  auto cross = [&](int i0, int i1) { return es[i0] + (half - l[i0]) * (es[i1] - es[i0]) / (l[i1] - l[i0]); };
  est.width_lorentzian = cross(ir - 1, ir) - cross(il, il + 1);
  est.found = true;
  return est;
}

}  // namespace mcd
