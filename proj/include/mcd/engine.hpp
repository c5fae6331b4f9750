#pragma once

// Direct coupled-channel solver. Everything the transform modules build is
// checked against this engine, so it shares no code with them beyond the
// domain types.

#include <limits>
#include <optional>
#include <vector>

#include "mcd/domain.hpp"
#include "mcd/propagate.hpp"

namespace mcd {

struct SolverConfig {
  double h = 1e-3;
  /// Rank-deficiency threshold on the matching matrix (relative singular value).
  double matching_tolerance = 1e-8;
  /// Energy step of the bound-state bracketing scan.
  double bracket_resolution = 1e-3;
  /// Point where asymptotic (Jost) data are imposed; NaN picks the right end of
  /// the potential's support automatically.
  double x_match = std::numeric_limits<double>::quiet_NaN();
  /// |V| below this counts as decayed.
  double decay_tolerance = 1e-10;
  /// Scans keep at least this distance from every threshold.
  double threshold_offset = 1e-6;
  int qr_interval = 500;
  /// SUSY seeds count as singular where |det| falls below this times the product of column norms.
  double seed_tolerance = 1e-12;

  void validate() const;
};

/// Phi(x, E): Phi(lo) = 0, Phi'(lo) = I. Real and unrenormalised.
MatrixSolution integrate_regular(const ChannelSystem& sys, double energy, const SolverConfig& cfg = {});
MatrixSolution integrate_regular_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid);

/// Forward integration from lo with arbitrary initial data (N x k each).
MatrixSolution integrate_initial_value(const ChannelSystem& sys, double energy, const Mat& psi0, const Mat& dpsi0,
                                       const std::vector<double>& grid);

/// F(x, E) -> diag(exp(-kappa_a x)) at large x, for E below every threshold.
/// Column index = boundary-condition type.
MatrixSolution integrate_jost(const ChannelSystem& sys, double energy, const SolverConfig& cfg = {});
MatrixSolution integrate_jost_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                 const SolverConfig& cfg = {});

/// Whole line: F_l(x, E) -> diag(exp(kappa_a x)) as x -> -inf, for E below every threshold.
MatrixSolution integrate_left_jost_on(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                      const SolverConfig& cfg = {});

/// Default grid of a system for a given step (breakpoints are nodes).
std::vector<double> system_grid(const ChannelSystem& sys, double h);

/// Node at which asymptotic data are imposed on the right (support end, or cfg.x_match).
double right_asymptotic_point(const ChannelSystem& sys, const SolverConfig& cfg);
/// Mirror of the above for whole-line systems.
double left_asymptotic_point(const ChannelSystem& sys, const SolverConfig& cfg);

struct BoundState {
  double energy = 0.0;
  MatrixSolution psi;               // N x 1, unit norm
  std::optional<SpectralDatum> c;   // psi'(0), half line and interval
  std::optional<SpectralDatum> m;   // asymptotic amplitudes, half and whole line
  int multiplicity = 1;             // size of the degenerate subspace it belongs to
  DomainKind domain = DomainKind::half_line;
  Vec kappa;                        // decay constants of the analytic tails (empty on an interval)
};

/// <a|b> over the grid plus the analytic exponential tails beyond its ends.
double overlap(const BoundState& a, const BoundState& b);

/// Bound states in [e_lo, e_hi] from sign changes (and tangential zeros) of the
/// matching determinant. Degenerate levels come back as orthonormal sets.
std::vector<BoundState> find_bound_states(const ChannelSystem& sys, double e_lo, double e_hi,
                                          const SolverConfig& cfg = {});
/// Same on an explicit grid (cfg.h is then unused).
std::vector<BoundState> find_bound_states_on(const ChannelSystem& sys, double e_lo, double e_hi,
                                             const std::vector<double>& grid, const SolverConfig& cfg = {});

/// The state at a known level re-solved on `grid` (search window widened until found).
/// Degenerate levels return the first state of the set.
BoundState refine_bound_state(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                              const SolverConfig& cfg = {});

/// Matching determinant and smallest relative singular value at E (for diagnostics).
struct MatchingValue {
  double det = 0.0;
  Vec singular_values;
};
MatchingValue matching_function(const ChannelSystem& sys, double energy, const SolverConfig& cfg = {});

ScatteringData scattering_matrix(const ChannelSystem& sys, double energy, const SolverConfig& cfg = {});

/// Complex sampled vector solution (N x 1) of a scattering problem.
struct ComplexSolution {
  double energy = 0.0;
  std::vector<double> x;
  std::vector<CVec> psi, dpsi;
};

/// Whole line: incidence from the right with amplitudes `incident` (exp(-ikx)/sqrt(k)
/// per open channel). Half line: incoming exp(-ikx)/sqrt(k) combination.
ComplexSolution scattering_solution(const ChannelSystem& sys, double energy, const CVec& incident,
                                    const SolverConfig& cfg = {});

/// Sum over channels of Im(conj(psi) psi'). Closed channels contribute nothing
/// asymptotically; inside the coupling region they carry part of the current.
double total_flux(const CVec& psi, const CVec& dpsi);
/// Per-channel currents Im(conj(psi_a) psi_a').
Vec partial_flux(const CVec& psi, const CVec& dpsi);

struct ResonanceEstimate {
  bool found = false;
  double energy = 0.0;
  double width_time_delay = 0.0;  // 4 / peak(2 d delta/dE)
  double width_lorentzian = 0.0;  // FWHM of |X - X_bg|^2
  double peak_time_delay = 0.0;
};

/// Resonance in the entrance channel. X = S_aa (half line) or t_aa for
/// incidence from the right (whole line).
ResonanceEstimate estimate_resonance_width(const ChannelSystem& sys, double e_center, double e_halfwidth,
                                           int entrance_channel, const SolverConfig& cfg = {});

/// max |<psi_m|psi_n> - delta_mn|.
double orthonormality_check(const std::vector<BoundState>& states);

/// Integral of sum_a psi_a^2 over the sampled grid (Hermite-corrected trapezoid).
double norm_squared(const MatrixSolution& psi);
/// Cumulative integral of f with derivative df from x[0]; O(h^4).
std::vector<double> cumulative_integral(const std::vector<double>& x, const std::vector<double>& f,
                                        const std::vector<double>& df);

/// Largest normalised residual of -psi'' + (V + L - E) psi = 0 by centred
/// second differences, skipping nodes next to jumps.
double residual(const ChannelSystem& sys, const MatrixSolution& sol, double energy);

/// One-period transfer matrix (2N x 2N) over (x0, x1], delta at x1 included.
Mat monodromy(const ChannelSystem& sys, double energy, double x0, double x1, const SolverConfig& cfg = {});

}  // namespace mcd
