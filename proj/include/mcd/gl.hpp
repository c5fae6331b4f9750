#pragma once

// Transforms anchored at the origin: bound states are specified by energy and
// C = psi'(0). Results carry the sampled dV on the grid they were built on.

#include <limits>

#include "mcd/engine.hpp"
#include "mcd/transform.hpp"

namespace mcd {

/// Regular solution on `grid`, integrated up to the right asymptotic point and continued
/// with free solutions beyond it (so closed-channel growth is exact there).
MatrixSolution regular_continued(const ChannelSystem& sys, double energy, const std::vector<double>& grid,
                                 const SolverConfig& cfg = {});

/// One channel: C -> ratio * C for the state psi0 (sampled on any grid of the system).
///   V = V0 - 2 d/dx [a psi0^2 / (1 + a I)],  psi = ratio psi0 / (1 + a I),
/// a = ratio^2 - 1, I = int_0^x psi0^2. The result lives on psi0's grid.
TransformResult swv_scale_one_channel(const ChannelSystem& base, const BoundState& psi0, double ratio);

/// Move the level of `old_state` to e_new and give it weights c_new = psi'(0).
/// Built on the refined system grid; the old state is re-solved there.
TransformResult transform_bound_state(const ChannelSystem& base, const BoundState& old_state, double e_new,
                                      const Vec& c_new, const SolverConfig& cfg = {});

/// New level at `energy` with C = psi'(0) = c: V = V0 - 2 d/dx [u u^T / (1 + int_0^x u^T u)],
/// u = Phi(x, E) c. Below every threshold the state decays; the rest of the spectrum is kept.
TransformResult add_level(const ChannelSystem& base, double energy, const Vec& c, const SolverConfig& cfg = {});

/// Columns span the C vectors whose regular solutions decay in every closed channel at `energy`.
Mat physical_coefficients(const ChannelSystem& base, double energy, const SolverConfig& cfg = {});

enum class TailKind { power_law, exponential };

struct TailFit {
  TailKind kind = TailKind::exponential;
  double loglog_slope = 0.0;  // d log A / d log x
  double loglin_slope = 0.0;  // d log A / dx
  double loglog_rms = 0.0;
  double loglin_rms = 0.0;
};

/// Fits the amplitude envelope A = sqrt(sum psi^2 + psi'^2 / |E - eps|) on [lo, hi]
/// against log x and against x; the better fit decides the kind.
TailFit classify_tail(const MatrixSolution& psi, const std::vector<double>& thresholds, double energy, double lo,
                      double hi);

struct BsecResult {
  TransformResult transform;
  TailFit tail;
  double norm_deficit = 0.0;  // 1 - norm on the grid = 1/P(x_max)
};

/// Create a normalizable state at an energy above at least one threshold with weights c.
/// The tail is classified on [fit_lo, fit_hi] (default: outer third of the grid).
BsecResult create_bsec(const ChannelSystem& base, double energy, const Vec& c, const SolverConfig& cfg = {},
                       double fit_lo = std::numeric_limits<double>::quiet_NaN(),
                       double fit_hi = std::numeric_limits<double>::quiet_NaN());

}  // namespace mcd
