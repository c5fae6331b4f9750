#pragma once

// Periodic systems. Two-channel delta combs V_ab(x) = sum_n V_ab delta(x + n a) have the
// closed-form dispersion
//   cos(K_a a) = V_a sin(k_a a) / (2 k_a) + cos(k_a a),
//   cos(Ka)^(1,2) = (cos K_1 a + cos K_2 a +- sqrt((cos K_1 a - cos K_2 a)^2
//                    + W^2 sin(k_1 a) sin(k_2 a) / (k_1 k_2))) / 2,
// with sin(ka)/k -> sinh(kappa a)/kappa and cos -> cosh in closed channels.

#include <array>
#include <complex>
#include <vector>

#include "mcd/engine.hpp"

namespace mcd {

struct CombSpec {
  double period = 1.0;
  Mat strength;                     // symmetric N x N
  std::vector<double> thresholds;

  void validate() const;
  /// The comb as an engine system on [0, cells * period] (deltas at n * period, n = 1..cells).
  ChannelSystem system(int cells) const;
};

/// cos(K a) of one uncoupled channel.
double band_uncoupled(double v, double eps, double a, double energy);

/// Both branches of the coupled two-channel dispersion, "+" branch first. A negative
/// discriminant gives a complex-conjugate pair (no real quasi-momentum).
std::array<std::complex<double>, 2> band_coupled(const CombSpec& spec, double energy);

struct Zone {
  double lo = 0.0;
  double hi = 0.0;
};

struct BandDiagram {
  std::vector<double> energy;
  std::vector<std::array<std::complex<double>, 2>> coupled;  // per sample, both branches
  std::vector<std::array<double, 2>> uncoupled;              // cos(K_a a) with W dropped
  std::array<std::vector<Zone>, 2> allowed;                  // per coupled branch
  std::array<std::vector<Zone>, 2> uncoupled_allowed;        // per channel
  std::vector<Zone> coupled_union;                           // allowed in some coupled branch
  std::vector<Zone> uncoupled_intersection;                  // allowed in both uncoupled channels
};

/// Samples [e_lo, e_hi] and returns the zones; edges refined by bisection to 1e-8.
BandDiagram scan_zones(const CombSpec& spec, double e_lo, double e_hi, int samples = 2000);

/// Allowed <=> real and |cos| <= 1.
bool is_allowed(std::complex<double> c);

struct BlochGrowth {
  double energy = 0.0;
  double theta = 0.0;         // psi'(a) / psi'(0), common to all channels
  double ratio_defect = 0.0;  // |psi'(a) - theta psi'(0)| / |psi'(a)|
  bool forbidden = false;     // |theta| != 1: the periodized block has a real Bloch multiplier
  BoundState state;
};

/// Theta of a block on an interval [0, a] at one of its Dirichlet levels. The periodized
/// block carries the solution theta^l psi(x - l a) in cell l. Throws ConfigError
/// if `energy` is not a level of the block and ConstructionError if the derivative ratios
/// differ between channels by more than 1e-4.
BlochGrowth bloch_growth_factor(const ChannelSystem& block, double energy, const SolverConfig& cfg = {});

}  // namespace mcd
