#pragma once

// Transforms anchored at x -> +inf: bound states are specified by energy and
// asymptotic amplitudes M (psi_a -> M_a exp(-kappa_a x)).

#include <vector>

#include "mcd/engine.hpp"
#include "mcd/transform.hpp"

namespace mcd {

struct Level {
  double energy = 0.0;
  Vec m;
};

/// Closed-form creation of levels out of free motion on the whole line:
///   V = 2 d/dx [U P^-1 U^T],  U_aj = M_aj exp(-kappa_aj x),
///   P_ij = delta_ij + sum_a M_ai M_aj exp(-(kappa_ai + kappa_aj) x) / (kappa_ai + kappa_aj).
class Reflectionless {
 public:
  Reflectionless(std::vector<double> thresholds, std::vector<Level> levels);

  Mat potential(double x) const;
  /// N x K, column j is the normalized state of level j.
  Mat states(double x) const;
  Mat state_derivatives(double x) const;

  /// Whole-line system on [-x_max, x_max] with this closed-form potential. With unequal
  /// thresholds the coupling decays only like exp((kappa_max - kappa_min) x) to the left,
  /// hence the wider default.
  ChannelSystem system(double x_max = 50.0) const;

  int channels() const { return static_cast<int>(eps_.size()); }
  const std::vector<double>& thresholds() const { return eps_; }
  const std::vector<Level>& levels() const { return levels_; }
  Vec kappa(std::size_t level) const;
  /// Every requested weight vector was zero: the result is free motion.
  bool degenerate_request() const { return degenerate_; }

 private:
  struct Eval {
    Mat u, du, pinv;
  };
  Eval eval(double x) const;

  std::vector<double> eps_;
  std::vector<Level> levels_;  // nonzero M only
  std::vector<Vec> kappa_;
  bool degenerate_ = false;
};

/// One level at e_b with amplitudes m.
Reflectionless create_reflectionless(const std::vector<double>& thresholds, double e_b, const Vec& m);

/// Two levels; exactly equal energies with linearly dependent M throw SingularTransformError.
Reflectionless create_two_states(const std::vector<double>& thresholds, const Level& a, const Level& b);

struct AnomalyReport {
  Vec fitted;    // slope of log|psi_a| on the far-left third (growth rate towards -inf)
  Vec natural;   // kappa_a
  Vec expected;  // 2 kappa_max - kappa_a
  std::vector<bool> anomalous;
};

/// Fits of the left tails of a one-level reflectionless state on [-x_max, -x_max/3].
AnomalyReport asymptotic_anomaly_report(const Reflectionless& r, double x_max = 40.0);

/// Channel-1 reduction of a two-channel one-level creation:
///   V_eff = V11 + V12 (M2/M1) exp((kappa1 - kappa2) x).
class EffectiveChannel {
 public:
  EffectiveChannel(std::vector<double> thresholds, double e_b, const Vec& m);

  double potential(double x) const;
  double psi(double x) const;
  double dpsi(double x) const;
  /// Limit of V_eff at x -> -inf: 4 kappa2 (kappa2 - kappa1).
  double left_asymptote() const;
  double energy() const { return e_b_; }
  double threshold() const { return r_.thresholds()[0]; }
  const Reflectionless& source() const { return r_; }

 private:
  Reflectionless r_;
  double e_b_;
  double k1_, k2_, ratio_;
};

EffectiveChannel effective_one_channel(const std::vector<double>& thresholds, double e_b, const Vec& m);

/// Add a level at e_b with amplitudes m to a decaying whole-line background, using the
/// background's Jost solutions on the refined system grid. The Jost map of the
/// result acts on background Jost solutions sampled on `result.x`.
TransformResult add_bound_state(const ChannelSystem& base, double e_b, const Vec& m, const SolverConfig& cfg = {});

/// Give the level of `old_state` new asymptotic amplitudes m_new (same energy, rest of the
/// spectral data and S unchanged). Half or whole line; built on the refined system grid.
TransformResult change_asymptotic_weights(const ChannelSystem& base, const BoundState& old_state, const Vec& m_new,
                                          const SolverConfig& cfg = {});

/// Spatial blocks of a potential: ||V||_F on a uniform scan, cut at local minima that
/// fall below `cut` times the smaller neighbouring peak.
struct Block {
  double lo = 0.0, hi = 0.0;
  double centroid = 0.0;  // ||V||-weighted
  double weight = 0.0;    // int ||V||
};
std::vector<Block> potential_blocks(const std::function<Mat(double)>& v, double lo, double hi, double step = 1e-2,
                                    double cut = 0.05);

}  // namespace mcd
