#pragma once

// Shared plumbing of the engine translation units.

#include <optional>
#include <vector>

#include "mcd/engine.hpp"

namespace mcd::detail {

/// A system discretised once, with the nodes where asymptotic data are imposed.
struct Context {
  const ChannelSystem* sys;
  SolverConfig cfg;
  Discretization d;
  std::size_t i_la = 0;  // left asymptotic node (lo on the half line and interval)
  std::size_t i_m = 0;   // matching node
  std::size_t i_a = 0;   // right asymptotic node (hi on the interval)

  Context(const ChannelSystem& s, const SolverConfig& c);
  Context(const ChannelSystem& s, const SolverConfig& c, std::vector<double> grid);

  double x(std::size_t i) const { return d.grid()[i]; }
};

std::vector<bool> open_mask(const ChannelSystem& sys, double energy);
void check_threshold_distance(const ChannelSystem& sys, double energy, double tol);

/// Sampled solution from a stored trajectory (ascending x, values and derivatives).
MatrixSolution to_solution(const Trajectory<double>& tr, const Discretization& d, double energy,
                           MatrixSolution::Kind kind);

/// Left/right blocks at the matching node and the 2N x 2N matrix [Q_L, Q_R].
struct Matching {
  Mat m;
  PMat<double> r_left, r_right;  // Y_final = Q R at the matching node
  Trajectory<double> left, right;
};
Matching match(const Context& c, double energy, bool store);

ScatteringData scattering(const Context& c, double energy);

}  // namespace mcd::detail
