#pragma once

// Shared machinery of the Gelfand-Levitan and Marchenko transforms.
//
// Both build a kernel from K solutions u_j of the base system (columns of U, N x K),
// a sign matrix S = diag(+-1) (+1 adds a state, -1 removes one) and
//   P = I + S J,   J = int_0^x U^T U  (origin anchor)  or  int_x^inf U^T U  (infinity anchor).
// The potential changes by  dV = -2 G'  (origin) or  +2 G'  (infinity),  G = U P^-1 S U^T,
// and the normalized new states are columns of U P^-1.

#include <vector>

#include "mcd/domain.hpp"

namespace mcd {

enum class Anchor { origin, infinity };

struct TransformResult {
  ChannelSystem system;  // base + sampled dV
  Anchor anchor = Anchor::origin;
  std::vector<double> x;
  Mat s;                  // K x K signs
  std::vector<Mat> u;     // N x K per node
  std::vector<Mat> du;
  std::vector<Mat> pinv_s;  // P^-1 S per node
  std::vector<Mat> delta_v;
  std::vector<int> added;  // columns of U that are new states
  MatrixSolution states;   // N x added.size(), normalized
  std::vector<Vec> kappa;  // per column: decay rates beyond the grid (infinity anchor only)
  std::vector<double> energies;  // per column: energy at which u_j solves the base system, if any

  /// Map a base solution sampled on `x` into the transformed system:
  /// phi - U P^-1 S int U^T phi, the integral taken from the anchor.
  /// For the infinity anchor `phi_kappa` gives the per-channel decay of phi beyond the grid.
  /// Regular phi against columns with known energies uses the Wronskian instead of quadrature.
  MatrixSolution map_solution(const MatrixSolution& phi, const Vec& phi_kappa = Vec()) const;

  /// Largest |dV| entry on the grid.
  double max_delta() const;
};

/// Assemble a transform from U, U' and P sampled on `x`. Throws SingularTransformError where
/// P is numerically singular (|det P| below 1e-12 of the Hadamard bound).
TransformResult assemble_transform(const ChannelSystem& base, Anchor anchor, std::vector<double> x,
                                   std::vector<Mat> u, std::vector<Mat> du, const std::vector<Mat>& p,
                                   const Mat& s, std::vector<int> added, std::vector<Vec> kappa = {});

/// int_0^x U^T U per node (Hermite trapezoid).
std::vector<Mat> gram_from_origin(const std::vector<double>& x, const std::vector<Mat>& u,
                                  const std::vector<Mat>& du);

/// int_x^inf U^T U per node; beyond the last node column j, channel a decays as exp(-kappa[j](a) x).
std::vector<Mat> gram_tail(const std::vector<double>& x, const std::vector<Mat>& u, const std::vector<Mat>& du,
                           const std::vector<Vec>& kappa);

}  // namespace mcd
