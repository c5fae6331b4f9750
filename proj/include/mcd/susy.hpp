#pragma once

// Matrix Darboux (SUSY) transforms. With A+- = +-d/dx + W and W = Psi0' Psi0^-1 for a
// seed Psi0 solving the base system at the factorization energy,
//   H0 = A+ A- + E0,   H1 = A- A+ + E0,   V1 = V0 - 2 W' = -V0 - 2 L + 2 E0 + 2 W^2,
// L the threshold matrix. Deltas of V0 make W jump by their strength, so they flip sign.

#include <vector>

#include "mcd/engine.hpp"
#include "mcd/transform.hpp"

namespace mcd {

enum class SeedBasis { regular, jost, left_jost };

/// Seed = sum over terms of basis(E0) * coeff (N x N each).
struct SeedTerm {
  SeedBasis basis = SeedBasis::jost;
  Mat coeff;
};

struct Factorization {
  double energy = 0.0;
  MatrixSolution seed;       // N x N
  std::vector<Mat> w;        // W per node, right limits at deltas (symmetrised)
  double symmetry_defect = 0.0;  // max |W - W^T| before symmetrising
};

/// Seed solution sampled on `grid`.
MatrixSolution seed_solution(const ChannelSystem& sys, double energy, const std::vector<SeedTerm>& terms,
                             const std::vector<double>& grid, const SolverConfig& cfg = {});

/// Factorization on the refined system grid. Throws SingularTransformError where
/// det Psi0 falls below cfg.seed_tolerance of the product of its column norms, ConfigError
/// for a non-symmetric W.
Factorization factorize(const ChannelSystem& sys, double energy, const std::vector<SeedTerm>& terms,
                        const SolverConfig& cfg = {});
/// Same for a seed supplied directly (any solution of `sys` at seed.energy).
Factorization factorize_seed(const ChannelSystem& sys, const MatrixSolution& seed, double tolerance = 1e-12);

/// H1 as a system on the same domain: sampled smooth part plus the flipped deltas.
ChannelSystem susy_partner(const ChannelSystem& base, const Factorization& f);

/// A- psi = -psi' + W psi for psi sampled on the factorization grid; the derivative is
/// (E - E0 - W^2) psi + W psi' (from the Riccati equation).
MatrixSolution susy_map(const Factorization& f, const MatrixSolution& psi);

/// A+ phi = phi' + W phi (inverse direction up to the factor E - E0); derivative
/// (E0 - E + W^2) phi + W phi'.
MatrixSolution susy_map_back(const Factorization& f, const MatrixSolution& phi);

/// Two SUSY steps at one energy in closed form:
///   V2 = V0 - 2 d/dx [Psi (Gamma + int_lo^x Psi^T Psi)^-1 Psi^T],
/// Psi (N x K) solving the base system at one energy, Gamma (K x K) symmetric definite.
/// With `tail_kappa` (per column, decay rates beyond the grid) the integral is taken as
/// total - tail, which keeps Gamma = -I (state removal) accurate.
TransformResult double_susy(const ChannelSystem& base, const MatrixSolution& psi, const Mat& gamma,
                            const std::vector<Vec>& tail_kappa = {});

/// Double SUSY that changes the weight of a bound state: C -> ratio * C (ratio > 0),
/// or removes it (ratio = 0). Gamma = 1 / (ratio^2 - 1).
TransformResult double_susy_weight(const ChannelSystem& base, const BoundState& state, double ratio,
                                   const SolverConfig& cfg = {});

/// Two explicit SUSY steps at E0: the first with seed Psi0 (N x N), the second with the
/// partner solution chi = (Psi0^T)^-1 (Gamma + int_lo^x Psi0^T Psi0). Returns the final system.
ChannelSystem double_susy_steps(const ChannelSystem& base, const Factorization& first, const Mat& gamma);

}  // namespace mcd
