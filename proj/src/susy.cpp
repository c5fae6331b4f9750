#include "mcd/susy.hpp"

#include <algorithm>
#include <cmath>

#include "mcd/errors.hpp"

namespace mcd {

namespace {

bool is_breakpoint(const std::vector<double>& bps, double x) {
  auto it = std::lower_bound(bps.begin(), bps.end(), x - 1e-12);
  return it != bps.end() && *it <= x + 1e-12;
}

Mat delta_at(const std::vector<DeltaTerm>& ds, double x, int n) {
  Mat d = Mat::Zero(n, n);
  for (const auto& t : ds)
    if (std::abs(t.x - x) <= 1e-12) d += t.strength;
  return d;
}

void append(std::vector<double>& data, const Mat& m) { data.insert(data.end(), m.data(), m.data() + m.size()); }

}  // namespace

MatrixSolution seed_solution(const ChannelSystem& sys, double energy, const std::vector<SeedTerm>& terms,
                             const std::vector<double>& grid, const SolverConfig& cfg) {
  const int n = sys.channels();
  if (terms.empty()) throw ConfigError("seed: no terms");
  MatrixSolution out(energy, MatrixSolution::Kind::seed, n, n);
  std::vector<Mat> v(grid.size(), Mat::Zero(n, n)), d(grid.size(), Mat::Zero(n, n));
  for (const auto& t : terms) {
    if (t.coeff.rows() != n || t.coeff.cols() != n) throw ConfigError("seed: coefficients must be N x N");
    MatrixSolution b;
    switch (t.basis) {
      case SeedBasis::regular:
        b = integrate_regular_on(sys, energy, grid);
        break;
      case SeedBasis::jost:
        b = integrate_jost_on(sys, energy, grid, cfg);
        break;
      case SeedBasis::left_jost:
        b = integrate_left_jost_on(sys, energy, grid, cfg);
        break;
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      v[i] += b.value(i) * t.coeff;
      d[i] += b.derivative(i) * t.coeff;
    }
  }
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) out.push(grid[i], v[i], d[i]);
  return out;
}

Factorization factorize_seed(const ChannelSystem& sys, const MatrixSolution& seed, double tolerance) {
  const int n = sys.channels();
  if (seed.rows != n || seed.cols != n) throw ConfigError("factorize: seed must be N x N");
  Factorization f;
  f.energy = seed.energy;
  f.seed = seed;
  f.w.resize(seed.size());
  double wmax = 0.0;
  for (std::size_t i = 0; i < seed.size(); ++i) {
    const Mat p = seed.value(i);
    const Eigen::PartialPivLU<Mat> lu(p);
    double scale = 1.0;
    for (int j = 0; j < n; ++j) scale *= p.col(j).norm();
    if (!(std::abs(lu.determinant()) > tolerance * scale))
      throw SingularTransformError("factorize: seed is singular at x = " + std::to_string(seed.x[i]), seed.x[i]);
    const Mat w = seed.derivative(i) * lu.inverse();
    f.symmetry_defect = std::max(f.symmetry_defect, (w - w.transpose()).cwiseAbs().maxCoeff());
    wmax = std::max(wmax, w.cwiseAbs().maxCoeff());
    f.w[i] = 0.5 * (w + w.transpose());
  }
  if (f.symmetry_defect > 1e-6 * (1.0 + wmax))
    throw ConfigError("factorize: seed columns have a nonzero mutual Wronskian (W not symmetric)");
  return f;
}

Factorization factorize(const ChannelSystem& sys, double energy, const std::vector<SeedTerm>& terms,
                        const SolverConfig& cfg) {
  cfg.validate();
  return factorize_seed(sys, seed_solution(sys, energy, terms, refine_grid(system_grid(sys, cfg.h)), cfg),
                        cfg.seed_tolerance);
}

ChannelSystem susy_partner(const ChannelSystem& base, const Factorization& f) {
  const int n = base.channels();
  const auto& x = f.seed.x;
  const auto bps = base.potential.breakpoints(x.front(), x.back());
  const auto ds = base.potential.deltas(x.front(), x.back());
  const Mat shift = 2.0 * f.energy * Mat::Identity(n, n) - 2.0 * base.threshold_matrix();
  std::vector<double> xs, data;
  xs.reserve(x.size() + 2 * bps.size());
  data.reserve(xs.capacity() * n * n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Mat& w = f.w[i];
    if (is_breakpoint(bps, x[i]) && i > 0) {
      const Mat wl = w - delta_at(ds, x[i], n);
      xs.push_back(x[i]);
      append(data, Mat(-base.potential.smooth(x[i], Side::left) + shift + 2.0 * wl * wl));
    }
    xs.push_back(x[i]);
    append(data, Mat(-base.potential.smooth(x[i], Side::right) + shift + 2.0 * w * w));
  }
  PotentialMatrix v = PotentialMatrix::sampled(std::move(xs), n, std::move(data));
  for (const auto& d : ds) v = PotentialMatrix::sum(v, PotentialMatrix::comb(1.0, -d.strength, d.x, 0, 0));
  return ChannelSystem(base.thresholds, base.domain, base.x_max, v);
}

MatrixSolution susy_map(const Factorization& f, const MatrixSolution& psi) {
  if (psi.size() != f.seed.size()) throw ConfigError("susy_map: solution not sampled on the factorization grid");
  MatrixSolution out(psi.energy, MatrixSolution::Kind::mapped, psi.rows, psi.cols);
  out.reserve(psi.size());
  const double de = psi.energy - f.energy;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const Mat& w = f.w[i];
    const Mat v = psi.value(i), d = psi.derivative(i);
    out.push(psi.x[i], -d + w * v, (de * Mat::Identity(w.rows(), w.cols()) - w * w) * v + w * d);
  }
  return out;
}

MatrixSolution susy_map_back(const Factorization& f, const MatrixSolution& phi) {
  if (phi.size() != f.seed.size()) throw ConfigError("susy_map_back: solution not sampled on the factorization grid");
  MatrixSolution out(phi.energy, MatrixSolution::Kind::mapped, phi.rows, phi.cols);
  out.reserve(phi.size());
  const double de = f.energy - phi.energy;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const Mat& w = f.w[i];
    const Mat v = phi.value(i), d = phi.derivative(i);
    out.push(phi.x[i], d + w * v, (de * Mat::Identity(w.rows(), w.cols()) + w * w) * v + w * d);
  }
  return out;
}

TransformResult double_susy(const ChannelSystem& base, const MatrixSolution& psi, const Mat& gamma,
                            const std::vector<Vec>& tail_kappa) {
  const int k = psi.cols;
  if (gamma.rows() != k || gamma.cols() != k) throw ConfigError("double_susy: Gamma must be K x K");
  if ((gamma - gamma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + gamma.cwiseAbs().maxCoeff()))
    throw ConfigError("double_susy: Gamma must be symmetric");
  const Eigen::SelfAdjointEigenSolver<Mat> es(gamma);
  double sigma = 0.0;
  if (es.eigenvalues().minCoeff() > 0) sigma = 1.0;
  if (es.eigenvalues().maxCoeff() < 0) sigma = -1.0;
  if (sigma == 0.0) throw ConfigError("double_susy: Gamma must be definite");

  std::vector<Mat> u(psi.size()), du(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    u[i] = psi.value(i);
    du[i] = psi.derivative(i);
  }
  std::vector<Mat> p;
  if (tail_kappa.empty()) {
    p = gram_from_origin(psi.x, u, du);
    for (auto& pi : p) pi = sigma * (gamma + pi);
  } else {
    // Gamma + J = (Gamma + total) - tail; Gamma = -total is removal and stays exact.
    p = gram_tail(psi.x, u, du, tail_kappa);
    Mat head = gamma + p.front();
    if (head.cwiseAbs().maxCoeff() < 1e-9 * gamma.cwiseAbs().maxCoeff()) head.setZero();
    for (auto& pi : p) pi = sigma * (head - pi);
  }
  auto r = assemble_transform(base, Anchor::origin, psi.x, std::move(u), std::move(du), p, sigma * Mat::Identity(k, k),
                              {});
  r.energies.assign(k, psi.energy);
  return r;
}

TransformResult double_susy_weight(const ChannelSystem& base, const BoundState& state, double ratio,
                                   const SolverConfig& cfg) {
  cfg.validate();
  if (base.domain == DomainKind::whole_line) throw ConfigError("double_susy_weight: needs a half line or interval");
  if (!(ratio >= 0) || ratio == 1.0) throw ConfigError("double_susy_weight: ratio must be >= 0 and != 1");
  const BoundState b = refine_bound_state(base, state.energy, refine_grid(system_grid(base, cfg.h)), cfg);
  const double gamma = 1.0 / (ratio * ratio - 1.0);
  const Vec kap = b.kappa.size() > 0 ? b.kappa : Vec::Ones(b.psi.rows);
  auto r = double_susy(base, b.psi, Mat::Constant(1, 1, gamma), {kap});
  if (ratio > 0) {
    // New state ratio psi / (1 + a J) = ratio gamma psi / (gamma + J), a = 1 / gamma.
    r.added = {0};
    r.states = MatrixSolution(b.energy, MatrixSolution::Kind::bound, b.psi.rows, 1);
    r.states.reserve(r.x.size());
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      const double q = r.pinv_s[i](0, 0);  // 1 / (gamma + J)
      const Mat v = b.psi.value(i), d = b.psi.derivative(i);
      const double dq = -q * q * v.squaredNorm();
      r.states.push(r.x[i], ratio * gamma * q * v, ratio * gamma * (q * d + dq * v));
    }
  }
  return r;
}

ChannelSystem double_susy_steps(const ChannelSystem& base, const Factorization& first, const Mat& gamma) {
  const ChannelSystem partner = susy_partner(base, first);
  const auto& s = first.seed;
  std::vector<Mat> u(s.size()), du(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    u[i] = s.value(i);
    du[i] = s.derivative(i);
  }
  const auto j = gram_from_origin(s.x, u, du);
  // chi = Psi0^-T (Gamma + J) solves H1 at E0, with chi' = -W chi + Psi0.
  MatrixSolution chi(first.energy, MatrixSolution::Kind::seed, s.rows, s.cols);
  chi.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const Mat c = u[i].transpose().partialPivLu().solve(Mat(gamma + j[i]));
    chi.push(s.x[i], c, -first.w[i] * c + u[i]);
  }
  return susy_partner(partner, factorize_seed(partner, chi));
}

}  // namespace mcd
