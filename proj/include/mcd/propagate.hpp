#pragma once

// Fixed-step RK4 propagation of the first-order 2N system
//   d/dx [psi; psi'] = [[0, I], [V + L - E, 0]] [psi; psi']
// on a precomputed grid, with derivative jumps at delta nodes and optional
// QR re-orthonormalisation of the propagated column block.

#include <cmath>
#include <optional>
#include <vector>

#include "mcd/domain.hpp"

namespace mcd {

template <class S>
using PMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxPhase, kMaxPhase>;

/// A system sampled on a grid: V at each node (both one-sided limits), at each
/// interval midpoint, and the delta strengths that sit on nodes.
class Discretization {
 public:
  Discretization(const ChannelSystem& sys, std::vector<double> grid);

  const ChannelSystem& system() const { return *sys_; }
  const std::vector<double>& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }
  int channels() const { return n_; }

  Mat v_right(std::size_t i) const { return load(right_, i); }
  Mat v_left(std::size_t i) const { return load(left_, i); }
  Mat v_mid(std::size_t i) const { return load(mid_, i); }
  const Mat* delta(std::size_t i) const;
  bool has_jump(std::size_t i) const { return jump_[i] != 0; }
  /// Index of the node nearest to x.
  std::size_t locate(double x) const;
  /// Largest |V| on nodes with index >= i (suffix max), for decay checks.
  double tail_size_right(std::size_t i) const { return tail_right_[i]; }
  double tail_size_left(std::size_t i) const { return tail_left_[i]; }

 private:
  Mat load(const std::vector<double>& a, std::size_t i) const;

  const ChannelSystem* sys_;
  std::vector<double> grid_;
  int n_;
  std::vector<double> left_, right_, mid_;
  std::vector<int> delta_index_;
  std::vector<Mat> deltas_;
  std::vector<char> jump_;
  std::vector<double> tail_right_, tail_left_;
};

template <class S>
struct Renormalization {
  std::size_t node;  // states stored at this node and before (in propagation order) use the old basis
  PMat<S> r;         // Y_new = Y_old * r^{-1}
};

template <class S>
struct Trajectory {
  std::size_t from = 0, to = 0;
  int phase = 0, cols = 0;
  std::vector<S> states;  // per visited node, in propagation order, phase x cols column-major
  std::vector<Renormalization<S>> renorms;
  PMat<S> final_state;
  PMat<S> accumulated;  // Y_true(final) = final_state * accumulated

  PMat<S> state(std::size_t k) const {
    PMat<S> m(phase, cols);
    std::copy_n(states.begin() + k * phase * cols, phase * cols, m.data());
    return m;
  }
  std::size_t steps() const { return states.size() / static_cast<std::size_t>(phase * cols); }
};

/// QR with positive (real) diagonal so det and continuity in E are preserved.
template <class S>
void positive_qr(const PMat<S>& y, PMat<S>& q, PMat<S>& r) {
  Eigen::HouseholderQR<PMat<S>> qr(y);
  const int k = static_cast<int>(y.cols());
  q = qr.householderQ() * PMat<S>::Identity(y.rows(), k);
  r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (int j = 0; j < k; ++j) {
    const S d = r(j, j);
    const double mag = std::abs(d);
    if (mag == 0.0) continue;
    const S phase = d / mag;
    r.row(j) /= phase;
    q.col(j) *= phase;
  }
}

/// Propagate y0 (2N x k) from node `from` to node `to` (either direction).
/// Stored states are right limits at delta nodes. renorm_every <= 0 disables QR.
template <class S>
Trajectory<S> propagate(const Discretization& d, double energy, std::size_t from, std::size_t to, const PMat<S>& y0,
                        int renorm_every, bool store) {
  const int n = d.channels();
  const int k = static_cast<int>(y0.cols());
  const Mat lam = d.system().threshold_matrix();
  const auto& g = d.grid();
  Trajectory<S> tr;
  tr.from = from;
  tr.to = to;
  tr.phase = 2 * n;
  tr.cols = k;
  PMat<S> y = y0;
  tr.accumulated = PMat<S>::Identity(k, k);
  const bool forward = to >= from;
  const std::size_t count = forward ? to - from + 1 : from - to + 1;
  if (store) tr.states.reserve(count * 2 * n * k);

  auto push = [&](const PMat<S>& m) {
    if (store) tr.states.insert(tr.states.end(), m.data(), m.data() + 2 * n * k);
  };
  auto rhs = [&](const Mat& q, const PMat<S>& m) {
    PMat<S> out(2 * n, k);
    out.topRows(n) = m.bottomRows(n);
    out.bottomRows(n) = q.template cast<S>() * m.topRows(n);
    return out;
  };
  auto check = [&](const PMat<S>& m, double x) {
    if (!m.allFinite()) throw OverflowError("integration overflow (non-finite solution)", x);
  };

  push(y);
  // Backward start: convert the stored right limit into the left limit.
  if (!forward) {
    if (const Mat* dl = d.delta(from)) y.bottomRows(n) -= dl->template cast<S>() * y.topRows(n);
  }

  std::size_t i = from;
  int since = 0;
  while (i != to) {
    const std::size_t j = forward ? i + 1 : i - 1;
    const double h = g[j] - g[i];
    const std::size_t lo = std::min(i, j);
    const Mat q0 = (forward ? d.v_right(i) : d.v_left(i)) + lam - energy * Mat::Identity(n, n);
    const Mat qm = d.v_mid(lo) + lam - energy * Mat::Identity(n, n);
    const Mat q1 = (forward ? d.v_left(j) : d.v_right(j)) + lam - energy * Mat::Identity(n, n);
    const PMat<S> k1 = rhs(q0, y);
    const PMat<S> k2 = rhs(qm, y + (0.5 * h) * k1);
    const PMat<S> k3 = rhs(qm, y + (0.5 * h) * k2);
    const PMat<S> k4 = rhs(q1, y + h * k3);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (const Mat* dl = d.delta(j)) {
      if (forward) {
        y.bottomRows(n) += dl->template cast<S>() * y.topRows(n);
        push(y);
      } else {
        push(y);  // right limit stored
        y.bottomRows(n) -= dl->template cast<S>() * y.topRows(n);
      }
    } else {
      push(y);
    }
    check(y, g[j]);
    i = j;
    if (renorm_every > 0 && ++since >= renorm_every && i != to) {
      since = 0;
      PMat<S> q, r;
      positive_qr<S>(y, q, r);
      y = q;
      tr.accumulated = (r * tr.accumulated).eval();
      tr.renorms.push_back({i, r});
    }
  }
  // Report the final state as a right limit.
  if (!forward) {
    if (const Mat* dl = d.delta(to)) y.bottomRows(n) += dl->template cast<S>() * y.topRows(n);
  }
  tr.final_state = y;
  return tr;
}

/// Values of Y_true * c along a stored trajectory, where c holds coefficients in
/// the basis of the final state. Returns one 2N-vector per visited node.
template <class S>
std::vector<Eigen::Matrix<S, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxPhase, 1>> backtrack(const Trajectory<S>& tr,
                                                                                         const PMat<S>& c) {
  using V = Eigen::Matrix<S, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxPhase, 1>;
  const std::size_t m = tr.steps();
  std::vector<V> out(m);
  PMat<S> coef = c;
  std::size_t ev = tr.renorms.size();
  const bool forward = tr.to >= tr.from;
  for (std::size_t s = m; s-- > 0;) {
    const std::size_t node = forward ? tr.from + s : tr.from - s;
    // Crossing a renormalisation event going backwards: at its node and before, old basis.
    while (ev > 0 && (forward ? node <= tr.renorms[ev - 1].node : node >= tr.renorms[ev - 1].node)) {
      coef = tr.renorms[ev - 1].r.template triangularView<Eigen::Upper>().solve(coef);
      --ev;
    }
    out[s] = tr.state(s) * coef;
  }
  return out;
}

}  // namespace mcd
