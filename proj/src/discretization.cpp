#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcd/propagate.hpp"

namespace mcd {

namespace {

void store(std::vector<double>& a, std::size_t i, const Mat& m) {
  const std::size_t k = static_cast<std::size_t>(m.size());
  std::copy_n(m.data(), k, a.begin() + i * k);
}

double size_of(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

Discretization::Discretization(const ChannelSystem& sys, std::vector<double> grid)
    : sys_(&sys), grid_(std::move(grid)), n_(sys.channels()) {
  if (grid_.size() < 2) throw ConfigError("discretization: grid needs at least two nodes");
  const std::size_t m = grid_.size();
  const std::size_t nn = static_cast<std::size_t>(n_ * n_);
  left_.resize(m * nn);
  right_.resize(m * nn);
  mid_.resize((m - 1) * nn);
  const auto& v = sys.potential;
  for (std::size_t i = 0; i < m; ++i) {
    store(left_, i, v.smooth(grid_[i], Side::left));
    store(right_, i, v.smooth(grid_[i], Side::right));
    if (i + 1 < m) store(mid_, i, v.smooth(0.5 * (grid_[i] + grid_[i + 1]), Side::right));
  }

  delta_index_.assign(m, -1);
  for (const auto& dt : v.deltas(grid_.front(), grid_.back())) {
    const std::size_t k = locate(dt.x);
    if (std::abs(grid_[k] - dt.x) > 1e-12 * std::max(1.0, std::abs(dt.x))) {
      std::ostringstream os;
      os << "discretization: delta at x = " << dt.x << " is not a grid node";
      throw ConfigError(os.str());
    }
    if (delta_index_[k] >= 0) {
      deltas_[delta_index_[k]] += dt.strength;
    } else {
      delta_index_[k] = static_cast<int>(deltas_.size());
      deltas_.push_back(dt.strength);
    }
  }

  jump_.assign(m, 0);
  for (std::size_t i = 0; i < m; ++i)
    jump_[i] = delta_index_[i] >= 0 || size_of(v_left(i) - v_right(i)) > 0.0 ? 1 : 0;

  // tail_right_[i]: V on [x_i, hi] with the right limit at x_i (a delta at x_i is allowed,
  // a backward start handles it). tail_left_[i]: V on [lo, x_i] including any delta at x_i.
  tail_right_.assign(m, 0.0);
  tail_left_.assign(m, 0.0);
  double acc = 0.0;
  for (std::size_t i = m; i-- > 0;) {
    if (i + 1 < m) {
      const double dj = delta_index_[i + 1] >= 0 ? size_of(deltas_[delta_index_[i + 1]]) : 0.0;
      acc = std::max({acc, size_of(v_mid(i)), size_of(v_left(i + 1)), dj});
    }
    tail_right_[i] = std::max(acc, size_of(v_right(i)));
    acc = tail_right_[i];
  }
  acc = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    if (i > 0) acc = std::max({acc, size_of(v_mid(i - 1)), size_of(v_right(i - 1))});
    const double di = delta_index_[i] >= 0 ? size_of(deltas_[delta_index_[i]]) : 0.0;
    tail_left_[i] = std::max({acc, size_of(v_left(i)), di});
    acc = tail_left_[i];
  }
}

const Mat* Discretization::delta(std::size_t i) const {
  const int k = delta_index_[i];
  return k >= 0 ? &deltas_[k] : nullptr;
}

std::size_t Discretization::locate(double x) const {
  auto it = std::lower_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.begin()) return 0;
  if (it == grid_.end()) return grid_.size() - 1;
  const std::size_t j = static_cast<std::size_t>(it - grid_.begin());
  return (x - grid_[j - 1] <= grid_[j] - x) ? j - 1 : j;
}

Mat Discretization::load(const std::vector<double>& a, std::size_t i) const {
  Mat m(n_, n_);
  const std::size_t k = static_cast<std::size_t>(n_ * n_);
  std::copy_n(a.begin() + i * k, k, m.data());
  return m;
}

}  // namespace mcd
