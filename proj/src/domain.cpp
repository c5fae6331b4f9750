#include "mcd/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mcd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Mat zeros(int n) { return Mat::Zero(n, n); }

Mat sample_at(const potential::GridSampled& g, std::size_t i) {
  const int nn = g.n * g.n;
  Mat m(g.n, g.n);
  for (int k = 0; k < nn; ++k) m.data()[k] = g.data[i * nn + k];
  return m;
}

Mat interpolate(const potential::GridSampled& g, double x, Side side) {
  const auto& xs = g.x;
  std::size_t j = side == Side::right ? std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()
                                      : std::lower_bound(xs.begin(), xs.end(), x) - xs.begin();
  if (j == 0) return sample_at(g, 0);
  if (j == xs.size()) return sample_at(g, xs.size() - 1);
  const double x0 = xs[j - 1], x1 = xs[j];
  if (x1 == x0) return sample_at(g, side == Side::right ? j : j - 1);
  const double t = (x - x0) / (x1 - x0);
  return (1.0 - t) * sample_at(g, j - 1) + t * sample_at(g, j);
}

void merge_deltas(std::vector<DeltaTerm>& out, std::vector<DeltaTerm> extra) {
  for (auto& d : extra) {
    auto it = std::find_if(out.begin(), out.end(), [&](const DeltaTerm& e) { return e.x == d.x; });
    if (it != out.end())
      it->strength += d.strength;
    else
      out.push_back(std::move(d));
  }
  std::sort(out.begin(), out.end(), [](const DeltaTerm& a, const DeltaTerm& b) { return a.x < b.x; });
}

std::vector<double> sorted_unique(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

int channels_of(const PotentialMatrix::Variant& v) {
  return std::visit(overloaded{
                        [](const potential::Zero& z) { return z.n; },
                        [](const potential::PiecewiseConstant& p) {
                          return p.blocks.empty() ? 1 : static_cast<int>(p.blocks.front().rows());
                        },
                        [](const potential::DeltaComb& c) { return static_cast<int>(c.strength.rows()); },
                        [](const potential::ClosedForm& c) { return c.n; },
                        [](const potential::GridSampled& g) { return g.n; },
                        [](const potential::Sum& s) { return s.a->channels(); },
                        [](const potential::Periodic& p) { return p.cell->channels(); },
                    },
                    v);
}

}  // namespace

PotentialMatrix::PotentialMatrix(Variant v) : v_(std::move(v)), n_(channels_of(v_)) {
  if (n_ < 1 || n_ > kMaxChannels) throw ConfigError("potential: channel count must be in [1, 4]");
  std::visit(overloaded{
                 [](const potential::PiecewiseConstant& p) {
                   if (p.edges.size() != p.blocks.size() + 1)
                     throw ConfigError("piecewise potential: need one more edge than blocks");
                   if (!std::is_sorted(p.edges.begin(), p.edges.end()))
                     throw ConfigError("piecewise potential: edges must be increasing");
                 },
                 [](const potential::DeltaComb& c) {
                   if (!(c.period > 0)) throw ConfigError("delta comb: period must be positive");
                 },
                 [](const potential::GridSampled& g) {
                   if (g.data.size() != g.x.size() * static_cast<std::size_t>(g.n * g.n) || g.x.empty())
                     throw ConfigError("sampled potential: data size mismatch");
                   if (!std::is_sorted(g.x.begin(), g.x.end()))
                     throw ConfigError("sampled potential: grid must be nondecreasing");
                 },
                 [](const potential::Sum& s) {
                   if (s.a->channels() != s.b->channels()) throw ConfigError("potential sum: channel mismatch");
                 },
                 [](const potential::Periodic& p) {
                   if (!(p.period > 0) || p.cells < 1) throw ConfigError("periodic potential: bad period");
                 },
                 [](const auto&) {},
             },
             v_);
}

PotentialMatrix PotentialMatrix::zero(int n) { return PotentialMatrix(potential::Zero{n}); }

PotentialMatrix PotentialMatrix::piecewise(std::vector<double> edges, std::vector<Mat> blocks) {
  return PotentialMatrix(potential::PiecewiseConstant{std::move(edges), std::move(blocks)});
}

PotentialMatrix PotentialMatrix::comb(double period, const Mat& strength, double origin, long first, long last) {
  return PotentialMatrix(potential::DeltaComb{period, strength, origin, first, last});
}

PotentialMatrix PotentialMatrix::closed_form(std::string formula, std::vector<double> params, int n,
                                             std::function<Mat(double)> eval) {
  return PotentialMatrix(potential::ClosedForm{std::move(formula), std::move(params), std::move(eval), n});
}

PotentialMatrix PotentialMatrix::sampled(std::vector<double> x, int n, std::vector<double> data) {
  return PotentialMatrix(potential::GridSampled{std::move(x), n, std::move(data)});
}

PotentialMatrix PotentialMatrix::sum(PotentialMatrix a, PotentialMatrix b) {
  return PotentialMatrix(potential::Sum{std::make_shared<const PotentialMatrix>(std::move(a)),
                                        std::make_shared<const PotentialMatrix>(std::move(b))});
}

PotentialMatrix PotentialMatrix::periodic(PotentialMatrix cell, double period, int cells) {
  return PotentialMatrix(potential::Periodic{std::make_shared<const PotentialMatrix>(std::move(cell)), period, cells});
}

Mat PotentialMatrix::smooth(double x, Side side) const {
  return std::visit(
      overloaded{
          [&](const potential::Zero& z) { return zeros(z.n); },
          [&](const potential::PiecewiseConstant& p) {
            const auto& e = p.edges;
            long idx = side == Side::right ? std::upper_bound(e.begin(), e.end(), x) - e.begin() - 1
                                           : std::lower_bound(e.begin(), e.end(), x) - e.begin() - 1;
            if (idx < 0 || idx >= static_cast<long>(p.blocks.size())) return zeros(n_);
            return p.blocks[idx];
          },
          [&](const potential::DeltaComb&) { return zeros(n_); },
          [&](const potential::ClosedForm& c) { return c.eval(x); },
          [&](const potential::GridSampled& g) { return interpolate(g, x, side); },
          [&](const potential::Sum& s) { return Mat(s.a->smooth(x, side) + s.b->smooth(x, side)); },
          [&](const potential::Periodic& p) {
            const double len = p.period * p.cells;
            if (x < 0 || x > len || (x == 0 && side == Side::left) || (x == len && side == Side::right))
              return zeros(n_);
            long l = static_cast<long>(std::floor(x / p.period));
            double local = x - l * p.period;
            if (local == 0.0 && side == Side::left) {
              --l;
              local = p.period;
            }
            if (l >= p.cells) {
              l = p.cells - 1;
              local = p.period;
            }
            return p.cell->smooth(local, side);
          },
      },
      v_);
}

std::vector<DeltaTerm> PotentialMatrix::deltas(double lo, double hi) const {
  return std::visit(
      overloaded{
          [&](const potential::DeltaComb& c) {
            std::vector<DeltaTerm> out;
            long j0 = static_cast<long>(std::ceil((lo - c.origin) / c.period - 1e-9));
            long j1 = static_cast<long>(std::floor((hi - c.origin) / c.period + 1e-9));
            j0 = std::max(j0, c.first);
            j1 = std::min(j1, c.last);
            for (long j = j0; j <= j1; ++j) {
              const double xj = c.origin + static_cast<double>(j) * c.period;
              if (xj >= lo && xj <= hi) out.push_back({xj, c.strength});
            }
            return out;
          },
          [&](const potential::Sum& s) {
            auto out = s.a->deltas(lo, hi);
            merge_deltas(out, s.b->deltas(lo, hi));
            return out;
          },
          [&](const potential::Periodic& p) {
            std::vector<DeltaTerm> out;
            for (int l = 0; l < p.cells; ++l) {
              const double shift = l * p.period;
              if (shift + p.period < lo || shift > hi) continue;
              for (auto d : p.cell->deltas(std::max(0.0, lo - shift), std::min(p.period, hi - shift))) {
                if (d.x >= p.period) continue;  // belongs to the next cell
                d.x += shift;
                out.push_back(d);
              }
            }
            std::sort(out.begin(), out.end(), [](const DeltaTerm& a, const DeltaTerm& b) { return a.x < b.x; });
            return out;
          },
          [&](const auto&) { return std::vector<DeltaTerm>{}; },
      },
      v_);
}

std::vector<double> PotentialMatrix::breakpoints(double lo, double hi) const {
  std::vector<double> out;
  auto keep = [&](double x) {
    if (x >= lo && x <= hi) out.push_back(x);
  };
  std::visit(overloaded{
                 [&](const potential::PiecewiseConstant& p) {
                   for (double e : p.edges) keep(e);
                 },
                 [&](const potential::DeltaComb&) {
                   for (const auto& d : deltas(lo, hi)) out.push_back(d.x);
                 },
                 [&](const potential::GridSampled& g) {
                   for (std::size_t i = 1; i < g.x.size(); ++i)
                     if (g.x[i] == g.x[i - 1]) keep(g.x[i]);
                 },
                 [&](const potential::Sum& s) {
                   for (double b : s.a->breakpoints(lo, hi)) out.push_back(b);
                   for (double b : s.b->breakpoints(lo, hi)) out.push_back(b);
                 },
                 [&](const potential::Periodic& p) {
                   for (int l = 0; l <= p.cells; ++l) keep(l * p.period);
                   for (int l = 0; l < p.cells; ++l)
                     for (double b : p.cell->breakpoints(0.0, p.period)) keep(b + l * p.period);
                 },
                 [&](const auto&) {},
             },
             v_);
  return sorted_unique(std::move(out));
}

ChannelSystem::ChannelSystem(std::vector<double> eps, DomainKind kind, double xmax, PotentialMatrix v)
    : thresholds(std::move(eps)), domain(kind), x_max(xmax), potential(std::move(v)) {
  validate();
}

Mat ChannelSystem::threshold_matrix() const {
  Mat l = Mat::Zero(channels(), channels());
  for (int a = 0; a < channels(); ++a) l(a, a) = thresholds[a];
  return l;
}

void ChannelSystem::validate() const {
  if (thresholds.empty()) throw ConfigError("system: at least one channel required");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw ConfigError("system: thresholds must be nondecreasing");
  if (potential.channels() != channels()) throw ConfigError("system: potential size differs from channel count");
  if (!(x_max > 0)) throw ConfigError("system: x_max must be positive");
}

PotentialValue evaluate_potential(const ChannelSystem& sys, double x) {
  if (!(x >= sys.lo() && x <= sys.hi())) {
    std::ostringstream os;
    os << "evaluate_potential: x = " << x << " outside [" << sys.lo() << ", " << sys.hi() << "]";
    throw DomainError(os.str());
  }
  return {sys.potential.smooth(x), sys.potential.deltas(x, x)};
}

Mat MatrixSolution::value(std::size_t i) const {
  Mat m(rows, cols);
  const std::size_t k = static_cast<std::size_t>(rows * cols);
  std::copy_n(val.begin() + i * k, k, m.data());
  return m;
}

Mat MatrixSolution::derivative(std::size_t i) const {
  Mat m(rows, cols);
  const std::size_t k = static_cast<std::size_t>(rows * cols);
  std::copy_n(der.begin() + i * k, k, m.data());
  return m;
}

void MatrixSolution::push(double xi, const Mat& v, const Mat& d) {
  x.push_back(xi);
  val.insert(val.end(), v.data(), v.data() + rows * cols);
  der.insert(der.end(), d.data(), d.data() + rows * cols);
}

void MatrixSolution::set(std::size_t i, const Mat& v, const Mat& d) {
  const std::size_t k = static_cast<std::size_t>(rows * cols);
  std::copy_n(v.data(), k, val.begin() + i * k);
  std::copy_n(d.data(), k, der.begin() + i * k);
}

void MatrixSolution::reserve(std::size_t n) {
  x.reserve(n);
  val.reserve(n * rows * cols);
  der.reserve(n * rows * cols);
}

MatrixSolution MatrixSolution::column(int j) const {
  Mat sel = Mat::Zero(cols, 1);
  sel(j, 0) = 1.0;
  return times(sel);
}

MatrixSolution MatrixSolution::times(const Mat& c) const {
  MatrixSolution out(energy, kind, rows, static_cast<int>(c.cols()));
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push(x[i], value(i) * c, derivative(i) * c);
  return out;
}

SpectralDatum SpectralDatum::make(const std::vector<double>& thresholds, double e, WeightKind k, const Vec& w) {
  if (static_cast<std::size_t>(w.size()) != thresholds.size())
    throw ConfigError("spectral datum: weight vector length differs from channel count");
  SpectralDatum d;
  d.energy = e;
  d.kind = k;
  d.weights = w;
  d.bsec = std::any_of(thresholds.begin(), thresholds.end(), [&](double t) { return e >= t; });
  return d;
}

Vec SpectralDatum::kappa(const std::vector<double>& thresholds) const {
  Vec k(static_cast<int>(thresholds.size()));
  for (std::size_t a = 0; a < thresholds.size(); ++a) {
    if (!(thresholds[a] > energy)) throw ConfigError("spectral datum: channel open at this energy, kappa not real");
    k(a) = std::sqrt(thresholds[a] - energy);
  }
  return k;
}

CMat ScatteringData::whole_line_s() const {
  const int no = open_count();
  CMat s(2 * no, 2 * no);
  s.topLeftCorner(no, no) = r_left;
  s.topRightCorner(no, no) = t_right;
  s.bottomLeftCorner(no, no) = t_left;
  s.bottomRightCorner(no, no) = r_right;
  return s;
}

std::vector<double> make_grid(double lo, double hi, double h, const std::vector<double>& breakpoints) {
  if (!(h > 0)) throw ConfigError("grid: step must be positive");
  std::vector<double> cuts{lo};
  for (double b : breakpoints)
    if (b > lo && b < hi) cuts.push_back(b);
  cuts.push_back(hi);
  cuts = sorted_unique(std::move(cuts));
  std::vector<double> grid{lo};
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    const long m = std::max(1L, static_cast<long>(std::ceil((b - a) / h - 1e-9)));
    for (long k = 1; k < m; ++k) grid.push_back(a + (b - a) * static_cast<double>(k) / static_cast<double>(m));
    grid.push_back(b);
  }
  return grid;
}

std::vector<double> refine_grid(const std::vector<double>& grid) {
  std::vector<double> out;
  out.reserve(2 * grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) out.push_back(0.5 * (grid[i - 1] + grid[i]));
    out.push_back(grid[i]);
  }
  return out;
}

double symmetry_defect(const PotentialMatrix& v, const std::vector<double>& xs) {
  double worst = 0.0;
  for (double x : xs) {
    const Mat m = v.smooth(x);
    worst = std::max(worst, (m - m.transpose()).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace mcd
