#pragma once

// Core value types: channel systems, potential matrices, sampled solutions and
// spectral data. Units are hbar^2/2m = 1, so channel alpha obeys
//   -psi_a'' + sum_b V_ab psi_b = (E - eps_a) psi_a.

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "mcd/errors.hpp"

namespace mcd {

inline constexpr int kMaxChannels = 4;
inline constexpr int kMaxPhase = 2 * kMaxChannels;

// Fixed upper bound keeps every small matrix on the stack.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxPhase, kMaxPhase>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxPhase, 1>;
using cplx = std::complex<double>;
using CMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxPhase, kMaxPhase>;
using CVec = Eigen::Matrix<cplx, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxPhase, 1>;

/// Which one-sided limit to take at a discontinuity.
enum class Side { left, right };

/// A point interaction: psi'(x0+) - psi'(x0-) = strength * psi(x0).
struct DeltaTerm {
  double x = 0.0;
  Mat strength;
};

class PotentialMatrix;
using PotentialPtr = std::shared_ptr<const PotentialMatrix>;

namespace potential {

struct Zero {
  int n = 1;
};

/// Constant blocks on [edges[i], edges[i+1]); zero outside [edges.front(), edges.back()].
struct PiecewiseConstant {
  std::vector<double> edges;
  std::vector<Mat> blocks;
};

/// Strength matrix placed at origin + j*period for j in [first, last].
struct DeltaComb {
  double period = 1.0;
  Mat strength;
  double origin = 0.0;
  long first = -1000000;
  long last = 1000000;
};

/// Hand-coded evaluator with the parameters that generated it.
struct ClosedForm {
  std::string formula;
  std::vector<double> params;
  std::function<Mat(double)> eval;
  int n = 1;
};

/// Samples on a nondecreasing grid, linearly interpolated. A repeated node
/// encodes a jump (first copy = left limit, second = right limit). Outside the
/// sampled range the end values are held.
struct GridSampled {
  std::vector<double> x;
  int n = 1;
  std::vector<double> data;  // n*n column-major per node
};

struct Sum {
  PotentialPtr a, b;
};

/// cell(x - l*period) for x in [0, cells*period), zero outside. Deltas of the
/// cell are repeated in every copy.
struct Periodic {
  PotentialPtr cell;
  double period = 1.0;
  int cells = 1;
};

}  // namespace potential

/// Symmetric real N x N interaction matrix V(x) plus point interactions.
class PotentialMatrix {
 public:
  using Variant = std::variant<potential::Zero, potential::PiecewiseConstant, potential::DeltaComb,
                               potential::ClosedForm, potential::GridSampled, potential::Sum,
                               potential::Periodic>;

  explicit PotentialMatrix(Variant v);

  static PotentialMatrix zero(int n);
  static PotentialMatrix piecewise(std::vector<double> edges, std::vector<Mat> blocks);
  static PotentialMatrix comb(double period, const Mat& strength, double origin = 0.0, long first = -1000000,
                              long last = 1000000);
  static PotentialMatrix closed_form(std::string formula, std::vector<double> params, int n,
                                     std::function<Mat(double)> eval);
  static PotentialMatrix sampled(std::vector<double> x, int n, std::vector<double> data);
  static PotentialMatrix sum(PotentialMatrix a, PotentialMatrix b);
  static PotentialMatrix periodic(PotentialMatrix cell, double period, int cells);

  int channels() const { return n_; }
  const Variant& variant() const { return v_; }

  /// Smooth part at x; at a jump the requested one-sided limit.
  Mat smooth(double x, Side side = Side::right) const;
  /// Delta terms located in the closed interval [lo, hi], sorted by location.
  std::vector<DeltaTerm> deltas(double lo, double hi) const;
  /// Locations in [lo, hi] where the smooth part jumps or a delta sits.
  std::vector<double> breakpoints(double lo, double hi) const;

 private:
  Variant v_;
  int n_;
};

enum class DomainKind { half_line, whole_line, interval };

/// N coupled channels with thresholds eps_a on a half line [0, x_max] (regular at 0),
/// the whole line [-x_max, x_max], or a box [0, x_max] with psi = 0 at both ends.
struct ChannelSystem {
  std::vector<double> thresholds;
  DomainKind domain = DomainKind::half_line;
  double x_max = 30.0;
  PotentialMatrix potential = PotentialMatrix::zero(1);

  ChannelSystem() = default;
  ChannelSystem(std::vector<double> eps, DomainKind kind, double xmax, PotentialMatrix v);

  int channels() const { return static_cast<int>(thresholds.size()); }
  double lo() const { return domain == DomainKind::whole_line ? -x_max : 0.0; }
  double hi() const { return x_max; }
  Mat threshold_matrix() const;
  void validate() const;
};

inline constexpr double kDefaultHalfLineXMax = 30.0;
inline constexpr double kDefaultWholeLineXMax = 40.0;

struct PotentialValue {
  Mat smooth;
  std::vector<DeltaTerm> deltas;
};

/// Smooth part and any delta registered exactly at x.
PotentialValue evaluate_potential(const ChannelSystem& sys, double x);

/// Sampled N x cols matrix function with derivative. Derivatives at a delta node
/// are right limits.
struct MatrixSolution {
  enum class Kind { regular, jost, left_jost, bound, seed, mapped, general };

  double energy = 0.0;
  Kind kind = Kind::general;
  int rows = 0;
  int cols = 0;
  std::vector<double> x;
  std::vector<double> val;
  std::vector<double> der;

  MatrixSolution() = default;
  MatrixSolution(double e, Kind k, int r, int c) : energy(e), kind(k), rows(r), cols(c) {}

  std::size_t size() const { return x.size(); }
  Mat value(std::size_t i) const;
  Mat derivative(std::size_t i) const;
  void push(double xi, const Mat& v, const Mat& d);
  void set(std::size_t i, const Mat& v, const Mat& d);
  void reserve(std::size_t n);
  /// Column j as a single-column solution.
  MatrixSolution column(int j) const;
  /// Right-multiply every sample by c (cols x k).
  MatrixSolution times(const Mat& c) const;
};

enum class WeightKind { C, M };

/// Energy with its spectral weight vector: C = psi'(0), or M = asymptotic
/// amplitude psi_a -> M_a exp(-sqrt(eps_a - E) x).
struct SpectralDatum {
  double energy = 0.0;
  WeightKind kind = WeightKind::C;
  Vec weights;
  bool bsec = false;  // E >= some threshold

  static SpectralDatum make(const std::vector<double>& thresholds, double e, WeightKind k, const Vec& w);
  /// kappa_a = sqrt(eps_a - E); throws if the channel is open.
  Vec kappa(const std::vector<double>& thresholds) const;
};

/// S-matrix data at one energy. Half line: S over open channels. Whole line:
/// incidence from the right (exp(-ikx)) and from the left (exp(+ikx)).
struct ScatteringData {
  double energy = 0.0;
  std::vector<bool> open;
  std::vector<int> open_index;
  CMat S;          // half line
  CMat t_right;    // whole line, incidence from +inf; column = incident channel
  CMat r_right;
  CMat t_left;
  CMat r_left;
  Vec eigenphases;
  double unitarity_defect = 0.0;

  int open_count() const { return static_cast<int>(open_index.size()); }
  /// Full 2No x 2No S for the whole line, [[r_left, t_right],[t_left, r_right]].
  CMat whole_line_s() const;
};

/// Grid with equal steps between breakpoints; every breakpoint is a node.
std::vector<double> make_grid(double lo, double hi, double h, const std::vector<double>& breakpoints);
/// Insert midpoints.
std::vector<double> refine_grid(const std::vector<double>& grid);

/// Max |V - V^T| on a set of points.
double symmetry_defect(const PotentialMatrix& v, const std::vector<double>& xs);

}  // namespace mcd
