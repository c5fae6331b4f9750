#pragma once

// Systems shared by several test files, and small independent oracles.

#include <cmath>
#include <functional>
#include <numbers>

#include "mcd/domain.hpp"

namespace fx {

using mcd::ChannelSystem;
using mcd::DomainKind;
using mcd::Mat;
using mcd::PotentialMatrix;

inline Mat m2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

inline Mat m1(double a) {
  Mat m(1, 1);
  m << a;
  return m;
}

/// Two channels, thresholds (0, 1), V11 = V22 = -5, V12 = 0.3 on (0, pi).
inline ChannelSystem fig3_base(double xmax = 30.0) {
  return ChannelSystem({0.0, 1.0}, DomainKind::half_line, xmax,
                       PotentialMatrix::piecewise({0.0, std::numbers::pi}, {m2(-5, 0.3, 0.3, -5)}));
}

/// Infinite-like well of width pi: threshold `depth`, V = -depth inside.
inline ChannelSystem deep_well(double depth = 1e6, double xmax = 6.0) {
  return ChannelSystem({depth}, DomainKind::half_line, xmax,
                       PotentialMatrix::piecewise({0.0, std::numbers::pi}, {m1(-depth)}));
}

/// Bisection for a sign change of f on [a, b].
inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a);
  for (int i = 0; i < 200 && b - a > 1e-15 * std::max(1.0, std::abs(a)); ++i) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if ((fm < 0) == (fa < 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Exact levels of a half-line well (hard wall at 0) of width L with step height U at L,
/// measured from the well floor: k cot(kL) = -sqrt(U - k^2).
inline double finite_wall_level(int n, double L, double U) {
  auto f = [&](double k) { return k * std::cos(k * L) + std::sqrt(U - k * k) * std::sin(k * L); };
  const double k = bisect(f, (n - 0.5) / L * std::numbers::pi + 1e-9, n / L * std::numbers::pi);
  return k * k;
}

}  // namespace fx
