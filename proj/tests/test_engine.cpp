#include <cmath>
#include <numbers>

#include "doctest.h"
#include "fixtures.hpp"
#include "mcd/engine.hpp"

using namespace mcd;
using std::numbers::pi;

namespace {

std::size_t node_at(const MatrixSolution& s, double x) {
  return static_cast<std::size_t>(std::lower_bound(s.x.begin(), s.x.end(), x - 1e-12) - s.x.begin());
}

ChannelSystem eq18(double v, double a) {
  return ChannelSystem({0.0, 0.0}, DomainKind::whole_line, 40.0,
                       PotentialMatrix::piecewise({0.0, a}, {fx::m2(v, -v, -v, v)}));
}

ChannelSystem double_barrier() {
  return ChannelSystem({0.0}, DomainKind::whole_line, 10.0,
                       PotentialMatrix::piecewise({0.0, 0.5, 2.5, 3.0}, {fx::m1(50), fx::m1(0), fx::m1(50)}));
}

}  // namespace

TEST_CASE("regular solution of free motion") {
  ChannelSystem s({0.0}, DomainKind::half_line, 10.0, PotentialMatrix::zero(1));
  const auto phi = integrate_regular(s, 1.0);
  CHECK(phi.value(0)(0, 0) == 0.0);
  CHECK(phi.derivative(0)(0, 0) == 1.0);
  for (double x : {0.5, 3.0, 7.25, 10.0}) {
    const auto i = node_at(phi, x);
    CHECK(phi.value(i)(0, 0) == doctest::Approx(std::sin(phi.x[i])).epsilon(1e-10));
    CHECK(phi.derivative(i)(0, 0) == doctest::Approx(std::cos(phi.x[i])).epsilon(1e-10));
  }
}

TEST_CASE("constant coupling: identical boundary conditions give k = sqrt(E - W)") {
  const double w = 1.0, e = 3.0;
  ChannelSystem s({0.0, 0.0}, DomainKind::half_line, 8.0, PotentialMatrix::closed_form("const", {w}, 2, [=](double) {
                    return fx::m2(0, w, w, 0);
                  }));
  const auto phi = integrate_regular(s, e);
  const double k = std::sqrt(e - w), kt = std::sqrt(e + w);
  Mat plus(2, 1), minus(2, 1);
  plus << 1, 1;
  minus << 1, -1;
  for (std::size_t i = 0; i < phi.size(); i += 500) {
    const Mat p = phi.value(i) * plus, m = phi.value(i) * minus;
    CHECK(p(0, 0) == doctest::Approx(std::sin(k * phi.x[i]) / k).epsilon(1e-9));
    CHECK(p(1, 0) == doctest::Approx(p(0, 0)).epsilon(1e-12));
    CHECK(m(0, 0) == doctest::Approx(std::sin(kt * phi.x[i]) / kt).epsilon(1e-9));
  }
}

TEST_CASE("regular solution is stable under step halving") {
  const auto s = fx::fig3_base(4.0);
  SolverConfig a, b;
  b.h = a.h / 2;
  const auto pa = integrate_regular(s, -3.0, a), pb = integrate_regular(s, -3.0, b);
  const Mat va = pa.value(node_at(pa, pi)), vb = pb.value(node_at(pb, pi));
  CHECK((va - vb).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(residual(s, pa, -3.0) < 1e-6);
}

TEST_CASE("overflow in deeply closed channels reports where") {
  ChannelSystem s({0.0, 4000.0}, DomainKind::half_line, 30.0, PotentialMatrix::zero(2));
  try {
    integrate_regular(s, -1.0);
    FAIL("expected overflow");
  } catch (const OverflowError& e) {
    CHECK(e.where() > 0.0);
    CHECK(e.where() < 30.0);
  }
}

TEST_CASE("Jost solutions of free motion") {
  ChannelSystem s1({0.0}, DomainKind::half_line, 20.0, PotentialMatrix::zero(1));
  const auto f = integrate_jost(s1, -1.0);
  for (std::size_t i = 0; i < f.size(); i += 1000) CHECK(f.value(i)(0, 0) == doctest::Approx(std::exp(-f.x[i])));

  ChannelSystem s2({0.0, 1.0}, DomainKind::half_line, 20.0, PotentialMatrix::zero(2));
  const auto g = integrate_jost(s2, -0.5);
  for (std::size_t i = 0; i < g.size(); i += 1000) {
    const Mat v = g.value(i);
    CHECK(v(0, 0) == doctest::Approx(std::exp(-std::sqrt(0.5) * g.x[i])).epsilon(1e-9));
    CHECK(v(1, 1) == doctest::Approx(std::exp(-std::sqrt(1.5) * g.x[i])).epsilon(1e-9));
    CHECK(std::abs(v(0, 1)) < 1e-14);
  }
}

TEST_CASE("Jost start needs a decayed potential") {
  const auto s = fx::fig3_base();
  SolverConfig cfg;
  cfg.x_match = 2.0;
  CHECK_THROWS_AS(integrate_jost(s, -3.0, cfg), ConfigError);
  cfg.x_match = 5.0;
  CHECK_NOTHROW(integrate_jost(s, -3.0, cfg));
}

TEST_CASE("deep well levels") {
  const auto s = fx::deep_well();
  SolverConfig cfg;
  cfg.bracket_resolution = 0.05;
  const auto st = find_bound_states(s, 0.5, 10.0, cfg);
  REQUIRE(st.size() == 3);
  CHECK(std::abs(st[0].energy - 1.0) < 1e-3);
  for (int n = 1; n <= 3; ++n)
    CHECK(st[n - 1].energy == doctest::Approx(fx::finite_wall_level(n, pi, 1e6)).epsilon(1e-9));
  CHECK(orthonormality_check(st) < 1e-6);
}

TEST_CASE("constant coupling splits degenerate levels by +-W") {
  const double depth = 1e6, w = 2.0;
  ChannelSystem s({depth, depth}, DomainKind::half_line, 6.0,
                  PotentialMatrix::piecewise({0.0, pi}, {fx::m2(-depth, w, w, -depth)}));
  SolverConfig cfg;
  cfg.bracket_resolution = 0.05;
  const auto st = find_bound_states(s, -1.5, 5.0, cfg);
  REQUIRE(st.size() == 3);
  // Lowest pair within the textbook tolerance, all against the exact finite-wall roots.
  CHECK(std::abs(st[0].energy - (1.0 - w)) < 1e-3);
  CHECK(std::abs(st[2].energy - (1.0 + w)) < 1e-3);
  CHECK(st[0].energy == doctest::Approx(-w + fx::finite_wall_level(1, pi, depth + w)).epsilon(1e-9));
  CHECK(st[1].energy == doctest::Approx(-w + fx::finite_wall_level(2, pi, depth + w)).epsilon(1e-9));
  CHECK(st[2].energy == doctest::Approx(w + fx::finite_wall_level(1, pi, depth - w)).epsilon(1e-9));
}

TEST_CASE("three lowest states of a two-channel well are orthonormal") {
  ChannelSystem s({0.0, 1.0}, DomainKind::half_line, 20.0,
                  PotentialMatrix::piecewise({0.0, pi}, {fx::m2(-20, 1.5, 1.5, -18)}));
  SolverConfig cfg;
  cfg.bracket_resolution = 0.05;
  auto st = find_bound_states(s, -25.0, -1.0, cfg);
  REQUIRE(st.size() >= 3);
  st.resize(3);
  CHECK(orthonormality_check(st) < 1e-6);
  for (const auto& b : st) {
    CHECK(residual(s, b.psi, b.energy) < 1e-5);
    REQUIRE(b.c.has_value());
    CHECK(b.c->weights.norm() > 0);
  }
  CHECK(orthonormality_check({st[0]}) == doctest::Approx(std::abs(overlap(st[0], st[0]) - 1.0)));
}

TEST_CASE("bound energies are stable under step halving") {
  const auto s = fx::fig3_base();
  SolverConfig a;
  a.bracket_resolution = 0.05;
  SolverConfig b = a;
  b.h = a.h / 2;
  const auto sa = find_bound_states(s, -6.0, -0.01, a);
  const auto sb = find_bound_states(s, -6.0, -0.01, b);
  REQUIRE(sa.size() == sb.size());
  REQUIRE(!sa.empty());
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(std::abs(sa[i].energy - sb[i].energy) < 1e-7);
}

TEST_CASE("empty window is not an error") {
  const auto s = fx::fig3_base();
  SolverConfig cfg;
  cfg.bracket_resolution = 0.05;
  CHECK(find_bound_states(s, -0.9, -0.01, cfg).empty());
}

TEST_CASE("free whole line is transparent") {
  ChannelSystem s({0.0, 1.0}, DomainKind::whole_line, 40.0, PotentialMatrix::zero(2));
  const auto sd = scattering_matrix(s, 2.5);
  CHECK((sd.t_right - CMat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sd.r_right.cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sd.unitarity_defect < 1e-12);
  CHECK_THROWS_AS(scattering_matrix(s, 1.0 + 1e-10), ThresholdError);
}

TEST_CASE("identical boundary conditions pass a cancelling coupled barrier") {
  const auto s = eq18(3.0, 1.5);
  for (double e : {0.7, 2.0, 5.0}) {
    const auto sd = scattering_matrix(s, e);
    CVec sym(2), anti(2);
    sym << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    anti << 1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0);
    CHECK((sd.t_right * sym).squaredNorm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK((sd.r_right * anti).squaredNorm() > 1e-3);
    CHECK(sd.unitarity_defect < 1e-6);
  }
}

TEST_CASE("unitarity with a closed channel and on the half line") {
  for (double e : {0.4, 0.9, 1.3, 3.0}) CHECK(scattering_matrix(fx::fig3_base(), e).unitarity_defect < 1e-6);
  ChannelSystem s({0.0, 1.0}, DomainKind::whole_line, 40.0,
                  PotentialMatrix::piecewise({-1.0, 0.5, 2.0}, {fx::m2(-3, 0.8, 0.8, 1), fx::m2(2, -0.4, -0.4, -1)}));
  for (double e : {0.4, 1.3, 3.0}) CHECK(scattering_matrix(s, e).unitarity_defect < 1e-6);
}

TEST_CASE("S matrix is stable under step halving") {
  SolverConfig a, b;
  b.h = a.h / 2;
  for (double e : {0.5, 2.0}) {
    const auto sa = scattering_matrix(fx::fig3_base(), e, a), sb = scattering_matrix(fx::fig3_base(), e, b);
    CHECK((sa.S - sb.S).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("flux") {
  CVec p(1), d(1);
  const double k = 1.7, x = 0.3;
  p << std::exp(cplx(0, k * x));
  d << cplx(0, k) * p(0);
  CHECK(total_flux(p, d) == doctest::Approx(k));

  const auto s = eq18(3.0, 1.5);
  CVec inc(2);
  inc << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const auto sol = scattering_solution(s, 2.0, inc);
  auto at = [&](double xx) {
    const std::size_t i = std::lower_bound(sol.x.begin(), sol.x.end(), xx - 1e-12) - sol.x.begin();
    return total_flux(sol.psi[i], sol.dpsi[i]);
  };
  const double f0 = at(-30.0);
  CHECK(std::abs(f0) > 0.1);
  CHECK(std::abs(at(30.0) - f0) <= 1e-8 * std::abs(f0));
}

TEST_CASE("partial fluxes vary inside a coupled region while the total is constant") {
  ChannelSystem s({0.0, 1.0}, DomainKind::whole_line, 40.0,
                  PotentialMatrix::piecewise({0.0, pi}, {fx::m2(-5, 0.3, 0.3, -5)}));
  CVec inc(2);
  inc << 1.0, 0.0;
  const auto sol = scattering_solution(s, 3.0, inc);
  double tmin = 1e300, tmax = -1e300, pmin = 1e300, pmax = -1e300;
  for (std::size_t i = 0; i < sol.x.size(); i += 50) {
    const double t = total_flux(sol.psi[i], sol.dpsi[i]);
    const double p1 = partial_flux(sol.psi[i], sol.dpsi[i])(0);
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
    pmin = std::min(pmin, p1);
    pmax = std::max(pmax, p1);
  }
  CHECK(tmax - tmin <= 1e-8 * std::abs(tmax));
  CHECK(pmax - pmin > 1e-3);
}

TEST_CASE("resonance width estimators") {
  ChannelSystem smooth({0.0}, DomainKind::whole_line, 20.0, PotentialMatrix::closed_form("gauss", {0.3}, 1, [](double x) {
                         return fx::m1(0.3 * std::exp(-x * x));
                       }));
  CHECK_FALSE(estimate_resonance_width(smooth, 2.0, 1.0, 0).found);

  const auto s = double_barrier();
  const auto r = estimate_resonance_width(s, 2.0, 1.5, 0);
  REQUIRE(r.found);
  CHECK(r.width_time_delay > 0);
  CHECK(std::abs(r.width_time_delay / r.width_lorentzian - 1.0) < 0.2);
}

TEST_CASE("monodromy of free motion") {
  ChannelSystem s({0.0}, DomainKind::whole_line, 10.0, PotentialMatrix::zero(1));
  const Mat m = monodromy(s, 4.0, 0.0, 1.0);
  CHECK(m(0, 0) == doctest::Approx(std::cos(2.0)));
  CHECK(m(0, 1) == doctest::Approx(std::sin(2.0) / 2.0));
}
