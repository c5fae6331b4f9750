#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mcd/domain.hpp"

using namespace mcd;

TEST_CASE("free motion evaluates to zero without deltas") {
  ChannelSystem s({0.0, 1.0}, DomainKind::whole_line, 40.0, PotentialMatrix::zero(2));
  for (double x : {-40.0, -3.0, 0.0, 12.5, 40.0}) {
    const auto v = evaluate_potential(s, x);
    CHECK(v.smooth.cwiseAbs().maxCoeff() == 0.0);
    CHECK(v.deltas.empty());
  }
}

TEST_CASE("rectangular coupled block at x = 1") {
  const auto s = fx::fig3_base();
  const auto v = evaluate_potential(s, 1.0);
  CHECK(v.smooth(0, 0) == -5.0);
  CHECK(v.smooth(1, 1) == -5.0);
  CHECK(v.smooth(0, 1) == 0.3);
  CHECK(v.smooth(1, 0) == 0.3);
  CHECK(evaluate_potential(s, 4.0).smooth.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("outside the domain is an error") {
  const auto s = fx::fig3_base();
  CHECK_THROWS_AS(evaluate_potential(s, -0.1), DomainError);
  CHECK_THROWS_AS(evaluate_potential(s, 30.5), DomainError);
}

TEST_CASE("one-sided limits at a step") {
  const auto p = PotentialMatrix::piecewise({0.0, 1.0, 2.0}, {fx::m1(3.0), fx::m1(-1.0)});
  CHECK(p.smooth(1.0, Side::left)(0, 0) == 3.0);
  CHECK(p.smooth(1.0, Side::right)(0, 0) == -1.0);
  CHECK(p.smooth(2.0, Side::right)(0, 0) == 0.0);
  CHECK(p.smooth(0.0, Side::left)(0, 0) == 0.0);
}

TEST_CASE("delta comb reports deltas separately") {
  const Mat d = fx::m2(6, 1, 1, 5);
  ChannelSystem s({0.0, 1.0}, DomainKind::whole_line, 10.0, PotentialMatrix::comb(std::numbers::pi, d));
  const auto v = evaluate_potential(s, std::numbers::pi);
  CHECK(v.smooth.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(v.deltas.size() == 1);
  CHECK(v.deltas[0].strength == d);
  CHECK(evaluate_potential(s, 1.0).deltas.empty());
  CHECK(s.potential.deltas(-10, 10).size() == 7);
}

TEST_CASE("periodic cell repeats deltas once per cell") {
  auto cell = PotentialMatrix::sum(PotentialMatrix::comb(2.0, fx::m1(1.5), 0.0, 0, 1),
                                   PotentialMatrix::piecewise({0.5, 1.0}, {fx::m1(-2.0)}));
  auto p = PotentialMatrix::periodic(cell, 2.0, 3);
  const auto ds = p.deltas(0.0, 6.0);
  REQUIRE(ds.size() == 3);
  CHECK(ds[2].x == doctest::Approx(4.0));
  CHECK(p.smooth(4.7)(0, 0) == -2.0);
  CHECK(p.smooth(6.5)(0, 0) == 0.0);
}

TEST_CASE("sampled potential interpolates linearly and keeps jumps") {
  auto p = PotentialMatrix::sampled({0.0, 1.0, 1.0, 2.0}, 1, {0.0, 2.0, 5.0, 7.0});
  CHECK(p.smooth(0.5)(0, 0) == doctest::Approx(1.0));
  CHECK(p.smooth(1.0, Side::left)(0, 0) == 2.0);
  CHECK(p.smooth(1.0, Side::right)(0, 0) == 5.0);
  CHECK(p.smooth(1.5)(0, 0) == doctest::Approx(6.0));
  CHECK(p.breakpoints(0.0, 2.0) == std::vector<double>{1.0});
}

TEST_CASE("closed form symmetric and stable under re-evaluation") {
  auto f = [](double x) { return fx::m2(-std::exp(-x * x), 0.2 / std::cosh(x), 0.2 / std::cosh(x), std::sin(x)); };
  auto p = PotentialMatrix::closed_form("test", {}, 2, f);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-40, 40);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = u(rng);
  CHECK(symmetry_defect(p, xs) == 0.0);
  const auto g1 = make_grid(-5, 5, 0.01, {});
  const auto g2 = refine_grid(g1);
  for (std::size_t i = 0; i < g1.size(); ++i)
    CHECK((p.smooth(g1[i]) - p.smooth(g2[2 * i])).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("system validation") {
  CHECK_THROWS_AS(ChannelSystem({1.0, 0.0}, DomainKind::half_line, 30.0, PotentialMatrix::zero(2)), ConfigError);
  CHECK_THROWS_AS(ChannelSystem({0.0}, DomainKind::half_line, 30.0, PotentialMatrix::zero(2)), ConfigError);
}

TEST_CASE("grid puts breakpoints on nodes") {
  const auto g = make_grid(0.0, 10.0, 0.3, {std::numbers::pi, 5.0});
  CHECK(std::find(g.begin(), g.end(), std::numbers::pi) != g.end());
  CHECK(std::find(g.begin(), g.end(), 5.0) != g.end());
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] - g[i - 1] <= 0.3 + 1e-12);
}

TEST_CASE("spectral datum flags embedded energies") {
  Vec w(2);
  w << 1, 1;
  CHECK_FALSE(SpectralDatum::make({0.0, 1.0}, -0.5, WeightKind::M, w).bsec);
  const auto d = SpectralDatum::make({0.0, 1.0}, 0.5, WeightKind::C, w);
  CHECK(d.bsec);
  CHECK_THROWS_AS(d.kappa({0.0, 1.0}), ConfigError);
}
