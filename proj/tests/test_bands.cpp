#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "mcd/bands.hpp"
#include "mcd/errors.hpp"
#include "mcd/gl.hpp"

using namespace mcd;
using cplx = std::complex<double>;
using fx::m2;

namespace {

constexpr double pi = std::numbers::pi;

CombSpec fig6(double w = 1.0) { return CombSpec{pi, m2(6, w, w, 5), {0.0, 1.0}}; }

// Half traces of the one-period transfer matrix: for a 4 x 4 symplectic M the
// values c = (lambda + 1/lambda)/2 solve 4c^2 - 2 tr(M) c + e2(M) - 2 = 0.
std::array<cplx, 2> monodromy_branches(const CombSpec& spec, double e) {
  const Mat m = monodromy(spec.system(1), e, 0.0, spec.period);
  const double t1 = m.trace();
  const double t2 = 0.5 * (t1 * t1 - (m * m).trace());
  const cplx root = std::sqrt(cplx(t1 * t1 - 4.0 * (t2 - 2.0), 0.0));
  return {(t1 + root) / 4.0, (t1 - root) / 4.0};
}

double pair_distance(std::array<cplx, 2> a, std::array<cplx, 2> b) {
  auto less = [](cplx x, cplx y) { return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag(); };
  std::sort(a.begin(), a.end(), less);
  std::sort(b.begin(), b.end(), less);
  return std::max(std::abs(a[0] - b[0]), std::abs(a[1] - b[1]));
}

double scale(const std::array<cplx, 2>& a) { return std::max({1.0, std::abs(a[0]), std::abs(a[1])}); }

bool inside(const std::vector<Zone>& zs, double e) {
  return std::any_of(zs.begin(), zs.end(), [&](const Zone& z) { return z.lo <= e && e <= z.hi; });
}

}  // namespace

TEST_CASE("uncoupled comb dispersion") {
  SUBCASE("free") { CHECK(band_uncoupled(0.0, 1.0, 2.0, 5.0) == doctest::Approx(std::cos(4.0)).epsilon(1e-15)); }
  SUBCASE("threshold limit") {
    CHECK(band_uncoupled(6.0, 1.0, pi, 1.0) == doctest::Approx(1.0 + 3.0 * pi).epsilon(1e-14));
    CHECK(std::abs(band_uncoupled(6.0, 1.0, pi, 1.0 + 1e-9) - band_uncoupled(6.0, 1.0, pi, 1.0 - 1e-9)) < 1e-7);
  }
  SUBCASE("fig. 6 channel 1 at E = 2 against one period") {
    const double k = std::sqrt(2.0);
    const double expected = std::sin(k * pi) * 6.0 / (2.0 * k) + std::cos(k * pi);
    CHECK(band_uncoupled(6.0, 0.0, pi, 2.0) == doctest::Approx(expected).epsilon(1e-14));
    const CombSpec one{pi, fx::m1(6.0), {0.0}};
    const Mat m = monodromy(one.system(1), 2.0, 0.0, pi);
    CHECK(std::abs(0.5 * m.trace() - expected) < 1e-8);
  }
  SUBCASE("closed channel uses cosh") {
    const double kap = std::sqrt(2.0);
    CHECK(band_uncoupled(-1.0, 2.0, 1.5, 0.0) ==
          doctest::Approx(-std::sinh(kap * 1.5) / (2.0 * kap) + std::cosh(kap * 1.5)).epsilon(1e-14));
  }
}

TEST_CASE("coupled comb dispersion") {
  SUBCASE("W = 0 reduces to the single channels") {
    double worst = 0.0;
    const CombSpec s = fig6(0.0);
    for (double e = -3.0; e <= 20.0; e += 0.01) {
      const auto c = band_coupled(s, e);
      const double u1 = band_uncoupled(6.0, 0.0, pi, e), u2 = band_uncoupled(5.0, 1.0, pi, e);
      CHECK(c[0].imag() == 0.0);
      worst = std::max(worst, std::abs(c[0].real() - std::max(u1, u2)) + std::abs(c[1].real() - std::min(u1, u2)));
    }
    CHECK(worst < 1e-12);
  }

  SUBCASE("branch gap at a crossing of the uncoupled curves") {
    const CombSpec s = fig6();
    auto diff = [](double e) { return band_uncoupled(6.0, 0.0, pi, e) - band_uncoupled(5.0, 1.0, pi, e); };
    int crossings = 0;
    for (double e = 1.01; e < 20.0; e += 0.01) {
      if ((diff(e) < 0) == (diff(e + 0.01) < 0)) continue;
      const double ec = fx::bisect(diff, e, e + 0.01);
      const double k1 = std::sqrt(ec), k2 = std::sqrt(ec - 1.0);
      const double g2 = std::sin(k1 * pi) * std::sin(k2 * pi) / (k1 * k2);
      const auto c = band_coupled(s, ec);
      CHECK(std::abs(c[0] - c[1] - std::sqrt(cplx(g2, 0.0))) < 1e-7);
      ++crossings;
    }
    CHECK(crossings > 3);
  }

  SUBCASE("fig. 6 against the one-period monodromy") {
    const CombSpec s = fig6();
    double worst = 0.0;
    for (double e = 1.05; e <= 20.0; e += 0.05) {
      const auto c = band_coupled(s, e);
      worst = std::max(worst, pair_distance(c, monodromy_branches(s, e)) / scale(c));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("random combs against the monodromy") {
    std::mt19937 rng(20261015);
    std::uniform_real_distribution<double> v(-8.0, 8.0), w(-3.0, 3.0), a(0.5, 4.0), e(-2.0, 20.0), eps(0.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
      const double wi = w(rng);
      const CombSpec s{a(rng), m2(v(rng), wi, wi, v(rng)), {0.0, eps(rng)}};
      const double ei = e(rng);
      const auto c = band_coupled(s, ei);
      worst = std::max(worst, pair_distance(c, monodromy_branches(s, ei)) / scale(c));
    }
    CHECK(worst < 1e-6);
  }

  SUBCASE("flipped comb has its own diagram") {
    const CombSpec s{pi, m2(-6, -1, -1, -5), {0.0, 1.0}};
    double worst = 0.0;
    for (double e = -2.0; e <= 20.0; e += 0.1) {
      const auto c = band_coupled(s, e);
      worst = std::max(worst, pair_distance(c, monodromy_branches(s, e)) / scale(c));
    }
    CHECK(worst < 1e-6);
    const auto d = scan_zones(s, -2.0, 20.0);
    CHECK(!d.coupled_union.empty());
  }

  SUBCASE("continuous across the thresholds") {
    const CombSpec s = fig6();
    for (double t : {0.0, 1.0}) {
      const auto lo = band_coupled(s, t - 1e-9), hi = band_coupled(s, t + 1e-9);
      CHECK(pair_distance(lo, hi) < 1e-6);
    }
  }
}

TEST_CASE("zone scan") {
  SUBCASE("free motion above both thresholds is one allowed zone") {
    const CombSpec s{2.0, Mat::Zero(2, 2), {0.0, 1.0}};
    const auto d = scan_zones(s, 2.0, 10.0);
    for (int b = 0; b < 2; ++b) {
      REQUIRE(d.allowed[b].size() == 1);
      CHECK(d.allowed[b][0].lo == 2.0);
      CHECK(d.allowed[b][0].hi == 10.0);
    }
  }

  const CombSpec s = fig6();
  const auto d = scan_zones(s, 0.0, 20.0);

  SUBCASE("zone edges sit on |cos| = 1 or on a branch merger") {
    int edges = 0;
    for (int b = 0; b < 2; ++b)
      for (const auto& z : d.allowed[b])
        for (double e : {z.lo, z.hi}) {
          if (e == 0.0 || e == 20.0) continue;
          const auto c = band_coupled(s, e);
          const bool on_one = std::abs(std::abs(c[b].real()) - 1.0) < 1e-6;
          const bool merger = std::abs(c[0] - c[1]) < 1e-3;
          CHECK((on_one || merger));
          ++edges;
        }
    CHECK(edges > 4);
  }

  SUBCASE("crossings become quasi-crossings") {
    int n = 0;
    for (std::size_t i = 1; i < d.energy.size(); ++i) {
      const double p = d.uncoupled[i - 1][0] - d.uncoupled[i - 1][1], q = d.uncoupled[i][0] - d.uncoupled[i][1];
      if ((p < 0) == (q < 0) || d.energy[i] < 1.0) continue;
      auto diff = [&](double e) { return band_uncoupled(6.0, 0.0, pi, e) - band_uncoupled(5.0, 1.0, pi, e); };
      const auto c = band_coupled(s, fx::bisect(diff, d.energy[i - 1], d.energy[i]));
      CHECK(std::abs(c[0] - c[1]) > 1e-3);
      ++n;
    }
    CHECK(n > 3);
  }

  SUBCASE("coupling opens propagation where one channel was forbidden") {
    bool rescued = false;
    for (double e : d.energy)
      if (inside(d.coupled_union, e) && !inside(d.uncoupled_intersection, e)) rescued = true;
    CHECK(rescued);
    for (const auto& z : d.uncoupled_intersection) {
      const double mid = 0.5 * (z.lo + z.hi);
      CHECK(std::abs(band_uncoupled(6.0, 0.0, pi, mid)) <= 1.0);
      CHECK(std::abs(band_uncoupled(5.0, 1.0, pi, mid)) <= 1.0);
    }
  }
}

TEST_CASE("Bloch growth factor of a block") {
  // (V + L) u = mu u gives levels n^2 + mu with states sin(n x) u on [0, pi].
  const Mat v = m2(2.0, 1.0, 1.0, 3.0);
  const ChannelSystem block({0.0, 1.0}, DomainKind::interval, pi, PotentialMatrix::piecewise({0.0, pi}, {v}));
  const Eigen::SelfAdjointEigenSolver<Mat> es(v + block.threshold_matrix());
  const double e1 = 1.0 + es.eigenvalues()(0);

  SUBCASE("symmetric block sits on a band edge") {
    const auto g = bloch_growth_factor(block, e1);
    CHECK(g.theta == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(!g.forbidden);
  }

  SUBCASE("not a level") { CHECK_THROWS_AS(bloch_growth_factor(block, e1 + 0.3), ConfigError); }

  SUBCASE("asymmetric coupling breaks the common ratio") {
    const ChannelSystem bad({0.0, 1.0}, DomainKind::interval, pi,
                            PotentialMatrix::piecewise({0.0, 1.0, pi}, {m2(-4, 2, 2, 0), m2(1, -1, -1, 3)}));
    const auto levels = find_bound_states(bad, -10.0, 5.0);
    REQUIRE(!levels.empty());
    CHECK_THROWS_AS(bloch_growth_factor(bad, levels[0].energy), ConstructionError);
  }

  SUBCASE("scalar weight decrease rakes the state right and opens a gap") {
    const auto st = refine_bound_state(block, e1, refine_grid(system_grid(block, 1e-3)));
    const double ratio = 0.5;
    const auto r = transform_bound_state(block, st, st.energy, ratio * st.c->weights);
    const auto g = bloch_growth_factor(r.system, st.energy);
    CHECK(g.theta == doctest::Approx(-1.0 / (ratio * ratio)).epsilon(1e-4));
    CHECK(g.ratio_defect < 1e-4);
    CHECK(g.forbidden);

    // Four periods of the raked block, started from the state's own data.
    const ChannelSystem chain({0.0, 1.0}, DomainKind::half_line, 4 * pi,
                              PotentialMatrix::periodic(r.system.potential, pi, 4));
    const auto grid = system_grid(chain, 1e-3);
    const auto sol = integrate_initial_value(chain, g.energy, Mat::Zero(2, 1), g.state.psi.derivative(0), grid);
    std::array<double, 4> norm{};
    for (std::size_t i = 1; i < sol.size(); ++i) {
      const int cell = std::min(3, static_cast<int>(0.5 * (sol.x[i] + sol.x[i - 1]) / pi));
      const double f = 0.5 * (sol.value(i).squaredNorm() + sol.value(i - 1).squaredNorm());
      norm[cell] += f * (sol.x[i] - sol.x[i - 1]);
    }
    for (int l = 1; l < 4; ++l) CHECK(std::sqrt(norm[l] / norm[l - 1]) == doctest::Approx(std::abs(g.theta)).epsilon(0.05));
  }
}
