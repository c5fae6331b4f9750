#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "mcd/gl.hpp"
#include "mcd/susy.hpp"

using namespace mcd;

namespace {

ChannelSystem free_line(double xmax = 40.0) {
  return ChannelSystem({0.0}, DomainKind::whole_line, xmax, PotentialMatrix::zero(1));
}

Mat eye(int n) { return Mat::Identity(n, n); }

/// Two coupled wells on the whole line, thresholds (0, 1). Kept short: a seed growing to the
/// left at two different rates loses the slower channel to rounding far out.
ChannelSystem coupled_line() {
  return ChannelSystem({0.0, 1.0}, DomainKind::whole_line, 20.0,
                       PotentialMatrix::piecewise({-1.5, 1.5}, {fx::m2(-4, 0.6, 0.6, -3)}));
}

/// max over uniform interior stencils of |phi' + W phi - (E - E0) psi|, with phi' by
/// 4th-order differences of the mapped values only; relative to max |(E - E0) psi|.
double factorization_defect(const ChannelSystem& base, const Factorization& f, const MatrixSolution& psi) {
  const auto phi = susy_map(f, psi);
  const auto bps = base.potential.breakpoints(psi.x.front(), psi.x.back());
  const double de = psi.energy - f.energy;
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 2; i + 2 < psi.size(); ++i) {
    const double h = psi.x[i + 1] - psi.x[i];
    bool ok = true;
    for (std::size_t k = i - 2; k < i + 2; ++k) ok = ok && std::abs(psi.x[k + 1] - psi.x[k] - h) < 1e-9 * h;
    auto it = std::lower_bound(bps.begin(), bps.end(), psi.x[i - 2] - 1e-12);
    if (!ok || (it != bps.end() && *it <= psi.x[i + 2] + 1e-12)) continue;
    const Mat d = (phi.value(i - 2) - 8.0 * phi.value(i - 1) + 8.0 * phi.value(i + 1) - phi.value(i + 2)) / (12.0 * h);
    worst = std::max(worst, (d + f.w[i] * phi.value(i) - de * psi.value(i)).cwiseAbs().maxCoeff());
    scale = std::max(scale, std::abs(de) * psi.value(i).cwiseAbs().maxCoeff());
  }
  return worst / scale;
}

double max_node_diff(const ChannelSystem& a, const ChannelSystem& b, const std::vector<double>& x, double skip = 0.0) {
  const auto bps = a.potential.breakpoints(x.front(), x.back());
  double w = 0.0;
  for (double xi : x) {
    bool near = false;
    for (double b0 : bps) near = near || std::abs(xi - b0) <= skip;
    if (near) continue;
    w = std::max(w, (a.potential.smooth(xi) - b.potential.smooth(xi)).cwiseAbs().maxCoeff());
  }
  return w;
}

MatrixSolution random_solution(const ChannelSystem& s, double e, const std::vector<double>& grid, std::mt19937& rng) {
  std::normal_distribution<double> g;
  Mat p(s.channels(), 1), d(s.channels(), 1);
  for (int a = 0; a < s.channels(); ++a) {
    p(a, 0) = s.domain == DomainKind::half_line ? 0.0 : g(rng);
    d(a, 0) = g(rng);
  }
  auto out = integrate_initial_value(s, e, p, d, grid);
  out.energy = e;
  return out;
}

BoundState on_refined_state(const ChannelSystem& s, const BoundState& b) {
  return refine_bound_state(s, b.energy, refine_grid(system_grid(s, SolverConfig{}.h)));
}

}  // namespace

TEST_CASE("free seeds") {
  const double kap = 0.8;
  SUBCASE("exponential seed gives constant W and leaves free motion free") {
    const auto f = factorize(free_line(), -kap * kap, {{SeedBasis::left_jost, fx::m1(1.0)}});
    double werr = 0.0;
    for (const auto& w : f.w) werr = std::max(werr, std::abs(w(0, 0) - kap));
    CHECK(werr < 1e-9);
    const auto p = susy_partner(free_line(), f);
    CHECK(max_node_diff(p, free_line(), f.seed.x) < 1e-8);
  }
  SUBCASE("cosh seed gives the sech^2 well with one level at the seed energy") {
    const auto f = factorize(free_line(), -kap * kap,
                             {{SeedBasis::left_jost, fx::m1(0.5)}, {SeedBasis::jost, fx::m1(0.5)}});
    double werr = 0.0, verr = 0.0;
    const auto p = susy_partner(free_line(), f);
    for (std::size_t i = 0; i < f.w.size(); ++i) {
      const double x = f.seed.x[i];
      werr = std::max(werr, std::abs(f.w[i](0, 0) - kap * std::tanh(kap * x)));
      verr = std::max(verr, std::abs(p.potential.smooth(x)(0, 0) + 2 * kap * kap / std::pow(std::cosh(kap * x), 2)));
    }
    CHECK(werr < 1e-9);
    CHECK(verr < 1e-8);
    const auto st = find_bound_states(p, -2.0, -0.01);
    REQUIRE(st.size() == 1);
    CHECK(std::abs(st[0].energy + kap * kap) < 1e-6);
  }
  SUBCASE("sin(kx) maps to -k cos(kx) + kappa tanh(kappa x) sin(kx)") {
    const auto f = factorize(free_line(), -kap * kap,
                             {{SeedBasis::left_jost, fx::m1(0.5)}, {SeedBasis::jost, fx::m1(0.5)}});
    const double k = 1.3;
    MatrixSolution s(k * k, MatrixSolution::Kind::general, 1, 1);
    for (double x : f.seed.x) s.push(x, fx::m1(std::sin(k * x)), fx::m1(k * std::cos(k * x)));
    const auto m = susy_map(f, s);
    double err = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double x = m.x[i];
      err = std::max(err, std::abs(m.value(i)(0, 0) - (-k * std::cos(k * x) + kap * std::tanh(kap * x) * std::sin(k * x))));
    }
    CHECK(err < 1e-9);
    CHECK(residual(susy_partner(free_line(), f), m, k * k) < 1e-6);
  }
  SUBCASE("the seed itself is annihilated") {
    const auto f = factorize(free_line(), -kap * kap,
                             {{SeedBasis::left_jost, fx::m1(0.5)}, {SeedBasis::jost, fx::m1(0.5)}});
    const auto m = susy_map(f, f.seed);
    double w = 0.0, s = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      w = std::max(w, m.value(i).cwiseAbs().maxCoeff());
      s = std::max(s, f.seed.value(i).cwiseAbs().maxCoeff());
    }
    CHECK(w < 1e-14 * s);
  }
}

TEST_CASE("coupled half line: factorization, symmetry and intertwining") {
  const auto base = fx::fig3_base();
  const auto f = factorize(base, -6.0, {{SeedBasis::jost, eye(2)}});
  CHECK(f.symmetry_defect < 1e-6);
  const auto partner = susy_partner(base, f);
  CHECK(symmetry_defect(partner.potential, f.seed.x) < 1e-12);

  // Probe above both thresholds.
  const auto phi = integrate_regular_on(base, 3.0, f.seed.x);
  CHECK(residual(partner, susy_map(f, phi), 3.0) < 1e-5);

  std::mt19937 rng(11);
  std::uniform_real_distribution<double> ue(-5.0, 5.0);
  for (int t = 0; t < 5; ++t) {
    const double e = ue(rng);
    const auto psi = random_solution(base, e, f.seed.x, rng);
    CHECK(residual(partner, susy_map(f, psi), e) < 1e-4);
    CHECK(factorization_defect(base, f, psi) < 1e-5);
    // A+ A- = H0 - E0 on solutions.
    const auto back = susy_map_back(f, susy_map(f, psi));
    double w = 0.0, s = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      w = std::max(w, (back.value(i) - (e + 6.0) * psi.value(i)).cwiseAbs().maxCoeff());
      s = std::max(s, (e + 6.0) * psi.value(i).cwiseAbs().maxCoeff());
    }
    CHECK(w < 1e-10 * s);
  }
}

TEST_CASE("singular seeds are reported with their location") {
  const auto base = fx::fig3_base();
  try {
    factorize(base, -6.0, {{SeedBasis::regular, eye(2)}});
    FAIL("expected a singular seed");
  } catch (const SingularTransformError& e) {
    CHECK(e.where() == 0.0);
  }
}

TEST_CASE("whole-line partner keeps the spectrum") {
  const auto base = coupled_line();
  const auto st = find_bound_states(base, -5.0, -0.01);
  REQUIRE(st.size() >= 2);
  const double e0 = st[0].energy - 1.0;
  const auto f = factorize(base, e0, {{SeedBasis::jost, eye(2)}});
  const auto p = susy_partner(base, f);
  const auto st1 = find_bound_states(p, -5.0, -0.01);
  REQUIRE(st1.size() == st.size());
  for (std::size_t i = 0; i < st.size(); ++i) CHECK(std::abs(st1[i].energy - st[i].energy) < 1e-5);
  // Bound states map to bound states.
  const auto b = refine_bound_state(base, st[0].energy, f.seed.x);
  CHECK(residual(p, susy_map(f, b.psi), b.energy) < 1e-5);
}

TEST_CASE("delta strengths flip") {
  Mat d(2, 2);
  d << 1.5, -0.4, -0.4, 0.7;
  const ChannelSystem base({0.0, 1.0}, DomainKind::half_line, 12.0,
                           PotentialMatrix::sum(PotentialMatrix::comb(1.0, d, 0.5, 0, 4),
                                                PotentialMatrix::piecewise({0.0, 5.0}, {fx::m2(-3, 0.2, 0.2, -2)})));
  const auto f = factorize(base, -5.0, {{SeedBasis::jost, eye(2)}});
  const auto p = susy_partner(base, f);
  const auto d0 = base.potential.deltas(0.0, 12.0), d1 = p.potential.deltas(0.0, 12.0);
  REQUIRE(d0.size() == 5);
  REQUIRE(d1.size() == d0.size());
  for (std::size_t i = 0; i < d0.size(); ++i) {
    CHECK(d1[i].x == d0[i].x);
    CHECK((d1[i].strength + d0[i].strength).cwiseAbs().maxCoeff() == 0.0);
  }
  // Mapped solutions carry the flipped jumps: re-integrating the partner from a node
  // before the deltas reproduces them after.
  const auto psi = integrate_regular_on(base, 0.7, f.seed.x);
  const auto m = susy_map(f, psi);
  const std::size_t i0 = 10;
  const std::vector<double> tail(f.seed.x.begin() + i0, f.seed.x.end());
  const auto re = integrate_initial_value(p, 0.7, m.value(i0), m.derivative(i0), tail);
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < re.size() && tail[i] < 6.0; ++i) {
    err = std::max(err, (re.value(i) - m.value(i0 + i)).cwiseAbs().maxCoeff());
    scale = std::max(scale, m.value(i0 + i).cwiseAbs().maxCoeff());
  }
  // Limited by linear interpolation of the sampled partner between nodes.
  CHECK(err < 1e-4 * scale);
}

TEST_CASE("double SUSY") {
  SUBCASE("closed form equals two explicit steps") {
    const auto base = fx::fig3_base();
    const auto f = factorize(base, -6.0, {{SeedBasis::jost, eye(2)}});
    const Mat gamma = 2.0 * eye(2);
    const auto closed = double_susy(base, f.seed, gamma);
    const auto steps = double_susy_steps(base, f, gamma);
    CHECK(max_node_diff(closed.system, steps, f.seed.x) < 1e-7);
  }
  SUBCASE("second seed from the complement of the first restores V") {
    const auto base = fx::fig3_base();
    const auto f = factorize(base, -6.0, {{SeedBasis::jost, eye(2)}});
    const auto steps = double_susy_steps(base, f, 1e14 * eye(2));
    CHECK(max_node_diff(steps, base, f.seed.x) < 1e-7);
  }
  SUBCASE("weight change matches the GL transform") {
    const auto base = fx::fig3_base();
    const auto st = find_bound_states(base, -6.0, -4.0);
    REQUIRE(!st.empty());
    const auto ds = double_susy_weight(base, st[0], 1.5);
    const auto gl = transform_bound_state(base, st[0], st[0].energy, 1.5 * st[0].c->weights);
    REQUIRE(ds.x.size() == gl.x.size());
    double w = 0.0;
    for (std::size_t i = 0; i < ds.x.size(); ++i) w = std::max(w, (ds.delta_v[i] - gl.delta_v[i]).cwiseAbs().maxCoeff());
    CHECK(w < 1e-5);
    const auto after = find_bound_states(ds.system, -6.0, -4.0);
    REQUIRE(after.size() == 1);
    const double sg = after[0].c->weights.dot(st[0].c->weights) < 0 ? -1.0 : 1.0;
    CHECK((sg * after[0].c->weights - 1.5 * st[0].c->weights).norm() < 1e-5 * st[0].c->weights.norm());
    CHECK(std::abs(norm_squared(ds.states) - 1.0) < 1e-6);
  }
  SUBCASE("one channel agrees with the scaling formula") {
    const auto base = fx::deep_well(1e4);
    const auto st = find_bound_states(base, 0.0, 2.0);
    REQUIRE(!st.empty());
    const auto ds = double_susy_weight(base, st[0], 0.5);
    const auto sw = swv_scale_one_channel(base, on_refined_state(base, st[0]), 0.5);
    double w = 0.0;
    for (std::size_t i = 0; i < ds.x.size(); ++i) w = std::max(w, std::abs(ds.delta_v[i](0, 0) - sw.delta_v[i](0, 0)));
    CHECK(w < 1e-7);
  }
  SUBCASE("removing the ground state") {
    // dV_12 dies out only like exp(-(kappa_2 - kappa_1) x) once the state is gone.
    const auto base = fx::fig3_base(100.0);
    SolverConfig cfg;
    cfg.bracket_resolution = 0.01;
    cfg.decay_tolerance = 1e-6;
    const auto st = find_bound_states(base, -6.0, -0.01, cfg);
    REQUIRE(st.size() >= 2);
    const auto r = double_susy_weight(base, st[0], 0.0, cfg);
    CHECK(r.states.cols == 0);
    const auto after = find_bound_states(r.system, -6.0, -0.01, cfg);
    REQUIRE(after.size() == st.size() - 1);
    for (std::size_t i = 0; i < after.size(); ++i) CHECK(std::abs(after[i].energy - st[i + 1].energy) < 1e-5);
  }
  SUBCASE("indefinite Gamma is refused") {
    const auto base = fx::fig3_base();
    const auto f = factorize(base, -6.0, {{SeedBasis::jost, eye(2)}});
    Mat g = eye(2);
    g(1, 1) = -1.0;
    CHECK_THROWS_AS(double_susy(base, f.seed, g), ConfigError);
  }
}
