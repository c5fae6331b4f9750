#include <algorithm>
#include <cmath>
#include <complex>

#include <boost/math/tools/minima.hpp>

#include "context.hpp"
#include "mcd/errors.hpp"
#include "mcd/gl.hpp"
#include "mcd/susy.hpp"

namespace mcdcli {

using namespace mcd;

namespace {

// Fraction of sum_a int psi_a^2 carried by each channel (trapezoid).
std::vector<double> channel_fraction(const MatrixSolution& s, int col) {
  std::vector<double> w(s.rows, 0.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double h = s.x[i] - s.x[i - 1];
    for (int a = 0; a < s.rows; ++a) {
      const double p = s.value(i - 1)(a, col), q = s.value(i)(a, col);
      w[a] += 0.5 * h * (p * p + q * q);
    }
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v = total > 0 ? v / total : 0.0;
  return w;
}

void store_transform(Context& c, const std::string& id, TransformResult r, const std::string& out) {
  json& q = c.quantities[id];
  q["max_delta"] = r.max_delta();
  // Largest barrier and deepest well of dV over all elements.
  std::size_t imax = 0, imin = 0;
  for (std::size_t i = 0; i < r.x.size(); ++i) {
    if (r.delta_v[i].maxCoeff() > r.delta_v[imax].maxCoeff()) imax = i;
    if (r.delta_v[i].minCoeff() < r.delta_v[imin].minCoeff()) imin = i;
  }
  if (!r.x.empty()) {
    q["dv_max"] = r.delta_v[imax].maxCoeff();
    q["x_dv_max"] = r.x[imax];
    q["dv_min"] = r.delta_v[imin].minCoeff();
    q["x_dv_min"] = r.x[imin];
  }
  if (r.states.cols > 0) {
    q["state_energy"] = r.states.energy;
    q["channel_fraction"] = channel_fraction(r.states, 0);
    q["state_norm"] = norm_squared(r.states.column(0));
  }
  c.systems[out] = r.system;
  c.products[id].system = out;
  c.products[id].transform = std::move(r);
}

std::string out_name(Context& c, Reader& r, const std::string& id) {
  const auto out = r.str("out", id);
  c.declare_system(out, r.at("out"));
  return out;
}

void bound_states(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const auto name = r.str("system");
  const double lo = r.number("e_lo"), hi = r.number("e_hi");
  const std::string cmp = r.has("compare_to") ? r.str("compare_to") : "";
  const Product* other = cmp.empty() ? nullptr : c.product(r, "compare_to", "levels");
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {"levels"});
  if (c.dry) return;
  auto st = find_bound_states(*s, lo, hi, cfg);
  json& q = c.quantities[id];
  q["count"] = st.size();
  q["energies"] = json::array();
  q["multiplicity"] = json::array();
  for (const auto& b : st) {
    q["energies"].push_back(b.energy);
    q["multiplicity"].push_back(b.multiplicity);
    if (b.c) q["c"].push_back(to_json(b.c->weights));
    if (b.m) q["m"].push_back(to_json(b.m->weights));
  }
  if (other) {
    double worst = 0.0;
    for (const auto& b : other->levels) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& a : st) best = std::min(best, std::abs(a.energy - b.energy));
      worst = std::max(worst, best);
    }
    q["max_shift"] = worst;
    q["count_change"] = static_cast<int>(st.size()) - static_cast<int>(other->levels.size());
  }
  c.products[id].levels = std::move(st);
  c.products[id].system = name;
}

void swv_scale(Context& c, Reader& r, const std::string& id) {
  std::string base;
  const auto* st = c.level(r, &base);
  const double ratio = r.number("ratio");
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  store_transform(c, id, swv_scale_one_channel(c.systems.at(base), *st, ratio), out);
}

void transform_level(Context& c, Reader& r, const std::string& id) {
  std::string base;
  const auto* st = c.level(r, &base);
  const bool has_new = r.has("e_new");
  const double e_new = has_new ? r.number("e_new") : 0.0, de = r.number("de", 0.0);
  const bool explicit_c = r.has("c_new");
  const Vec c_new = explicit_c ? r.vec("c_new") : Vec();
  const Vec scale = r.has("c_scale") ? r.vec("c_scale") : Vec();
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  if (!st->c) throw ConfigError(r.path() + ": level has no C weights (needs a half line or interval)");
  Vec w = explicit_c ? c_new : st->c->weights;
  if (!explicit_c && scale.size() > 0) {
    if (scale.size() != w.size()) throw ConfigError(r.at("c_scale") + ": one factor per channel");
    w = w.cwiseProduct(scale);
  }
  store_transform(c, id, transform_bound_state(c.systems.at(base), *st, has_new ? e_new : st->energy + de, w, cfg),
                  out);
}

void change_weights(Context& c, Reader& r, const std::string& id) {
  std::string base;
  const auto* st = c.level(r, &base);
  const bool explicit_m = r.has("m_new");
  const Vec m_new = explicit_m ? r.vec("m_new") : Vec();
  const Vec scale = r.has("m_scale") ? r.vec("m_scale") : Vec();
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  if (!st->m) throw ConfigError(r.path() + ": level has no M weights (needs a half or whole line)");
  Vec w = explicit_m ? m_new : st->m->weights;
  if (!explicit_m && scale.size() > 0) {
    if (scale.size() != w.size()) throw ConfigError(r.at("m_scale") + ": one factor per channel");
    w = w.cwiseProduct(scale);
  }
  store_transform(c, id, change_asymptotic_weights(c.systems.at(base), *st, w, cfg), out);
}

void add_bound_state_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const double e = r.number("energy");
  const Vec m = r.vec("m");
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  store_transform(c, id, add_bound_state(*s, e, m, cfg), out);
}

void add_level_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const double e = r.number("energy");
  const Vec w = r.vec("c");
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  store_transform(c, id, add_level(*s, e, w, cfg), out);
}

void create_bsec_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const double e = r.number("energy");
  const bool physical = r.has("c_physical");
  const double scale = physical ? r.number("c_physical") : 0.0;
  const Vec w = physical ? Vec() : r.vec("c");
  const Vec perturb = r.has("perturb") ? r.vec("perturb") : Vec();
  const double fit_lo = r.number("fit_lo", std::numeric_limits<double>::quiet_NaN());
  const double fit_hi = r.number("fit_hi", std::numeric_limits<double>::quiet_NaN());
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  Vec cw = physical ? Vec(scale * physical_coefficients(*s, e, cfg).col(0)) : w;
  if (perturb.size() > 0) {
    if (perturb.size() != cw.size()) throw ConfigError(r.at("perturb") + ": one factor per channel");
    cw = cw.cwiseProduct(perturb);
  }
  auto b = create_bsec(*s, e, cw, cfg, fit_lo, fit_hi);
  json& q = c.quantities[id];
  q["c"] = to_json(cw);
  q["tail_kind"] = b.tail.kind == TailKind::power_law ? "power_law" : "exponential";
  q["power_law"] = b.tail.kind == TailKind::power_law;
  q["loglog_slope"] = b.tail.loglog_slope;
  q["loglin_slope"] = b.tail.loglin_slope;
  q["norm_deficit"] = b.norm_deficit;
  store_transform(c, id, std::move(b.transform), out);
}

void double_susy_op(Context& c, Reader& r, const std::string& id) {
  std::string base;
  const auto* st = c.level(r, &base);
  const double ratio = r.number("ratio");
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"transform"});
  if (c.dry) return;
  store_transform(c, id, double_susy_weight(c.systems.at(base), *st, ratio, cfg), out);
}

void susy_partner_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const double e = r.number("energy");
  std::vector<SeedTerm> terms;
  for (auto& t : r.children("seed")) {
    const auto basis = t.choice("basis", {"regular", "jost", "left_jost"});
    const Mat coeff = t.mat("coeff");
    t.finish();
    terms.push_back({basis == "regular" ? SeedBasis::regular : basis == "jost" ? SeedBasis::jost : SeedBasis::left_jost,
                     coeff});
  }
  const auto cfg = c.solver(r);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"system"});
  if (c.dry) return;
  const auto f = factorize(*s, e, terms, cfg);
  auto partner = susy_partner(*s, f);
  const auto d0 = s->potential.deltas(s->lo(), s->hi()), d1 = partner.potential.deltas(s->lo(), s->hi());
  double flip = 0.0;
  for (const auto& a : d0) {
    Mat sum = a.strength;
    for (const auto& b : d1)
      if (b.x == a.x) sum += b.strength;
    flip = std::max(flip, sum.cwiseAbs().maxCoeff());
  }
  json& q = c.quantities[id];
  q["flip_defect"] = flip;
  q["delta_count"] = d0.size();
  q["partner_delta_count"] = d1.size();
  q["symmetry_defect"] = f.symmetry_defect;
  if (!d1.empty()) q["first_partner_delta"] = to_json(d1.front().strength);
  c.systems[out] = std::move(partner);
  c.products[id].system = out;
}

void reflectionless_op(Context& c, Reader& r, const std::string& id) {
  const auto eps = r.numbers("thresholds");
  std::vector<Level> levels;
  for (auto& l : r.children("levels")) {
    Level lv{l.number("energy"), l.vec("m")};
    l.finish();
    levels.push_back(std::move(lv));
  }
  const double xm = r.number("x_max", 50.0);
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"reflectionless"});
  if (c.dry) return;
  Reflectionless rl = levels.size() == 2 ? create_two_states(eps, levels[0], levels[1]) : Reflectionless(eps, levels);
  c.quantities[id]["level_count"] = rl.levels().size();
  c.systems[out] = rl.system(xm);
  c.products[id].system = out;
  c.products[id].reflectionless = std::move(rl);
}

void anomaly_op(Context& c, Reader& r, const std::string& id) {
  const auto* p = c.product(r, "source", "reflectionless");
  const double xm = r.number("x_max", 40.0);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  const auto a = asymptotic_anomaly_report(*p->reflectionless, xm);
  json& q = c.quantities[id];
  q["fitted"] = to_json(a.fitted);
  q["natural"] = to_json(a.natural);
  q["expected"] = to_json(a.expected);
  q["anomalous"] = a.anomalous;
  Vec rel(a.fitted.size());
  for (Eigen::Index i = 0; i < rel.size(); ++i) {
    const double target = a.anomalous[i] ? a.expected(i) : a.natural(i);
    rel(i) = std::abs(a.fitted(i) / target - 1.0);
  }
  q["relative_error"] = to_json(rel);
}

void effective_channel_op(Context& c, Reader& r, const std::string& id) {
  const auto eps = r.numbers("thresholds");
  const double e = r.number("energy");
  const Vec m = r.vec("m");
  const double x = r.number("x", -30.0);
  const double lo = r.number("lo", -30.0), hi = r.number("hi", 30.0);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  const auto ch = effective_one_channel(eps, e, m);
  // -psi'' + (V_eff + eps1 - E) psi from differences of psi'.
  double worst = 0.0, scale = 0.0;
  const double h = 1e-3;
  for (double y = lo + h; y < hi - h; y += 0.01) {
    const double d2 = (ch.dpsi(y + h) - ch.dpsi(y - h)) / (2 * h);
    worst = std::max(worst, std::abs(-d2 + (ch.potential(y) + ch.threshold() - ch.energy()) * ch.psi(y)));
    scale = std::max(scale, std::abs(ch.psi(y)));
  }
  json& q = c.quantities[id];
  q["left_asymptote"] = ch.left_asymptote();
  q["value_at_x"] = ch.potential(x);
  q["asymptote_error"] = std::abs(ch.potential(x) - ch.left_asymptote());
  q["reduced_residual"] = worst / scale;
}

void blocks_op(Context& c, Reader& r, const std::string& id) {
  const auto* p = c.product(r, "source", "reflectionless");
  const double lo = r.number("lo", -40.0), hi = r.number("hi", 40.0), minw = r.number("min_weight", 0.01);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  const auto& rl = *p->reflectionless;
  auto b = potential_blocks([&](double x) { return rl.potential(x); }, lo, hi);
  double top = 0.0;
  for (const auto& k : b) top = std::max(top, k.weight);
  std::erase_if(b, [&](const Block& k) { return k.weight < minw * top; });
  json& q = c.quantities[id];
  q["count"] = b.size();
  for (const auto& k : b) {
    q["centroids"].push_back(k.centroid);
    q["weights"].push_back(k.weight);
    q["bounds"].push_back({k.lo, k.hi});
  }
  if (b.size() >= 2) {
    const double cut = b[0].hi, h = 1e-3;
    const int k = static_cast<int>(rl.levels().size());
    std::vector<double> right(k, 0.0), total(k, 0.0);
    for (double x = lo; x < hi; x += h) {
      const Mat s = rl.states(x);
      for (int j = 0; j < k; ++j) {
        const double f = s.col(j).squaredNorm() * h;
        total[j] += f;
        if (x > cut) right[j] += f;
      }
    }
    for (int j = 0; j < k; ++j) q["state_fraction_right"].push_back(right[j] / total[j]);
  }
}

json probabilities(const CMat& m) {
  json cols = json::array();
  for (int j = 0; j < m.cols(); ++j) cols.push_back(m.col(j).squaredNorm());
  return cols;
}

json abs2(const CMat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(std::norm(m(i, j)));
    rows.push_back(row);
  }
  return rows;
}

void scattering_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const auto es = r.numbers("energies");
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  json& q = c.quantities[id];
  q["energies"] = es;
  double worst_r = 0.0;
  for (double e : es) {
    const auto sd = scattering_matrix(*s, e, cfg);
    q["open"].push_back(sd.open_index);
    q["unitarity_defect"].push_back(sd.unitarity_defect);
    if (s->domain == DomainKind::whole_line) {
      q["t_right_prob"].push_back(probabilities(sd.t_right));
      q["r_right_prob"].push_back(probabilities(sd.r_right));
      q["t_left_prob"].push_back(probabilities(sd.t_left));
      q["r_left_prob"].push_back(probabilities(sd.r_left));
      q["t_right_abs2"].push_back(abs2(sd.t_right));
      q["t_left_abs2"].push_back(abs2(sd.t_left));
      for (const CMat* m : {&sd.r_right, &sd.r_left})
        for (int j = 0; j < m->cols(); ++j) worst_r = std::max(worst_r, m->col(j).squaredNorm());
    } else {
      q["S_abs2"].push_back(abs2(sd.S));
      q["eigenphases"].push_back(to_json(sd.eigenphases));
    }
  }
  if (s->domain == DomainKind::whole_line) q["max_reflection"] = worst_r;
}

void compare_scattering_op(Context& c, Reader& r, const std::string& id) {
  const auto* a = c.system(r, "a");
  const auto* b = c.system(r, "b");
  const auto es = r.numbers("energies");
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  double worst = 0.0;
  for (double e : es) {
    const auto sa = scattering_matrix(*a, e, cfg), sb = scattering_matrix(*b, e, cfg);
    const CMat ma = a->domain == DomainKind::whole_line ? sa.whole_line_s() : sa.S;
    const CMat mb = b->domain == DomainKind::whole_line ? sb.whole_line_s() : sb.S;
    if (ma.rows() != mb.rows()) throw ConfigError(r.path() + ": systems differ in open channels");
    worst = std::max(worst, (ma - mb).cwiseAbs().maxCoeff());
  }
  c.quantities[id]["max_abs_diff"] = worst;
}

void resonance_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const double ec = r.number("e_center"), hw = r.number("e_halfwidth");
  const int ch = r.integer("channel");
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  const auto est = estimate_resonance_width(*s, ec, hw, ch, cfg);
  json& q = c.quantities[id];
  q["found"] = est.found;
  q["energy"] = est.energy;
  q["width"] = est.width_time_delay;
  q["width_lorentzian"] = est.width_lorentzian;
}

void transmission_peak_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const int ch = r.integer("channel");
  const double lo = r.number("e_lo"), hi = r.number("e_hi");
  const int r_samples = r.integer("samples", 200);
  if (r_samples < 2) throw SchemaError(r.at("samples"), "need at least 2 samples");
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  if (s->domain != DomainKind::whole_line) throw ConfigError(r.path() + ": transmission needs a whole-line system");
  auto t = [&](double e) {
    const auto sd = scattering_matrix(*s, e, cfg);
    const auto it = std::find(sd.open_index.begin(), sd.open_index.end(), ch);
    if (it == sd.open_index.end()) throw ConfigError(r.path() + ": channel closed in the window");
    const auto k = it - sd.open_index.begin();
    return std::norm(sd.t_right(k, k));
  };
  // Coarse scan first: away from the peak T is flat and Brent alone can stall there.
  const int n = r_samples;
  double e_best = lo, t_best = -1.0;
  for (int i = 0; i <= n; ++i) {
    const double e = lo + (hi - lo) * i / n;
    const double v = t(e);
    if (v > t_best) {
      t_best = v;
      e_best = e;
    }
  }
  const double step = (hi - lo) / n;
  const auto best = boost::math::tools::brent_find_minima([&](double e) { return -t(e); }, std::max(lo, e_best - step),
                                                          std::min(hi, e_best + step), 40);
  c.quantities[id]["energy"] = best.first;
  c.quantities[id]["transmission"] = -best.second;
}

CombSpec read_comb(Reader& r) {
  auto k = r.child("comb");
  CombSpec s{k.number("period"), k.mat("strength"), k.numbers("thresholds")};
  k.finish();
  return s;
}

json zone_list(const std::vector<Zone>& z) {
  json out = json::array();
  for (const auto& v : z) out.push_back({v.lo, v.hi});
  return out;
}

std::vector<Zone> complement(const std::vector<Zone>& z, double lo, double hi) {
  std::vector<Zone> out;
  double at = lo;
  for (const auto& v : z) {
    if (v.lo > at) out.push_back({at, v.lo});
    at = std::max(at, v.hi);
  }
  if (at < hi) out.push_back({at, hi});
  return out;
}

void scan_zones_op(Context& c, Reader& r, const std::string& id) {
  const auto spec = read_comb(r);
  const double lo = r.number("e_lo"), hi = r.number("e_hi");
  const int n = r.integer("samples", 2000);
  r.finish();
  c.declare_step(id, {"bands"});
  if (c.dry) return;
  auto d = scan_zones(spec, lo, hi, n);
  json& q = c.quantities[id];
  for (int b = 0; b < 2; ++b) {
    q["allowed"].push_back(zone_list(d.allowed[b]));
    q["forbidden"].push_back(zone_list(complement(d.allowed[b], lo, hi)));
    q["uncoupled_allowed"].push_back(zone_list(d.uncoupled_allowed[b]));
  }
  q["coupled_union"] = zone_list(d.coupled_union);
  q["uncoupled_intersection"] = zone_list(d.uncoupled_intersection);
  // Crossings of the uncoupled curves and the branch separation there.
  int crossings = 0;
  double min_gap = std::numeric_limits<double>::infinity();
  bool rescued = false;
  auto diff = [&](double e) {
    return band_uncoupled(spec.strength(0, 0), spec.thresholds[0], spec.period, e) -
           band_uncoupled(spec.strength(1, 1), spec.thresholds[1], spec.period, e);
  };
  auto inside = [](const std::vector<Zone>& zs, double e) {
    return std::any_of(zs.begin(), zs.end(), [&](const Zone& z) { return z.lo <= e && e <= z.hi; });
  };
  const double top = *std::max_element(spec.thresholds.begin(), spec.thresholds.end());
  for (std::size_t i = 1; i < d.energy.size(); ++i) {
    if (inside(d.coupled_union, d.energy[i]) && !inside(d.uncoupled_intersection, d.energy[i])) rescued = true;
    double a = d.energy[i - 1], b = d.energy[i];
    if (a < top || (diff(a) < 0) == (diff(b) < 0)) continue;
    for (int it = 0; it < 80; ++it) {
      const double m = 0.5 * (a + b);
      ((diff(m) < 0) == (diff(a) < 0) ? a : b) = m;
    }
    const auto br = band_coupled(spec, 0.5 * (a + b));
    min_gap = std::min(min_gap, std::abs(br[0] - br[1]));
    ++crossings;
  }
  q["crossings"] = crossings;
  q["min_crossing_gap"] = crossings ? min_gap : 0.0;
  q["coupling_rescues"] = rescued;
  c.products[id].bands = std::move(d);
}

void comb_system_op(Context& c, Reader& r, const std::string& id) {
  const auto spec = read_comb(r);
  const int cells = r.integer("cells");
  const auto out = out_name(c, r, id);
  r.finish();
  c.declare_step(id, {"system"});
  if (c.dry) return;
  c.systems[out] = spec.system(cells);
  c.products[id].system = out;
}

void bloch_growth_op(Context& c, Reader& r, const std::string& id) {
  const auto* s = c.system(r);
  const auto name = r.str("system");
  const double e = r.number("energy");
  const int periods = r.integer("periods", 4);
  const auto cfg = c.solver(r);
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  const auto g = bloch_growth_factor(*s, e, cfg);
  json& q = c.quantities[id];
  q["energy"] = g.energy;
  q["theta"] = g.theta;
  q["abs_theta"] = std::abs(g.theta);
  q["ratio_defect"] = g.ratio_defect;
  q["forbidden"] = g.forbidden;
  // Direct integration over the periodized block from the state's own data.
  const double a = s->hi();
  const ChannelSystem chain(s->thresholds, DomainKind::half_line, periods * a,
                            PotentialMatrix::periodic(s->potential, a, periods));
  const auto sol = integrate_initial_value(chain, g.energy, Mat::Zero(s->channels(), 1), g.state.psi.derivative(0),
                                           system_grid(chain, cfg.h));
  std::vector<double> norm(periods, 0.0);
  for (std::size_t i = 1; i < sol.size(); ++i) {
    const int cell = std::min(periods - 1, static_cast<int>(0.5 * (sol.x[i] + sol.x[i - 1]) / a));
    norm[cell] += 0.5 * (sol.value(i).squaredNorm() + sol.value(i - 1).squaredNorm()) * (sol.x[i] - sol.x[i - 1]);
  }
  double worst = 0.0;
  for (int l = 1; l < periods; ++l) {
    const double growth = std::sqrt(norm[l] / norm[l - 1]);
    q["growth"].push_back(growth);
    worst = std::max(worst, std::abs(growth / std::abs(g.theta) - 1.0));
  }
  q["growth_error"] = worst;
  c.products[id].system = name;
}

void difference_op(Context& c, Reader& r, const std::string& id) {
  const double a = r.number("a"), b = r.number("b");
  r.finish();
  c.declare_step(id, {});
  if (c.dry) return;
  c.quantities[id]["value"] = a - b;
  c.quantities[id]["abs"] = std::abs(a - b);
  c.quantities[id]["ratio"] = a / b;
}

}  // namespace

const std::map<std::string, Op>& operations() {
  static const std::map<std::string, Op> ops{
      {"bound_states", bound_states},
      {"swv_scale", swv_scale},
      {"transform_level", transform_level},
      {"change_weights", change_weights},
      {"add_bound_state", add_bound_state_op},
      {"add_level", add_level_op},
      {"create_bsec", create_bsec_op},
      {"double_susy_weight", double_susy_op},
      {"susy_partner", susy_partner_op},
      {"reflectionless", reflectionless_op},
      {"anomaly", anomaly_op},
      {"effective_channel", effective_channel_op},
      {"blocks", blocks_op},
      {"scattering", scattering_op},
      {"compare_scattering", compare_scattering_op},
      {"resonance_width", resonance_op},
      {"transmission_peak", transmission_peak_op},
      {"scan_zones", scan_zones_op},
      {"comb_system", comb_system_op},
      {"bloch_growth", bloch_growth_op},
      {"difference", difference_op},
  };
  return ops;
}

}  // namespace mcdcli
