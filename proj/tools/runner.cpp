#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "cli.hpp"
#include "context.hpp"
#include "mcd/errors.hpp"

namespace fs = std::filesystem;

namespace mcdcli {

using namespace mcd;

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(to_json(Vec(m.row(i).transpose())));
  return rows;
}

void Context::declare_system(const std::string& name, const std::string& where) {
  if (system_names.count(name)) throw SchemaError(where, "system '" + name + "' is already defined");
  system_names.insert(name);
}

void Context::declare_step(const std::string& id, std::set<std::string> kinds) { provides[id] = std::move(kinds); }

const ChannelSystem* Context::system(Reader& r, const std::string& key) {
  const auto name = r.str(key);
  if (!system_names.count(name)) throw SchemaError(r.at(key), "unknown system '" + name + "'");
  return dry ? nullptr : &systems.at(name);
}

const Product* Context::product(Reader& r, const std::string& key, const std::string& kind) {
  const auto id = r.str(key);
  const auto it = provides.find(id);
  if (it == provides.end()) throw SchemaError(r.at(key), "no earlier step '" + id + "'");
  if (!it->second.count(kind)) throw SchemaError(r.at(key), "step '" + id + "' does not provide " + kind);
  return dry ? nullptr : &products.at(id);
}

const BoundState* Context::level(Reader& r, std::string* system_name) {
  const auto* p = product(r, "levels", "levels");
  const int k = r.integer("level", 0);
  if (k < 0) throw SchemaError(r.at("level"), "level index must be >= 0");
  if (dry) return nullptr;
  if (k >= static_cast<int>(p->levels.size()))
    throw ConfigError(r.at("level") + ": only " + std::to_string(p->levels.size()) + " levels were found");
  if (system_name) *system_name = p->system;
  return &p->levels[k];
}

namespace {

// "step.key[i][j]" -> json value.
const json* lookup(const json& q, const std::string& ref, std::string& err) {
  static const std::regex re(R"(^([A-Za-z0-9_\-]+)\.([A-Za-z0-9_]+)((\[[0-9]+\])*)$)");
  std::smatch m;
  if (!std::regex_match(ref, m, re)) {
    err = "malformed reference '" + ref + "' (expected step.key[i])";
    return nullptr;
  }
  if (!q.contains(m[1].str()) || !q[m[1].str()].contains(m[2].str())) {
    err = "no quantity '" + m[1].str() + "." + m[2].str() + "'";
    return nullptr;
  }
  const json* v = &q[m[1].str()][m[2].str()];
  const std::string idx = m[3].str();
  static const std::regex one(R"(\[([0-9]+)\])");
  for (auto it = std::sregex_iterator(idx.begin(), idx.end(), one); it != std::sregex_iterator(); ++it) {
    const auto i = std::stoul((*it)[1].str());
    if (!v->is_array() || i >= v->size()) {
      err = "index out of range in '" + ref + "'";
      return nullptr;
    }
    v = &(*v)[i];
  }
  return v;
}

std::string step_of(const std::string& ref) { return ref.substr(0, ref.find('.')); }

}  // namespace

double Context::resolve(const std::string& ref, const std::string& where) const {
  if (!provides.count(step_of(ref))) throw SchemaError(where, "reference to unknown or later step in '$" + ref + "'");
  if (dry) return 0.0;
  std::string err;
  const json* v = lookup(quantities, ref, err);
  if (!v) throw ConfigError(where + ": " + err);
  if (!v->is_number()) throw ConfigError(where + ": '$" + ref + "' is not a number");
  return v->get<double>();
}

SolverConfig read_solver(Reader& r, SolverConfig c) {
  c.h = r.number("h", c.h);
  c.matching_tolerance = r.number("matching_tolerance", c.matching_tolerance);
  c.bracket_resolution = r.number("bracket_resolution", c.bracket_resolution);
  c.x_match = r.number("x_match", c.x_match);
  c.decay_tolerance = r.number("decay_tolerance", c.decay_tolerance);
  c.threshold_offset = r.number("threshold_offset", c.threshold_offset);
  c.seed_tolerance = r.number("seed_tolerance", c.seed_tolerance);
  r.finish();
  return c;
}

SolverConfig Context::solver(Reader& r) {
  if (!r.has("solver")) return cfg;
  auto s = r.child("solver");
  return read_solver(s, cfg);
}

namespace {

PotentialMatrix read_potential(Reader& r, int n) {
  const auto type = r.choice("type", {"zero", "piecewise", "comb", "sum", "periodic"});
  auto check = [&](const Mat& m, const std::string& where) {
    if (m.rows() != n || m.cols() != n)
      throw SchemaError(where, "matrix must be " + std::to_string(n) + " x " + std::to_string(n));
  };
  PotentialMatrix out = PotentialMatrix::zero(n);
  if (type == "piecewise") {
    const auto edges = r.numbers("edges");
    std::vector<Mat> blocks;
    const json& bj = r.raw("blocks");
    if (!bj.is_array() || bj.size() + 1 != edges.size())
      throw SchemaError(r.at("blocks"), "need one block per interval between edges");
    for (std::size_t i = 0; i < bj.size(); ++i) {
      json wrap = {{"m", bj[i]}};
      Reader w(wrap, r.at("blocks") + "/" + std::to_string(i));
      blocks.push_back(w.mat("m"));
      check(blocks.back(), w.path());
    }
    for (std::size_t i = 1; i < edges.size(); ++i)
      if (!(edges[i] > edges[i - 1])) throw SchemaError(r.at("edges"), "edges must increase");
    out = PotentialMatrix::piecewise(edges, blocks);
  } else if (type == "comb") {
    const double period = r.number("period");
    const Mat s = r.mat("strength");
    check(s, r.at("strength"));
    out = PotentialMatrix::comb(period, s, r.number("origin", 0.0), r.integer("first"), r.integer("last"));
  } else if (type == "sum") {
    auto terms = r.children("terms");
    if (terms.empty()) throw SchemaError(r.at("terms"), "need at least one term");
    out = read_potential(terms[0], n);
    for (std::size_t i = 1; i < terms.size(); ++i) out = PotentialMatrix::sum(out, read_potential(terms[i], n));
  } else if (type == "periodic") {
    auto cell = r.child("cell");
    out = PotentialMatrix::periodic(read_potential(cell, n), r.number("period"), r.integer("cells"));
  }
  r.finish();
  return out;
}

}  // namespace

ChannelSystem read_system(Reader& r) {
  const auto eps = r.numbers("thresholds");
  if (eps.empty()) throw SchemaError(r.at("thresholds"), "need at least one channel");
  const auto dom = r.choice("domain", {"half_line", "whole_line", "interval"});
  const DomainKind kind =
      dom == "half_line" ? DomainKind::half_line : dom == "whole_line" ? DomainKind::whole_line : DomainKind::interval;
  const double xm = r.number("x_max", kind == DomainKind::whole_line ? kDefaultWholeLineXMax : kDefaultHalfLineXMax);
  auto pr = r.child("potential");
  auto v = read_potential(pr, static_cast<int>(eps.size()));
  r.finish();
  return ChannelSystem(eps, kind, xm, std::move(v));
}

namespace {

struct Assertion {
  std::string name, quantity, relation;
  json expected;
  double tol = 0.0;
};

struct Output {
  std::string kind, source, file, zones;
  double lo = 0.0, hi = 0.0, dx = 0.0;
  int stride = 1;
};

struct Scenario {
  json raw;
  std::string name, description;
  std::vector<Output> outputs;
  std::vector<Assertion> assertions;
};

std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v == 0.0 ? 0.0 : v);
  return buf;
}

void write_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + tmp.string());
    f << text;
    if (!f.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

class Csv {
 public:
  explicit Csv(const std::vector<std::string>& header) {
    for (std::size_t i = 0; i < header.size(); ++i) s_ << (i ? "," : "") << header[i];
    s_ << "\n";
  }
  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) s_ << (i ? "," : "") << format17(v[i]);
    s_ << "\n";
  }
  std::string str() const { return s_.str(); }

 private:
  std::ostringstream s_;
};

std::vector<std::string> pair_names(const std::string& p, int n) {
  std::vector<std::string> out;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) out.push_back(p + std::to_string(a + 1) + std::to_string(b + 1));
  return out;
}

void push_upper(std::vector<double>& row, const Mat& m) {
  for (int a = 0; a < m.rows(); ++a)
    for (int b = a; b < m.cols(); ++b) row.push_back(m(a, b));
}

Output read_output(Reader& r, Context& c) {
  Output o;
  o.kind = r.choice("kind", {"potential", "states", "bands"});
  o.file = r.str("file");
  if (o.file.find('/') != std::string::npos || o.file.empty()) throw SchemaError(r.at("file"), "plain file name expected");
  o.stride = r.integer("stride", 1);
  if (o.stride < 1) throw SchemaError(r.at("stride"), "stride must be >= 1");
  if (o.kind == "potential" && r.has("system")) {
    o.source = "system:" + r.str("system");
    if (!c.system_names.count(r.str("system"))) throw SchemaError(r.at("system"), "unknown system");
    o.lo = r.number("lo");
    o.hi = r.number("hi");
    o.dx = r.number("dx", 0.01);
    if (!(o.hi > o.lo) || !(o.dx > 0)) throw SchemaError(r.path(), "need lo < hi and dx > 0");
  } else {
    o.source = r.str("step");
    if (!c.provides.count(o.source)) throw SchemaError(r.at("step"), "no step '" + o.source + "'");
    const auto& kinds = c.provides.at(o.source);
    if (o.kind == "bands") {
      if (!kinds.count("bands")) throw SchemaError(r.at("step"), "step does not provide bands");
      o.zones = r.str("zones", "zones.json");
    } else if (kinds.count("reflectionless")) {
      o.lo = r.number("lo", -40.0);
      o.hi = r.number("hi", 40.0);
      o.dx = r.number("dx", 0.01);
    } else if (!kinds.count("transform") && !(o.kind == "states" && kinds.count("levels"))) {
      throw SchemaError(r.at("step"), "step does not provide " + o.kind);
    }
  }
  r.finish();
  return o;
}

Assertion read_assertion(Reader& r, const Context& c) {
  Assertion a;
  a.quantity = r.str("quantity");
  if (!c.provides.count(step_of(a.quantity))) throw SchemaError(r.at("quantity"), "no step '" + step_of(a.quantity) + "'");
  a.name = r.str("name", a.quantity);
  int n = 0;
  for (const char* rel : {"lt", "le", "gt", "ge", "eq", "between", "is"})
    if (r.has(rel)) {
      a.relation = rel;
      a.expected = r.raw(rel);
      ++n;
    }
  if (n != 1) throw SchemaError(r.path(), "exactly one of lt, le, gt, ge, eq, between, is");
  if (a.relation == "between" && !(a.expected.is_array() && a.expected.size() == 2 && a.expected[0].is_number() &&
                                   a.expected[1].is_number()))
    throw SchemaError(r.at("between"), "expected [lo, hi]");
  if (a.relation == "is" && !a.expected.is_boolean()) throw SchemaError(r.at("is"), "expected true or false");
  if (a.relation != "between" && a.relation != "is") {
    const bool ref = a.expected.is_string() && a.expected.get<std::string>().rfind('$', 0) == 0;
    if (!a.expected.is_number() && !ref) throw SchemaError(r.at(a.relation), "expected a number or a $reference");
    if (ref && !c.provides.count(step_of(a.expected.get<std::string>().substr(1))))
      throw SchemaError(r.at(a.relation), "no step '" + step_of(a.expected.get<std::string>().substr(1)) + "'");
  }
  a.tol = r.number("tol", 0.0);
  if (a.relation == "eq" && !r.has("tol")) throw SchemaError(r.path(), "eq needs tol");
  r.finish();
  return a;
}

Scenario parse(const std::string& path, Context& c, const Overrides& ov) {
  std::ifstream f(path);
  if (!f) throw SchemaError(path, "cannot open config");
  std::stringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  Scenario s;
  try {
    s.raw = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw SchemaError("line " + std::to_string(line) + ", column " + std::to_string(col), "JSON syntax error");
  }
  Reader top(s.raw, "", [&c](const std::string& ref, const std::string& where) { return c.resolve(ref, where); });
  if (top.integer("schema") != 1) throw SchemaError("/schema", "unsupported schema version (expected 1)");
  s.name = top.str("name");
  s.description = top.str("description", "");
  top.str("notes", "");
  c.cfg = SolverConfig{};
  if (top.has("solver")) {
    auto sr = top.child("solver");
    c.cfg = read_solver(sr, c.cfg);
  }
  if (ov.grid_step) c.cfg.h = *ov.grid_step;
  if (ov.seed_tolerance) c.cfg.seed_tolerance = *ov.seed_tolerance;
  if (top.has("systems")) {
    const json& sys = top.raw("systems");
    if (!sys.is_object()) throw SchemaError("/systems", "expected an object of named systems");
    for (const auto& [name, v] : sys.items()) {
      Reader sr(v, "/systems/" + name);
      auto cs = read_system(sr);
      if (ov.x_max) cs.x_max = *ov.x_max;
      c.declare_system(name, "/systems/" + name);
      c.systems.emplace(name, std::move(cs));
    }
  }
  // Steps are checked in a dry pass here and executed later.
  c.dry = true;
  for (auto& st : top.children("steps")) {
    const auto id = st.str("id");
    if (c.provides.count(id)) throw SchemaError(st.at("id"), "duplicate step id '" + id + "'");
    const auto op = st.str("op");
    const auto it = operations().find(op);
    if (it == operations().end()) throw SchemaError(st.at("op"), "unknown op '" + op + "'");
    it->second(c, st, id);
  }
  if (top.has("outputs"))
    for (auto& o : top.children("outputs")) s.outputs.push_back(read_output(o, c));
  if (top.has("assertions"))
    for (auto& a : top.children("assertions")) s.assertions.push_back(read_assertion(a, c));
  top.finish();
  return s;
}

void run_steps(const Scenario& s, Context& c) {
  c.dry = false;
  c.provides.clear();
  std::set<std::string> declared;
  for (const auto& [name, v] : c.systems) declared.insert(name);
  c.system_names = declared;
  Reader top(s.raw, "", [&c](const std::string& ref, const std::string& where) { return c.resolve(ref, where); });
  for (auto& st : top.children("steps")) {
    const auto id = st.str("id");
    st.str("op");
    operations().at(st.str("op"))(c, st, id);
  }
}

std::vector<std::string> write_outputs(const Scenario& s, Context& c, const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& o : s.outputs) {
    if (o.source.rfind("system:", 0) == 0) {
      const auto& sys = c.systems.at(o.source.substr(7));
      const int n = sys.channels();
      std::vector<std::string> h{"x"};
      for (const auto& p : pair_names("V", n)) h.push_back(p);
      Csv csv(h);
      const long count = std::lround((o.hi - o.lo) / o.dx);
      for (long i = 0; i <= count; ++i) {
        const double x = o.lo + i * o.dx;
        std::vector<double> row{x};
        push_upper(row, sys.potential.smooth(x));
        csv.row(row);
      }
      write_atomic(dir / o.file, csv.str());
      files.push_back(o.file);
      continue;
    }
    const Product& p = c.products.at(o.source);
    if (o.kind == "bands") {
      const auto& d = *p.bands;
      Csv csv({"E", "cos1_re", "cos1_im", "cos2_re", "cos2_im", "uncoupled1", "uncoupled2"});
      for (std::size_t i = 0; i < d.energy.size(); i += o.stride)
        csv.row({d.energy[i], d.coupled[i][0].real(), d.coupled[i][0].imag(), d.coupled[i][1].real(),
                 d.coupled[i][1].imag(), d.uncoupled[i][0], d.uncoupled[i][1]});
      write_atomic(dir / o.file, csv.str());
      json z = {{"allowed", c.quantities[o.source]["allowed"]},
                {"forbidden", c.quantities[o.source]["forbidden"]},
                {"uncoupled_allowed", c.quantities[o.source]["uncoupled_allowed"]},
                {"uncoupled_intersection", c.quantities[o.source]["uncoupled_intersection"]}};
      write_atomic(dir / o.zones, z.dump(2) + "\n");
      files.push_back(o.file);
      files.push_back(o.zones);
      continue;
    }
    if (p.reflectionless) {
      const auto& rl = *p.reflectionless;
      const int n = rl.channels(), k = static_cast<int>(rl.levels().size());
      std::vector<std::string> h{"x"};
      if (o.kind == "potential") {
        for (const auto& q : pair_names("V", n)) h.push_back(q);
      } else {
        for (int j = 0; j < k; ++j)
          for (int a = 0; a < n; ++a) h.push_back("psi" + std::to_string(a + 1) + "_" + std::to_string(j + 1));
      }
      Csv csv(h);
      const long count = std::lround((o.hi - o.lo) / o.dx);
      for (long i = 0; i <= count; ++i) {
        const double x = o.lo + i * o.dx;
        std::vector<double> row{x};
        if (o.kind == "potential") {
          push_upper(row, rl.potential(x));
        } else {
          const Mat st = rl.states(x);
          for (int j = 0; j < k; ++j)
            for (int a = 0; a < n; ++a) row.push_back(st(a, j));
        }
        csv.row(row);
      }
      write_atomic(dir / o.file, csv.str());
      files.push_back(o.file);
      continue;
    }
    if (o.kind == "states" && !p.transform) {
      // Levels of a bound_states step, each on its own grid: long format.
      std::vector<std::string> h{"level", "x"};
      const int n = p.levels.empty() ? 1 : p.levels[0].psi.rows;
      for (int a = 0; a < n; ++a) h.push_back("psi" + std::to_string(a + 1));
      Csv long_csv(h);
      for (std::size_t j = 0; j < p.levels.size(); ++j) {
        const auto& psi = p.levels[j].psi;
        for (std::size_t i = 0; i < psi.size(); i += o.stride) {
          std::vector<double> row{static_cast<double>(j), psi.x[i]};
          for (int a = 0; a < n; ++a) row.push_back(psi.value(i)(a, 0));
          long_csv.row(row);
        }
      }
      write_atomic(dir / o.file, long_csv.str());
      files.push_back(o.file);
      continue;
    }
    const auto& t = *p.transform;
    const int n = t.system.channels();
    std::vector<std::string> h{"x"};
    Csv csv = [&] {
      if (o.kind == "potential") {
        for (const auto& q : pair_names("V", n)) h.push_back(q);
        for (const auto& q : pair_names("dV", n)) h.push_back(q);
      } else {
        for (int j = 0; j < t.states.cols; ++j)
          for (int a = 0; a < n; ++a) h.push_back("psi" + std::to_string(a + 1) + "_" + std::to_string(j + 1));
      }
      return Csv(h);
    }();
    for (std::size_t i = 0; i < t.x.size(); i += o.stride) {
      std::vector<double> row{t.x[i]};
      if (o.kind == "potential") {
        push_upper(row, t.system.potential.smooth(t.x[i]));
        push_upper(row, t.delta_v[i]);
      } else {
        const Mat v = t.states.value(i);
        for (int j = 0; j < v.cols(); ++j)
          for (int a = 0; a < n; ++a) row.push_back(v(a, j));
      }
      csv.row(row);
    }
    write_atomic(dir / o.file, csv.str());
    files.push_back(o.file);
  }
  return files;
}

json check(const Assertion& a, const Context& c, bool& pass) {
  json out = {{"name", a.name}, {"quantity", a.quantity}, {"relation", a.relation}, {"expected", a.expected}};
  if (a.relation == "eq") out["tol"] = a.tol;
  std::string err;
  const json* v = lookup(c.quantities, a.quantity, err);
  bool ok = false;
  if (!v) {
    out["error"] = err;
  } else {
    out["measured"] = *v;
    if (a.relation == "is") {
      ok = v->is_boolean() && v->get<bool>() == a.expected.get<bool>();
    } else if (v->is_number()) {
      const double x = v->get<double>();
      double want = 0.0;
      if (a.expected.is_string()) {
        const json* w = lookup(c.quantities, a.expected.get<std::string>().substr(1), err);
        if (!w || !w->is_number()) {
          out["error"] = w ? "reference is not a number" : err;
          pass = false;
          out["pass"] = false;
          return out;
        }
        want = w->get<double>();
        out["expected_value"] = want;
      } else if (a.expected.is_number()) {
        want = a.expected.get<double>();
      }
      if (a.relation == "lt") ok = x < want;
      if (a.relation == "le") ok = x <= want;
      if (a.relation == "gt") ok = x > want;
      if (a.relation == "ge") ok = x >= want;
      if (a.relation == "eq") ok = std::abs(x - want) <= a.tol;
      if (a.relation == "between") ok = a.expected[0].get<double>() <= x && x <= a.expected[1].get<double>();
    } else {
      out["error"] = "quantity is not a number";
    }
  }
  out["pass"] = ok;
  pass = pass && ok;
  return out;
}

json solver_json(const SolverConfig& c) {
  return {{"h", c.h},
          {"matching_tolerance", c.matching_tolerance},
          {"bracket_resolution", c.bracket_resolution},
          {"decay_tolerance", c.decay_tolerance},
          {"threshold_offset", c.threshold_offset},
          {"seed_tolerance", c.seed_tolerance},
          {"x_match", std::isnan(c.x_match) ? json(nullptr) : json(c.x_match)}};
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const SingularTransformError*>(&e)) return "singular_transform";
  if (dynamic_cast<const OverflowError*>(&e)) return "overflow";
  if (dynamic_cast<const ThresholdError*>(&e)) return "threshold";
  if (dynamic_cast<const ConstructionError*>(&e)) return "construction";
  if (dynamic_cast<const DomainError*>(&e)) return "domain";
  if (dynamic_cast<const ConfigError*>(&e)) return "config";
  return "runtime";
}

json error_payload(const std::exception& e) {
  json p = {{"kind", error_kind(e)}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const SingularTransformError*>(&e)) p["x"] = s->where();
  if (const auto* o = dynamic_cast<const OverflowError*>(&e)) p["x"] = o->where();
  return p;
}

}  // namespace

const std::vector<std::string>& catalog() {
  static const std::vector<std::string> names{"fig1",
                                              "fig2",
                                              "fig3",
                                              "fig4",
                                              "fig5",
                                              "fig6",
                                              "transparency",
                                              "bsec_tails",
                                              "resonance_widths",
                                              "resonance_tunneling",
                                              "leftright_asymmetry",
                                              "susy_flip",
                                              "gap_creation",
                                              "level_splitting"};
  return names;
}

std::string scenario_dir() {
  if (const char* e = std::getenv("MCD_SCENARIO_DIR")) return e;
  return MCD_DEFAULT_SCENARIO_DIR;
}

std::string resolve_config(const std::string& name) {
  if (fs::exists(name) || name.find('/') != std::string::npos) return name;
  const fs::path bundled = fs::path(scenario_dir()) / (name + ".json");
  return fs::exists(bundled) ? bundled.string() : name;
}

int validate_scenario(const std::string& config, std::ostream& err) {
  Context c;
  try {
    parse(resolve_config(config), c, {});
    return kPass;
  } catch (const SchemaError& e) {
    err << "config error: " << e.what() << "\n";
  } catch (const mcd::Error& e) {
    err << "config error: " << e.what() << "\n";
  }
  return kConfigError;
}

int run_scenario(const std::string& config, const std::string& out_dir, const Overrides& ov, std::ostream& log,
                 std::ostream& err) {
  Context c;
  Scenario s;
  try {
    s = parse(resolve_config(config), c, ov);
  } catch (const SchemaError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const mcd::Error& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  }

  const fs::path dir(out_dir);
  json manifest = {{"schema", 1}, {"scenario", s.name}, {"description", s.description}, {"parameters", s.raw}};
  auto finish = [&](const std::string& status) {
    manifest["status"] = status;
    try {
      write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
      err << "cannot write manifest: " << e.what() << "\n";
    }
  };
  try {
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    err << "cannot create " << out_dir << ": " << e.what() << "\n";
    return kNumericalError;
  }
  try {
    run_steps(s, c);
    manifest["solver"] = solver_json(c.cfg);
    manifest["derived"] = c.quantities;
    manifest["files"] = write_outputs(s, c, dir);
  } catch (const mcd::ConfigError& e) {
    manifest["derived"] = c.quantities;
    manifest["error"] = error_payload(e);
    finish("config_error");
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    manifest["derived"] = c.quantities;
    manifest["error"] = error_payload(e);
    finish("numerical_error");
    err << "numerical error: " << manifest["error"].dump() << "\n";
    return kNumericalError;
  }
  bool pass = true;
  manifest["assertions"] = json::array();
  for (const auto& a : s.assertions) {
    manifest["assertions"].push_back(check(a, c, pass));
    const auto& last = manifest["assertions"].back();
    log << (last["pass"].get<bool>() ? "PASS " : "FAIL ") << a.name << " (" << a.quantity << " = "
        << (last.contains("measured") ? last["measured"].dump() : std::string("missing")) << ")\n";
  }
  finish(pass ? "pass" : "assertion_failed");
  return pass ? kPass : kAssertionFailed;
}

}  // namespace mcdcli
