#include <doctest.h>

#include <algorithm>
#include <complex>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "cli.hpp"
#include "mcd/bands.hpp"
#include "mcd/engine.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using cplx = std::complex<double>;

namespace {

const fs::path kScratch = fs::temp_directory_path() / ("mcd_cli_" + std::to_string(::getpid()));

struct Cleanup {
  ~Cleanup() {
    std::error_code ec;
    fs::remove_all(kScratch, ec);
  }
} cleanup;

fs::path scratch(const std::string& name) {
  const fs::path p = kScratch / name;
  fs::remove_all(p);
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

json load(const fs::path& p) { return json::parse(slurp(p)); }

json scenario(const std::string& name) { return load(mcdcli::resolve_config(name)); }

fs::path write_config(const std::string& name, const json& j) {
  const fs::path p = scratch(name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

int run(const fs::path& config, const fs::path& out, const mcdcli::Overrides& ov = {}) {
  std::ostringstream log, err;
  return mcdcli::run_scenario(config.string(), out.string(), ov, log, err);
}

std::string run_err(const fs::path& config, const fs::path& out) {
  std::ostringstream log, err;
  mcdcli::run_scenario(config.string(), out.string(), {}, log, err);
  return err.str();
}

// Half traces of one engine-integrated period: 4c^2 - 2 tr(M) c + e2(M) - 2 = 0.
std::array<cplx, 2> monodromy_branches(const mcd::CombSpec& spec, double e) {
  const mcd::Mat m = mcd::monodromy(spec.system(1), e, 0.0, spec.period);
  const double t1 = m.trace();
  const double t2 = 0.5 * (t1 * t1 - (m * m).trace());
  const cplx root = std::sqrt(cplx(t1 * t1 - 4.0 * (t2 - 2.0), 0.0));
  return {(t1 + root) / 4.0, (t1 - root) / 4.0};
}

bool allowed(cplx c) { return std::abs(c.imag()) < 1e-9 && std::abs(c.real()) <= 1.0; }

}  // namespace

TEST_CASE("catalog") {
  const auto& names = mcdcli::catalog();
  REQUIRE(names.size() == 14);
  CHECK(names.front() == "fig1");
  CHECK(names.back() == "level_splitting");
  for (const auto& n : names) {
    CAPTURE(n);
    std::ostringstream err;
    CHECK(mcdcli::validate_scenario(n, err) == mcdcli::kPass);
    CHECK(err.str().empty());
    CHECK(scenario(n)["name"] == n);
  }
}

TEST_CASE("fig4 config carries the second weight vector") {
  const auto j = scenario("fig4");
  const auto& lv = j["steps"][0]["levels"];
  REQUIRE(lv.size() == 2);
  CHECK(lv[0]["energy"] == -0.5);
  CHECK(lv[1]["energy"] == -0.5);
  CHECK(lv[1]["m"] == json::array({1, 1.01}));
}

TEST_CASE("fig6 writes both branches and the zones") {
  const auto out = scratch("fig6");
  REQUIRE(run(mcdcli::resolve_config("fig6"), out) == mcdcli::kPass);
  const auto csv = slurp(out / "bands.csv");
  CHECK(csv.rfind("E,cos1_re,cos1_im,cos2_re,cos2_im,uncoupled1,uncoupled2\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4001);

  const auto z = load(out / "zones.json");
  REQUIRE(z["forbidden"].size() == 2);
  REQUIRE(z["allowed"].size() == 2);
  const auto cfg = scenario("fig6")["steps"][0]["comb"];
  const mcd::CombSpec spec{std::numbers::pi, mcd::Mat{{6, 1}, {1, 5}}, {0.0, 1.0}};
  CHECK(cfg["strength"] == json::parse("[[6, 1], [1, 5]]"));
  // Midpoints of listed zones against the monodromy of one period.
  for (int b = 0; b < 2; ++b) {
    CHECK(!z["forbidden"][b].empty());
    for (const char* kind : {"forbidden", "allowed"})
      for (const auto& iv : z[kind][b]) {
        const double lo = iv[0], hi = iv[1];
        if (hi - lo < 1e-3) continue;
        auto br = monodromy_branches(spec, 0.5 * (lo + hi));
        if (br[0].real() < br[1].real()) std::swap(br[0], br[1]);
        CAPTURE(b);
        CAPTURE(lo);
        CHECK(allowed(br[b]) == (std::string(kind) == "allowed"));
      }
  }
  const auto m = load(out / "manifest.json");
  CHECK(m["status"] == "pass");
  CHECK(m["files"] == json::array({"bands.csv", "zones.json"}));
}

TEST_CASE("ratio-one weight scaling leaves the potential alone") {
  const auto out = scratch("identity");
  REQUIRE(run(mcdcli::resolve_config("identity"), out) == mcdcli::kPass);
  std::istringstream csv(slurp(out / "potential.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "x,V11,dV11");
  int rows = 0;
  while (std::getline(csv, line)) {
    CHECK(line.substr(line.rfind(',') + 1) == "0");
    ++rows;
  }
  CHECK(rows > 1000);
}

TEST_CASE("fig3: raking the first weight empties the second channel") {
  const auto out = scratch("fig3");
  REQUIRE(run(mcdcli::resolve_config("fig3"), out) == mcdcli::kPass);
  const auto m = load(out / "manifest.json");
  const double f2 = m["derived"]["raked"]["channel_fraction"][1];
  CHECK(f2 < 0.01);
  const auto before = m["derived"]["levels"]["m"][0], after = m["derived"]["after"]["m"][0];
  CHECK(after[0].get<double>() == doctest::Approx(1e7 * before[0].get<double>()).epsilon(1e-4));
  CHECK(after[1].get<double>() == doctest::Approx(before[1].get<double>()).epsilon(1e-4));
}

TEST_CASE("runs are deterministic") {
  for (const char* name : {"fig6", "fig4"}) {
    const auto a = scratch(std::string(name) + "_a"), b = scratch(std::string(name) + "_b");
    REQUIRE(run(mcdcli::resolve_config(name), a) == mcdcli::kPass);
    REQUIRE(run(mcdcli::resolve_config(name), b) == mcdcli::kPass);
    for (const auto& f : load(a / "manifest.json")["files"]) {
      CAPTURE(f);
      CHECK(slurp(a / f.get<std::string>()) == slurp(b / f.get<std::string>()));
    }
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  }
}

TEST_CASE("manifest lists every assertion") {
  const auto out = scratch("transparency");
  REQUIRE(run(mcdcli::resolve_config("transparency"), out) == mcdcli::kPass);
  const auto m = load(out / "manifest.json");
  const auto cfg = scenario("transparency");
  REQUIRE(m["assertions"].size() == cfg["assertions"].size());
  for (std::size_t i = 0; i < cfg["assertions"].size(); ++i) {
    CHECK(m["assertions"][i]["name"] == cfg["assertions"][i]["name"]);
    CHECK(m["assertions"][i].contains("measured"));
    CHECK(m["assertions"][i]["pass"] == true);
  }
  CHECK(m["parameters"] == cfg);
  CHECK(m["solver"].contains("h"));
  CHECK(m["derived"]["levels"]["energies"][0].get<double>() == doctest::Approx(-0.5).epsilon(1e-6));
}

TEST_CASE("overrides reach the solver") {
  const auto out = scratch("override");
  mcdcli::Overrides ov;
  ov.grid_step = 2e-3;
  ov.seed_tolerance = 1e-10;
  REQUIRE(run(mcdcli::resolve_config("identity"), out, ov) == mcdcli::kPass);
  const auto m = load(out / "manifest.json");
  CHECK(m["solver"]["h"] == 2e-3);
  CHECK(m["solver"]["seed_tolerance"] == 1e-10);
}

TEST_CASE("config errors exit with 2") {
  const auto base = scenario("identity");
  auto expect = [&](const json& cfg, const std::string& where) {
    const auto p = write_config("bad", cfg);
    const auto out = scratch("bad_out");
    std::ostringstream err;
    CHECK(mcdcli::validate_scenario(p.string(), err) == mcdcli::kConfigError);
    CHECK(err.str().find(where) != std::string::npos);
    CHECK(run(p, out) == mcdcli::kConfigError);
    CHECK(!fs::exists(out / "manifest.json"));
  };
  SUBCASE("unknown field") {
    auto j = base;
    j["systems"]["well"]["colour"] = 1;
    expect(j, "/systems/well/colour");
  }
  SUBCASE("schema version") {
    auto j = base;
    j["schema"] = 2;
    expect(j, "/schema");
  }
  SUBCASE("unknown op") {
    auto j = base;
    j["steps"][1]["op"] = "nonsense";
    expect(j, "/steps/1/op");
  }
  SUBCASE("undeclared system") {
    auto j = base;
    j["steps"][0]["system"] = "elsewhere";
    expect(j, "/steps/0/system");
  }
  SUBCASE("reference to a later step") {
    auto j = base;
    j["steps"][1]["ratio"] = "$later.value";
    expect(j, "/steps/1/ratio");
  }
  SUBCASE("duplicate step id") {
    auto j = base;
    j["steps"][1]["id"] = "levels";
    expect(j, "/steps/1/id");
  }
  SUBCASE("assertion on an unknown step") {
    auto j = base;
    j["assertions"][0]["quantity"] = "nowhere.max_delta";
    expect(j, "/assertions/0/quantity");
  }
  SUBCASE("syntax error reports line and column") {
    const auto p = scratch("syntax.json");
    std::ofstream(p) << "{\n  \"schema\": 1,\n  \"name\": \"x\",, \n}\n";
    const auto msg = run_err(p, scratch("syntax_out"));
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("column") != std::string::npos);
  }
}

TEST_CASE("numerical failure exits with 3 and records the payload") {
  auto j = scenario("susy_flip");
  j["steps"][1]["seed"][0]["basis"] = "regular";
  const auto out = scratch("singular");
  CHECK(run(write_config("singular", j), out) == mcdcli::kNumericalError);
  const auto m = load(out / "manifest.json");
  CHECK(m["status"] == "numerical_error");
  CHECK(m["error"]["kind"] == "singular_transform");
  CHECK(m["error"]["x"] == 0.0);
}

TEST_CASE("failed assertion exits with 4") {
  auto j = scenario("identity");
  j["assertions"].push_back({{"name", "impossible"}, {"quantity", "same.max_delta"}, {"gt", 1}});
  const auto out = scratch("failing");
  CHECK(run(write_config("failing", j), out) == mcdcli::kAssertionFailed);
  const auto m = load(out / "manifest.json");
  CHECK(m["status"] == "assertion_failed");
  REQUIRE(m["assertions"].size() == 2);
  CHECK(m["assertions"][0]["pass"] == true);
  CHECK(m["assertions"][1]["pass"] == false);
  CHECK(m["assertions"][1]["measured"] == 0.0);
}
