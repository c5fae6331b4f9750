#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mcd/bands.hpp"
#include "mcd/engine.hpp"
#include "mcd/marchenko.hpp"
#include "mcd/transform.hpp"
#include "reader.hpp"

namespace mcdcli {

/// What a step leaves behind for later steps and for the outputs.
struct Product {
  std::optional<mcd::TransformResult> transform;
  std::optional<mcd::Reflectionless> reflectionless;
  std::vector<mcd::BoundState> levels;
  std::optional<mcd::BandDiagram> bands;
  std::string system;  // system the step worked on or produced
};

struct Context {
  bool dry = false;
  mcd::SolverConfig cfg;
  std::map<std::string, mcd::ChannelSystem> systems;
  std::set<std::string> system_names;
  std::map<std::string, Product> products;
  std::map<std::string, std::set<std::string>> provides;  // step id -> product kinds
  json quantities = json::object();

  void declare_system(const std::string& name, const std::string& where);
  void declare_step(const std::string& id, std::set<std::string> kinds);

  /// Named system (nullptr in a dry run).
  const mcd::ChannelSystem* system(Reader& r, const std::string& key = "system");
  /// Earlier step that provides `kind` (nullptr in a dry run).
  const Product* product(Reader& r, const std::string& key, const std::string& kind);
  /// Bound state picked by "levels" (a bound_states step) and "level" (index).
  const mcd::BoundState* level(Reader& r, std::string* system_name = nullptr);

  double resolve(const std::string& ref, const std::string& where) const;
  /// Step-local solver settings merged over the global ones.
  mcd::SolverConfig solver(Reader& r);
};

using Op = std::function<void(Context&, Reader&, const std::string& id)>;
const std::map<std::string, Op>& operations();

mcd::SolverConfig read_solver(Reader& r, mcd::SolverConfig base);
mcd::ChannelSystem read_system(Reader& r);

json to_json(const mcd::Vec& v);
json to_json(const mcd::Mat& m);

}  // namespace mcdcli
