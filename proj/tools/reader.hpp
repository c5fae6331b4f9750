#pragma once

// Strict reader over one JSON object of a scenario config. Every accessor records
// the key, and finish() rejects keys nobody asked for (catches typos).

#include <functional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcd/domain.hpp"

namespace mcdcli {

using json = nlohmann::json;

/// Config does not match the schema. `where` is a JSON pointer, or "line L, column C".
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& where, const std::string& what)
      : std::runtime_error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

/// Resolves "$step.key[i]" references inside numeric fields.
using Resolver = std::function<double(const std::string& ref, const std::string& where)>;

class Reader {
 public:
  Reader(const json& j, std::string path, Resolver resolve = {});

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return path_ + "/" + key; }
  bool has(const std::string& key) const;
  const json& raw(const std::string& key);

  double number(const std::string& key);
  double number(const std::string& key, double fallback);
  int integer(const std::string& key);
  int integer(const std::string& key, int fallback);
  std::string str(const std::string& key);
  std::string str(const std::string& key, const std::string& fallback);
  std::string choice(const std::string& key, const std::vector<std::string>& allowed);
  bool boolean(const std::string& key, bool fallback);
  std::vector<double> numbers(const std::string& key);
  mcd::Vec vec(const std::string& key);
  mcd::Mat mat(const std::string& key);
  Reader child(const std::string& key);
  std::vector<Reader> children(const std::string& key);

  void finish() const;

 private:
  const json& need(const std::string& key);
  double to_number(const json& v, const std::string& where) const;

  const json* j_;
  std::string path_;
  Resolver resolve_;
  std::set<std::string> used_;
};

}  // namespace mcdcli
