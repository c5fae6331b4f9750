#include "reader.hpp"

#include <cmath>

namespace mcdcli {

Reader::Reader(const json& j, std::string path, Resolver resolve)
    : j_(&j), path_(std::move(path)), resolve_(std::move(resolve)) {
  if (!j.is_object()) throw SchemaError(path_.empty() ? "/" : path_, "expected an object");
}

bool Reader::has(const std::string& key) const { return j_->contains(key); }

const json& Reader::need(const std::string& key) {
  used_.insert(key);
  if (!j_->contains(key)) throw SchemaError(at(key), "missing required field");
  return (*j_)[key];
}

const json& Reader::raw(const std::string& key) { return need(key); }

double Reader::to_number(const json& v, const std::string& where) const {
  if (v.is_number()) {
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw SchemaError(where, "number must be finite");
    return d;
  }
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (!s.empty() && s[0] == '$') {
      if (!resolve_) throw SchemaError(where, "references are not allowed here");
      return resolve_(s.substr(1), where);
    }
  }
  throw SchemaError(where, "expected a number");
}

double Reader::number(const std::string& key) { return to_number(need(key), at(key)); }

double Reader::number(const std::string& key, double fallback) { return has(key) ? number(key) : (used_.insert(key), fallback); }

int Reader::integer(const std::string& key) {
  const json& v = need(key);
  if (!v.is_number_integer()) throw SchemaError(at(key), "expected an integer");
  return v.get<int>();
}

int Reader::integer(const std::string& key, int fallback) { return has(key) ? integer(key) : (used_.insert(key), fallback); }

std::string Reader::str(const std::string& key) {
  const json& v = need(key);
  if (!v.is_string()) throw SchemaError(at(key), "expected a string");
  return v.get<std::string>();
}

std::string Reader::str(const std::string& key, const std::string& fallback) {
  return has(key) ? str(key) : (used_.insert(key), fallback);
}

std::string Reader::choice(const std::string& key, const std::vector<std::string>& allowed) {
  const auto s = str(key);
  for (const auto& a : allowed)
    if (a == s) return s;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw SchemaError(at(key), "'" + s + "' is not one of: " + list);
}

bool Reader::boolean(const std::string& key, bool fallback) {
  used_.insert(key);
  if (!has(key)) return fallback;
  const json& v = (*j_)[key];
  if (!v.is_boolean()) throw SchemaError(at(key), "expected true or false");
  return v.get<bool>();
}

std::vector<double> Reader::numbers(const std::string& key) {
  const json& v = need(key);
  if (!v.is_array()) throw SchemaError(at(key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(to_number(v[i], at(key) + "/" + std::to_string(i)));
  return out;
}

mcd::Vec Reader::vec(const std::string& key) {
  const auto v = numbers(key);
  if (v.empty()) throw SchemaError(at(key), "expected a nonempty array");
  return Eigen::Map<const mcd::Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

mcd::Mat Reader::mat(const std::string& key) {
  const json& v = need(key);
  if (!v.is_array() || v.empty() || !v[0].is_array())
    throw SchemaError(at(key), "expected a matrix (array of rows)");
  const auto rows = static_cast<Eigen::Index>(v.size()), cols = static_cast<Eigen::Index>(v[0].size());
  mcd::Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::string row_at = at(key) + "/" + std::to_string(r);
    if (!v[r].is_array() || static_cast<Eigen::Index>(v[r].size()) != cols) throw SchemaError(row_at, "ragged matrix row");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = to_number(v[r][c], row_at + "/" + std::to_string(c));
  }
  return m;
}

Reader Reader::child(const std::string& key) { return Reader(need(key), at(key), resolve_); }

std::vector<Reader> Reader::children(const std::string& key) {
  const json& v = need(key);
  if (!v.is_array()) throw SchemaError(at(key), "expected an array of objects");
  std::vector<Reader> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.emplace_back(v[i], at(key) + "/" + std::to_string(i), resolve_);
  return out;
}

void Reader::finish() const {
  for (const auto& [k, v] : j_->items())
    if (!used_.count(k)) throw SchemaError(at(k), "unknown field");
}

}  // namespace mcdcli
