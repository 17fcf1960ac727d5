#pragma once

#include <Eigen/Core>
#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "gpssm/error.hpp"
#include "gpssm/gp/kernel.hpp"

namespace gpssm::eval::detail {

using nlohmann::json;

inline json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json to_json_row(const Eigen::RowVectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

/// Reads [[...], ...]; `cols` fixes the width of an empty matrix.
inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& where, Eigen::Index cols = 0) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of rows");
  if (j.empty()) return Eigen::MatrixXd(0, cols);
  const auto c = j.front().is_array() ? j.front().size() : 0;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(c));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != c) throw ConfigError(where + ": ragged matrix");
    for (std::size_t k = 0; k < c; ++k) {
      if (!j[r][k].is_number()) throw ConfigError(where + ": non-numeric entry");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = j[r][k].get<double>();
    }
  }
  return m;
}

inline Eigen::RowVectorXd row_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(where + ": non-numeric entry");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

inline std::string to_string(gp::MeanFunction::Kind k) {
  switch (k) {
    case gp::MeanFunction::Kind::Zero:
      return "zero";
    case gp::MeanFunction::Kind::Constant:
      return "constant";
    case gp::MeanFunction::Kind::Identity:
      return "identity";
    case gp::MeanFunction::Kind::Linear:
      return "linear";
  }
  return "unknown";
}

inline gp::MeanFunction::Kind mean_kind_from_string(const std::string& s) {
  if (s == "zero") return gp::MeanFunction::Kind::Zero;
  if (s == "constant") return gp::MeanFunction::Kind::Constant;
  if (s == "identity") return gp::MeanFunction::Kind::Identity;
  if (s == "linear") return gp::MeanFunction::Kind::Linear;
  throw ConfigError("unknown mean function '" + s + "' (expected zero, constant, identity, linear)");
}

/// Typed access to one JSON object that remembers which keys were read, so
/// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(label() + " must be an object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_->contains(key); }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_->contains(key)) return;
    seen_.insert(key);
    try {
      out = j_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where(key) + ": " + e.what());
    }
  }

  const json* raw(const std::string& key) {
    if (!j_->contains(key)) return nullptr;
    seen_.insert(key);
    return &j_->at(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    return {j_->at(key), where(key)};
  }

  [[nodiscard]] std::string where(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, _] : j_->items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + where(key) + "'");
    }
  }

 private:
  [[nodiscard]] std::string label() const { return path_.empty() ? "config" : path_; }

  const json* j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace gpssm::eval::detail
