#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fwal/mdp.hpp"

namespace fwal {

/*
 * MDP JSON schema:
 *
 *   {
 *     "n_states":     S,
 *     "n_actions":    A,
 *     "gamma":        discount in [0,1),
 *     "transitions":  [A][S][S] probabilities, transitions[a][s][s'],
 *     "initial_dist": [S],
 *     "features":     [S][k], entries in [0,1]
 *   }
 */

namespace detail {

inline std::vector<double> json_row(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array()) fail(what, " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) fail(what, " must contain numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

inline Eigen::MatrixXd json_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                                   const std::string& what) {
  if (!j.is_array() || j.size() != rows) fail(what, " must have ", rows, " rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = json_row(j[r], what + "[" + std::to_string(r) + "]");
    if (row.size() != cols) fail(what, "[", r, "] must have ", cols, " entries");
    for (std::size_t c = 0; c < cols; ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

inline std::size_t json_count(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() <= 0)
    fail("\"", key, "\" must be a positive integer");
  return j[key].get<std::size_t>();
}

}  // namespace detail

inline nlohmann::json to_json(const MdpSpec& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states();
  j["n_actions"] = mdp.n_actions();
  j["gamma"] = mdp.discount();
  auto& trans = j["transitions"] = nlohmann::json::array();
  for (const auto& p : mdp.transitions()) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index s = 0; s < p.rows(); ++s)
      rows.push_back(std::vector<double>(p.row(s).begin(), p.row(s).end()));
    trans.push_back(std::move(rows));
  }
  j["initial_dist"] = std::vector<double>(mdp.initial_dist().begin(), mdp.initial_dist().end());
  auto& feats = j["features"] = nlohmann::json::array();
  for (Eigen::Index s = 0; s < mdp.features().rows(); ++s)
    feats.push_back(std::vector<double>(mdp.features().row(s).begin(), mdp.features().row(s).end()));
  return j;
}

/// Parses and validates an MDP. Throws ValidationError on schema or probability violations.
inline MdpSpec mdp_from_json(const nlohmann::json& j) {
  if (!j.is_object()) detail::fail("MDP document must be a JSON object");
  const auto n = detail::json_count(j, "n_states");
  const auto na = detail::json_count(j, "n_actions");
  if (!j.contains("gamma") || !j["gamma"].is_number()) detail::fail("\"gamma\" must be a number");
  for (const char* key : {"transitions", "initial_dist", "features"})
    if (!j.contains(key)) detail::fail("missing \"", key, "\"");

  const auto& trans = j["transitions"];
  if (!trans.is_array() || trans.size() != na) detail::fail("\"transitions\" must hold ", na, " matrices");
  std::vector<Eigen::MatrixXd> p;
  for (std::size_t a = 0; a < na; ++a)
    p.push_back(detail::json_matrix(trans[a], n, n, "transitions[" + std::to_string(a) + "]"));

  const auto init = detail::json_row(j["initial_dist"], "initial_dist");
  if (init.size() != n) detail::fail("\"initial_dist\" must have ", n, " entries");

  const auto& feats = j["features"];
  if (!feats.is_array() || feats.size() != n || !feats[0].is_array())
    detail::fail("\"features\" must have ", n, " rows");
  const auto k = feats[0].size();
  return MdpSpec(std::move(p), j["gamma"].get<double>(),
                 Eigen::Map<const Eigen::VectorXd>(init.data(), static_cast<Eigen::Index>(n)),
                 detail::json_matrix(feats, n, k, "features"));
}

inline MdpSpec load_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    detail::fail(path, ": ", e.what());
  }
  return mdp_from_json(j);
}

}  // namespace fwal
