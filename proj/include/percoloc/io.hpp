#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "percoloc/geometry.hpp"
#include "percoloc/grid_bootstrap.hpp"

namespace percoloc {

/// Replayable fixture form of a node set: {density, seed, points: [[x,y],...]}.
inline nlohmann::json node_set_to_json(const NodeSet& nodes) {
  nlohmann::json j;
  j["density"] = nodes.density;
  j["seed"] = nodes.seed;
  auto pts = nlohmann::json::array();
  for (const auto& p : nodes.points) pts.push_back({p.x, p.y});
  j["points"] = std::move(pts);
  return j;
}

inline NodeSet node_set_from_json(const nlohmann::json& j) {
  NodeSet out;
  out.density = j.at("density").get<double>();
  out.seed = j.at("seed").get<std::uint64_t>();
  for (const auto& p : j.at("points")) {
    out.points.push_back(Point{p.at(0).get<double>(), p.at(1).get<double>()});
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline NodeSet load_node_set(const std::string& path) {
  return node_set_from_json(nlohmann::json::parse(read_file(path)));
}

inline void save_node_set(const NodeSet& nodes, const std::string& path) {
  write_file(path, node_set_to_json(nodes).dump(2) + "\n");
}

inline GridState load_grid_fixture(const std::string& path, BootstrapRule rule) {
  return grid_from_text(read_file(path), rule);
}

inline void save_grid_fixture(const GridState& state, const std::string& path) {
  write_file(path, to_text(state));
}

}  // namespace percoloc
