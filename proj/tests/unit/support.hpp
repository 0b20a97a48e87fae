#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace harvest_test {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline const nlohmann::json& golden() {
  static const nlohmann::json g = nlohmann::json::parse(read_text(HARVEST_SOURCE_DIR "/tests/golden/thresholds.json"));
  return g;
}

inline std::string config_path(const std::string& name) { return HARVEST_SOURCE_DIR "/configs/" + name; }

inline double rel_diff(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace harvest_test
