#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sewkit/pattern.hpp"

namespace fixture {

inline std::filesystem::path data(const std::string& name) {
  return std::filesystem::path(SEWKIT_TEST_DATA) / name;
}

inline std::string read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Two 36 x 55 cm rectangles joined by both side seams.
inline std::string skirt_text() { return read(data("skirt.pattern.json")); }
inline sewkit::SewingPattern skirt() { return sewkit::parse_pattern(skirt_text()); }

// Fresh scratch directory per test.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sewkit-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
