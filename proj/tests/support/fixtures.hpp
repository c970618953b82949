#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "docparse/pipeline.hpp"

namespace testsupport {

constexpr int kPageWidth = 1000;
constexpr int kPageHeight = 1400;

inline std::string data_path(const std::string& rel) { return std::string(DOCPARSE_TEST_DATA) + "/" + rel; }

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// pN.layout.json, pN.fixture.json and optional pN_eK.json detections
inline std::vector<docparse::PageInput> load_document(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<docparse::PageInput> pages;
  for (std::size_t n = 1;; ++n) {
    const std::string stem = "p" + std::to_string(n);
    const fs::path layout = dir / (stem + ".layout.json");
    if (!fs::exists(layout)) break;
    docparse::PageInput page;
    page.layout_json = slurp(layout);
    page.fixture_json = slurp(dir / (stem + ".fixture.json"));
    page.width = kPageWidth;
    page.height = kPageHeight;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      const std::string prefix = stem + "_e";
      if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".json") continue;
      const std::size_t index = std::stoul(name.substr(prefix.size()));
      page.detections[index] = docparse::detections_from_json(nlohmann::json::parse(slurp(entry.path())));
    }
    pages.push_back(std::move(page));
  }
  return pages;
}

inline std::string layout_entry(const docparse::Rect& r, std::size_t index, const std::string& label) {
  nlohmann::json j = {{"bbox", {r.x1, r.y1, r.x2, r.y2}}, {"index", index}, {"label", label}, {"rotation", 0}};
  return j.dump();
}

}  // namespace testsupport
