#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "docparse/error.hpp"
#include "docparse/html.hpp"
#include "docparse/image.hpp"
#include "docparse/table_grid.hpp"

// Image-decoupled table parsing: embedded figures are masked out of the
// table crop before recognition and re-inserted into the recognized HTML
// afterwards through a placeholder id <-> image mapping.
namespace docparse {

struct IdtpConfig {
  double min_confidence = 0.3;
  double overlap_tolerance = 0.2;  // max intersection / smaller area between kept masks
  Rgb fill{211, 211, 211};
};

struct ImageDetection {
  Rect bbox;  // page coordinates
  double confidence = 0.0;
};

struct MaskEntry {
  std::size_t id = 0;
  Rect rect;  // table-local coordinates
  Rgb fill;

  friend bool operator==(const MaskEntry&, const MaskEntry&) = default;
};

struct MaskPlan {
  Rect table_bbox;
  std::vector<MaskEntry> masks;
};

struct PlaceholderEntry {
  std::size_t id = 0;
  Rect bbox;  // page coordinates, clamped to the table
  std::string image_ref;

  friend bool operator==(const PlaceholderEntry&, const PlaceholderEntry&) = default;
};

struct PlaceholderMap {
  Rect table_bbox;
  std::vector<PlaceholderEntry> entries;

  friend bool operator==(const PlaceholderMap&, const PlaceholderMap&) = default;
};

struct PlannedMasks {
  MaskPlan plan;
  PlaceholderMap map;  // image_ref left empty for the cropper to fill
};

constexpr std::string_view kPlaceholderScheme = "placeholder://";

inline std::string placeholder_src(std::size_t id) {
  return std::string(kPlaceholderScheme) + std::to_string(id);
}

inline bool is_placeholder_src(std::string_view src) {
  return src.empty() || src.substr(0, kPlaceholderScheme.size()) == kPlaceholderScheme;
}

namespace detail {

inline double overlap_fraction(const Rect& a, const Rect& b) {
  const long long inter = a.intersect(b).area();
  const long long smaller = std::min(a.area(), b.area());
  return smaller > 0 ? static_cast<double>(inter) / static_cast<double>(smaller) : 0.0;
}

inline bool canonical_less(const Rect& a, const Rect& b) {
  if (a.y1 != b.y1) return a.y1 < b.y1;
  if (a.x1 != b.x1) return a.x1 < b.x1;
  if (a.y2 != b.y2) return a.y2 < b.y2;
  return a.x2 < b.x2;
}

}  // namespace detail

/// Selects the detections that belong to the table, clamps them to it and
/// numbers them in (y1, x1) order. Lower-confidence boxes overlapping a kept
/// one by more than the tolerance are suppressed.
inline PlannedMasks plan_masks(const Rect& table_bbox, const std::vector<ImageDetection>& detections,
                               const IdtpConfig& cfg) {
  if (!table_bbox.valid()) throw Error(ErrorCode::GeometryError, "degenerate table bbox");
  struct Candidate {
    Rect rect;
    double confidence;
  };
  std::vector<Candidate> candidates;
  for (const ImageDetection& d : detections) {
    if (!d.bbox.valid() || d.confidence < cfg.min_confidence) continue;
    const double cx = (d.bbox.x1 + d.bbox.x2) / 2.0;
    const double cy = (d.bbox.y1 + d.bbox.y2) / 2.0;
    if (cx < table_bbox.x1 || cx >= table_bbox.x2 || cy < table_bbox.y1 || cy >= table_bbox.y2) continue;
    const Rect clamped = d.bbox.clamped_to(table_bbox);
    if (clamped.valid()) candidates.push_back({clamped, d.confidence});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return detail::canonical_less(a.rect, b.rect);
  });
  std::vector<Rect> kept;
  for (const Candidate& c : candidates) {
    const bool clashes = std::any_of(kept.begin(), kept.end(), [&](const Rect& k) {
      return detail::overlap_fraction(k, c.rect) > cfg.overlap_tolerance;
    });
    if (!clashes) kept.push_back(c.rect);
  }
  std::sort(kept.begin(), kept.end(), detail::canonical_less);

  PlannedMasks out;
  out.plan.table_bbox = table_bbox;
  out.map.table_bbox = table_bbox;
  for (std::size_t id = 0; id < kept.size(); ++id) {
    out.plan.masks.push_back(MaskEntry{id, kept[id].translated(-table_bbox.x1, -table_bbox.y1), cfg.fill});
    out.map.entries.push_back(PlaceholderEntry{id, kept[id], {}});
  }
  return out;
}

/// Returns a copy of the table crop with every mask rectangle filled.
inline RgbImage apply_masks(const RgbImage& pixels, const MaskPlan& plan) {
  if (pixels.width != plan.table_bbox.width() || pixels.height != plan.table_bbox.height())
    throw Error(ErrorCode::DimensionMismatch,
                "buffer is " + std::to_string(pixels.width) + "x" + std::to_string(pixels.height) +
                    ", table is " + std::to_string(plan.table_bbox.width()) + "x" +
                    std::to_string(plan.table_bbox.height()));
  RgbImage out = pixels;
  const Rect bounds{0, 0, pixels.width, pixels.height};
  for (const MaskEntry& m : plan.masks) {
    const Rect r = m.rect.clamped_to(bounds);
    for (int y = r.y1; y < r.y2; ++y)
      for (int x = r.x1; x < r.x2; ++x) out.set(x, y, m.fill);
  }
  return out;
}

/// Crops each placeholder's region out of the table crop, in id order.
inline std::vector<RgbImage> crop_placeholders(const RgbImage& table_pixels, const PlannedMasks& planned) {
  std::vector<RgbImage> out;
  for (const MaskEntry& m : planned.plan.masks) out.push_back(crop(table_pixels, m.rect));
  return out;
}

// ---------------------------------------------------------------------------
// Restoration.

enum class RestoreMode {
  Positional,  // k-th placeholder tag in row-major order <-> id k
  Strict,      // tags must carry src="placeholder://<id>"
};

struct CountMismatch {
  std::size_t found = 0;
  std::size_t expected = 0;

  friend bool operator==(const CountMismatch&, const CountMismatch&) = default;
};

struct RestoreResult {
  std::string html;  // canonical serialization
  std::size_t rewrites = 0;
  std::optional<CountMismatch> count_mismatch;
  std::vector<std::size_t> unused_entries;
  std::vector<std::string> issues;  // strict-mode tags that matched no entry
};

/// Sets the src of every placeholder `<img>` tag (src missing, empty or in
/// the placeholder scheme) from the map. Tags that already point at a real
/// image are left alone, so re-running on restored output is a no-op.
inline RestoreResult restore_images(std::string_view html_text, const PlaceholderMap& map,
                                    RestoreMode mode = RestoreMode::Positional) {
  const TableGrid grid = parse_grid(html_text);
  RestoreResult result;
  std::vector<bool> used(map.entries.size(), false);
  std::map<std::size_t, std::size_t> by_id;
  for (std::size_t i = 0; i < map.entries.size(); ++i) by_id[map.entries[i].id] = i;

  std::size_t found = 0;
  std::vector<GridCell> cells = grid.cells();
  for (GridCell& cell : cells) {
    const std::vector<html::Tag> tags = html::find_img_tags(cell.content);
    if (tags.empty()) continue;
    std::string rebuilt;
    std::size_t cursor = 0;
    for (const html::Tag& tag : tags) {
      const html::Attribute* src = tag.find("src");
      const std::string value = src ? html::unescape_attribute(src->value) : std::string{};
      if (!is_placeholder_src(value)) continue;
      const std::size_t ordinal = found++;
      std::optional<std::size_t> entry;
      if (mode == RestoreMode::Positional) {
        if (ordinal < map.entries.size()) entry = ordinal;
      } else {
        const std::string_view digits = std::string_view(value).substr(
            std::min(value.size(), kPlaceholderScheme.size()));
        std::size_t id = 0;
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
        const auto it = by_id.find(id);
        if (value.empty() || ec != std::errc{} || ptr != digits.data() + digits.size() || it == by_id.end()) {
          result.issues.push_back("placeholder tag #" + std::to_string(ordinal) + " (src=\"" + value +
                                  "\") matches no map entry");
        } else {
          entry = it->second;
        }
      }
      if (!entry) continue;
      rebuilt.append(cell.content, cursor, tag.begin - cursor);
      rebuilt.append(html::with_src(cell.content, tag, map.entries[*entry].image_ref));
      cursor = tag.end;
      used[*entry] = true;
      ++result.rewrites;
    }
    rebuilt.append(cell.content, cursor, std::string::npos);
    cell.content = std::move(rebuilt);
  }
  if (found != map.entries.size()) result.count_mismatch = CountMismatch{found, map.entries.size()};
  for (std::size_t i = 0; i < used.size(); ++i)
    if (!used[i]) result.unused_entries.push_back(map.entries[i].id);
  result.html = serialize_grid(TableGrid::from_cells(grid.n_rows(), grid.n_cols(), std::move(cells), false));
  return result;
}

struct VerificationReport {
  std::vector<std::size_t> residual_placeholders;  // ordinals of img tags still unresolved
  std::vector<std::size_t> unused_entries;         // map ids whose image never appears
  std::vector<std::string> duplicate_srcs;         // srcs carried by more than one tag
  std::vector<std::string> foreign_srcs;           // srcs not present in the map

  bool empty() const {
    return residual_placeholders.empty() && unused_entries.empty() && duplicate_srcs.empty() &&
           foreign_srcs.empty();
  }
};

/// Checks that img tags and map entries are in one-to-one correspondence.
inline VerificationReport verify_restoration(std::string_view html_text, const PlaceholderMap& map) {
  VerificationReport report;
  std::map<std::string, std::size_t> seen;
  std::vector<std::string> order;
  const std::vector<html::Tag> tags = html::find_img_tags(html_text);
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const html::Attribute* src = tags[i].find("src");
    const std::string value = src ? html::unescape_attribute(src->value) : std::string{};
    if (is_placeholder_src(value)) {
      report.residual_placeholders.push_back(i);
      continue;
    }
    if (seen[value]++ == 0) order.push_back(value);
  }
  std::map<std::string, bool> known;
  for (const PlaceholderEntry& e : map.entries) {
    known[e.image_ref] = true;
    if (!seen.count(e.image_ref)) report.unused_entries.push_back(e.id);
  }
  for (const std::string& src : order) {
    if (seen[src] > 1) report.duplicate_srcs.push_back(src);
    if (!known.count(src)) report.foreign_srcs.push_back(src);
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON sidecars.

namespace detail {

inline Rect rect_from_json(const nlohmann::json& j, std::string_view what) {
  if (!j.is_array() || j.size() != 4)
    throw Error(ErrorCode::SchemaError, std::string(what) + " must be an array of four numbers");
  double v[4];
  for (std::size_t i = 0; i < 4; ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::SchemaError, std::string(what) + " must hold numbers");
    v[i] = j[i].get<double>();
  }
  return Rect{static_cast<int>(std::floor(v[0])), static_cast<int>(std::floor(v[1])),
              static_cast<int>(std::ceil(v[2])), static_cast<int>(std::ceil(v[3]))};
}

inline nlohmann::json rect_to_json(const Rect& r) { return nlohmann::json::array({r.x1, r.y1, r.x2, r.y2}); }

}  // namespace detail

/// `[{"bbox":[x1,y1,x2,y2],"confidence":f}, ...]`
inline std::vector<ImageDetection> detections_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorCode::SchemaError, "detections must be a JSON array");
  std::vector<ImageDetection> out;
  for (const auto& item : j) {
    if (!item.is_object() || !item.contains("bbox"))
      throw Error(ErrorCode::SchemaError, "detection needs a bbox");
    ImageDetection d;
    d.bbox = detail::rect_from_json(item["bbox"], "detection bbox");
    d.confidence = item.value("confidence", 1.0);
    if (!d.bbox.valid()) throw Error(ErrorCode::GeometryError, "degenerate detection bbox");
    if (d.confidence < 0.0 || d.confidence > 1.0)
      throw Error(ErrorCode::SchemaError, "detection confidence outside [0,1]");
    out.push_back(d);
  }
  return out;
}

inline nlohmann::json to_json(const PlaceholderMap& map) {
  nlohmann::json entries = nlohmann::json::array();
  for (const PlaceholderEntry& e : map.entries)
    entries.push_back({{"id", e.id}, {"bbox", detail::rect_to_json(e.bbox)}, {"image_ref", e.image_ref}});
  return {{"table_bbox", detail::rect_to_json(map.table_bbox)}, {"entries", entries}};
}

inline PlaceholderMap placeholder_map_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("entries"))
    throw Error(ErrorCode::SchemaError, "placeholder map needs an entries array");
  PlaceholderMap map;
  if (j.contains("table_bbox")) map.table_bbox = detail::rect_from_json(j["table_bbox"], "table_bbox");
  for (const auto& e : j["entries"]) {
    PlaceholderEntry entry;
    entry.id = e.at("id").get<std::size_t>();
    if (e.contains("bbox")) entry.bbox = detail::rect_from_json(e["bbox"], "entry bbox");
    entry.image_ref = e.value("image_ref", std::string{});
    map.entries.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < map.entries.size(); ++i)
    if (map.entries[i].id != i)
      throw Error(ErrorCode::SchemaError, "placeholder ids must run 0..n-1 in order");
  return map;
}

}  // namespace docparse
