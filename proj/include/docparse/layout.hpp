#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "docparse/error.hpp"
#include "docparse/html.hpp"
#include "docparse/image.hpp"
#include "docparse/text.hpp"

namespace docparse {

enum class Label {
  Text,
  Title,
  Formula,
  Table,
  TableBody,
  TableCaption,
  Image,
  ImageCaption,
  Header,
  Footer,
  Other,
};

constexpr std::string_view to_string(Label l) {
  switch (l) {
    case Label::Text: return "text";
    case Label::Title: return "title";
    case Label::Formula: return "formula";
    case Label::Table: return "table";
    case Label::TableBody: return "tablebody";
    case Label::TableCaption: return "table_caption";
    case Label::Image: return "image";
    case Label::ImageCaption: return "image_caption";
    case Label::Header: return "header";
    case Label::Footer: return "footer";
    case Label::Other: return "other";
  }
  return "other";
}

inline std::optional<Label> label_from_string(std::string_view s) {
  static const std::map<std::string, Label, std::less<>> labels = {
      {"text", Label::Text},           {"title", Label::Title},
      {"formula", Label::Formula},     {"table", Label::Table},
      {"tablebody", Label::TableBody}, {"table_caption", Label::TableCaption},
      {"image", Label::Image},         {"image_caption", Label::ImageCaption},
      {"header", Label::Header},       {"footer", Label::Footer},
      {"other", Label::Other},
  };
  const auto it = labels.find(text::to_lower_ascii(s));
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

inline bool is_table_label(Label l) { return l == Label::Table || l == Label::TableBody; }
inline bool is_caption_label(Label l) { return l == Label::TableCaption || l == Label::ImageCaption; }

struct LayoutElement {
  Rect bbox;
  std::size_t index = 0;
  Label label = Label::Other;
  int rotation = 0;  // 0, 90, 180 or 270

  friend bool operator==(const LayoutElement&, const LayoutElement&) = default;
};

struct LayoutPage {
  int page_width = 0;
  int page_height = 0;
  std::vector<LayoutElement> elements;  // input order
  std::size_t index_base = 0;           // 1 when the input numbered elements from 1
  std::vector<std::string> warnings;

  const LayoutElement* find(std::size_t index) const {
    for (const auto& e : elements)
      if (e.index == index) return &e;
    return nullptr;
  }
};

struct LayoutViolation {
  ErrorCode code;
  std::optional<std::size_t> element;  // position in the input array
  std::string message;
};

/// Thrown by parse_layout; code() is the kind of the first violation.
class LayoutError : public Error {
public:
  explicit LayoutError(std::vector<LayoutViolation> violations)
      : Error(violations.front().code, summarize(violations)), violations_(std::move(violations)) {}

  const std::vector<LayoutViolation>& violations() const { return violations_; }

  bool has(ErrorCode code) const {
    return std::any_of(violations_.begin(), violations_.end(),
                       [code](const LayoutViolation& v) { return v.code == code; });
  }

private:
  static std::string summarize(const std::vector<LayoutViolation>& vs) {
    std::string out = vs.front().message;
    if (vs.size() > 1) out += " (+" + std::to_string(vs.size() - 1) + " more)";
    return out;
  }

  std::vector<LayoutViolation> violations_;
};

namespace detail {

inline std::optional<long long> as_integer(const nlohmann::json& v) {
  if (v.is_number_integer()) return v.get<long long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (std::isfinite(d) && d == std::floor(d)) return static_cast<long long>(d);
  }
  return std::nullopt;
}

}  // namespace detail

/// Parses and validates one page of layout output:
/// `[{"bbox":[x1,y1,x2,y2],"index":i,"label":"...","rotation":r}, ...]`.
/// All violations are collected before throwing LayoutError.
inline LayoutPage parse_layout(std::string_view json_text, int page_width, int page_height) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LayoutError({{ErrorCode::SyntaxError, std::nullopt, std::string("not JSON: ") + e.what()}});
  }
  if (!doc.is_array())
    throw LayoutError({{ErrorCode::SyntaxError, std::nullopt, "layout must be a JSON array"}});
  if (page_width <= 0 || page_height <= 0)
    throw LayoutError({{ErrorCode::GeometryError, std::nullopt, "page size must be positive"}});

  LayoutPage page;
  page.page_width = page_width;
  page.page_height = page_height;
  std::vector<LayoutViolation> violations;
  const auto violate = [&](ErrorCode code, std::size_t pos, const std::string& msg) {
    violations.push_back({code, pos, "element " + std::to_string(pos) + ": " + msg});
  };
  const Rect bounds{0, 0, page_width, page_height};
  std::vector<long long> indices;

  for (std::size_t pos = 0; pos < doc.size(); ++pos) {
    const nlohmann::json& item = doc[pos];
    if (!item.is_object()) {
      violate(ErrorCode::SchemaError, pos, "not an object");
      continue;
    }
    bool ok = true;
    for (const char* field : {"bbox", "index", "label"})
      if (!item.contains(field)) {
        violate(ErrorCode::SchemaError, pos, std::string("missing ") + field);
        ok = false;
      }
    if (!ok) continue;

    LayoutElement el;
    const nlohmann::json& bbox = item["bbox"];
    if (!bbox.is_array() || bbox.size() != 4 ||
        !std::all_of(bbox.begin(), bbox.end(), [](const auto& v) { return v.is_number(); })) {
      violate(ErrorCode::SchemaError, pos, "bbox must be four numbers");
      ok = false;
    } else {
      const auto r = [&](std::size_t i) { return static_cast<int>(std::lround(bbox[i].get<double>())); };
      el.bbox = Rect{r(0), r(1), r(2), r(3)};
      if (!el.bbox.valid()) {
        violate(ErrorCode::GeometryError, pos, "degenerate bbox (need x1 < x2 and y1 < y2)");
        ok = false;
      } else {
        const Rect clamped = el.bbox.clamped_to(bounds);
        if (!clamped.valid()) {
          violate(ErrorCode::GeometryError, pos, "bbox lies outside the page");
          ok = false;
        } else {
          if (!(clamped == el.bbox)) page.warnings.push_back("element " + std::to_string(pos) + ": bbox clamped to page");
          el.bbox = clamped;
        }
      }
    }

    const auto index = detail::as_integer(item["index"]);
    if (!index || *index < 0) {
      violate(ErrorCode::SchemaError, pos, "index must be a non-negative integer");
      ok = false;
    } else {
      indices.push_back(*index);
      el.index = static_cast<std::size_t>(*index);
    }

    if (!item["label"].is_string()) {
      violate(ErrorCode::SchemaError, pos, "label must be a string");
      ok = false;
    } else if (const auto label = label_from_string(item["label"].get<std::string>())) {
      el.label = *label;
    } else {
      el.label = Label::Other;
      page.warnings.push_back("element " + std::to_string(pos) + ": unknown label \"" +
                              item["label"].get<std::string>() + "\" mapped to other");
    }

    if (item.contains("rotation") && !item["rotation"].is_null()) {
      const auto rot = detail::as_integer(item["rotation"]);
      if (!rot || *rot % 90 != 0) {
        violate(ErrorCode::GeometryError, pos, "rotation must be a multiple of 90 degrees");
        ok = false;
      } else {
        el.rotation = static_cast<int>(((*rot % 360) + 360) % 360);
      }
    }
    if (ok) page.elements.push_back(el);
  }

  // indices: a 0-based permutation; a 1-based one is shifted down with a warning
  if (indices.size() == doc.size() && !indices.empty()) {
    std::vector<long long> sorted = indices;
    std::sort(sorted.begin(), sorted.end());
    const auto dup = std::adjacent_find(sorted.begin(), sorted.end());
    const long long n = static_cast<long long>(sorted.size());
    if (dup != sorted.end()) {
      violations.push_back({ErrorCode::IndexError, std::nullopt, "duplicate index " + std::to_string(*dup)});
    } else if (sorted.front() == 0 && sorted.back() == n - 1) {
      // already a 0-based permutation
    } else if (sorted.front() == 1 && sorted.back() == n) {
      page.warnings.push_back("1-based indices normalized to 0-based");
      page.index_base = 1;
      for (auto& e : page.elements) --e.index;
    } else {
      violations.push_back({ErrorCode::IndexError, std::nullopt, "indices are not a permutation of 0..N-1"});
    }
  }

  if (!violations.empty()) {
    std::stable_sort(violations.begin(), violations.end(), [](const LayoutViolation& a, const LayoutViolation& b) {
      return static_cast<int>(a.code) < static_cast<int>(b.code);
    });
    throw LayoutError(std::move(violations));
  }
  return page;
}

inline std::string serialize_layout(const LayoutPage& page) {
  nlohmann::json out = nlohmann::json::array();
  for (const LayoutElement& e : page.elements)
    out.push_back({{"bbox", {e.bbox.x1, e.bbox.y1, e.bbox.x2, e.bbox.y2}},
                   {"index", e.index},
                   {"label", std::string(to_string(e.label))},
                   {"rotation", e.rotation}});
  return out.dump();
}

// ---------------------------------------------------------------------------
// Crop planning and routing.

struct CropSpec {
  Rect clamped_bbox;
  int rotation_to_apply = 0;  // clockwise degrees that restore upright orientation

  friend bool operator==(const CropSpec&, const CropSpec&) = default;
};

inline CropSpec crop_plan(const LayoutPage& page, std::size_t element_index) {
  const LayoutElement* el = page.find(element_index);
  if (!el) throw Error(ErrorCode::UnknownElement, "no element with index " + std::to_string(element_index));
  return CropSpec{el->bbox.clamped_to(Rect{0, 0, page.page_width, page.page_height}),
                  (360 - el->rotation) % 360};
}

/// Crops the region out of the page image and turns it upright.
inline RgbImage extract_region(const RgbImage& page_image, const CropSpec& spec) {
  return rotate_clockwise(crop(page_image, spec.clamped_bbox), spec.rotation_to_apply);
}

enum class RecognizerKind { TextRec, FormulaRec, TableRec, PassThrough };

constexpr std::string_view to_string(RecognizerKind k) {
  switch (k) {
    case RecognizerKind::TextRec: return "text";
    case RecognizerKind::FormulaRec: return "formula";
    case RecognizerKind::TableRec: return "table";
    case RecognizerKind::PassThrough: return "image";
  }
  return "text";
}

constexpr RecognizerKind route_region(Label label) {
  switch (label) {
    case Label::Formula: return RecognizerKind::FormulaRec;
    case Label::Table:
    case Label::TableBody: return RecognizerKind::TableRec;
    case Label::Image: return RecognizerKind::PassThrough;
    default: return RecognizerKind::TextRec;
  }
}

// ---------------------------------------------------------------------------
// Assembly.

struct RecognizedElement {
  LayoutElement element;
  std::string content;
};

enum class OutputFormat { Markdown, Html };

struct AssembleOptions {
  bool include_headers_footers = false;
};

namespace detail {

inline std::string render_markdown(const RecognizedElement& r) {
  const std::string body(text::trim(r.content));
  switch (r.element.label) {
    case Label::Title: return "# " + body;
    case Label::Formula: return "$$\n" + body + "\n$$";
    case Label::Table:
    case Label::TableBody: return body;
    case Label::Image: return "![](" + body + ")";
    case Label::TableCaption:
    case Label::ImageCaption: return "*" + body + "*";
    default: return body;
  }
}

inline std::string render_html(const RecognizedElement& r) {
  const std::string body(text::trim(r.content));
  switch (r.element.label) {
    case Label::Title: return "<h1>" + html::escape_text(body) + "</h1>";
    case Label::Formula: return "<div class=\"formula\">\\[" + html::escape_text(body) + "\\]</div>";
    case Label::Table:
    case Label::TableBody: return body;
    case Label::Image: return "<img src=\"" + html::escape_attribute(body) + "\"/>";
    case Label::TableCaption:
    case Label::ImageCaption: return "<p><em>" + html::escape_text(body) + "</em></p>";
    default: return "<p>" + html::escape_text(body) + "</p>";
  }
}

}  // namespace detail

/// Renders recognized regions in ascending reading-order index. Markdown
/// blocks are separated by one blank line; page headers and footers are
/// dropped unless requested.
inline std::string assemble(const std::vector<RecognizedElement>& recognized, const LayoutPage& page,
                            OutputFormat format, const AssembleOptions& options = {}) {
  std::vector<const RecognizedElement*> ordered;
  std::set<std::size_t> seen;
  for (const RecognizedElement& r : recognized) {
    const LayoutElement* el = page.find(r.element.index);
    if (!el || !(*el == r.element))
      throw Error(ErrorCode::UnknownElement, "element " + std::to_string(r.element.index) + " is not on the page");
    if (!seen.insert(r.element.index).second)
      throw Error(ErrorCode::DuplicateElement, "element " + std::to_string(r.element.index) + " recognized twice");
    ordered.push_back(&r);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->element.index < b->element.index; });

  std::vector<std::string> blocks;
  for (const RecognizedElement* r : ordered) {
    const Label l = r->element.label;
    if ((l == Label::Header || l == Label::Footer) && !options.include_headers_footers) continue;
    std::string block = format == OutputFormat::Markdown ? detail::render_markdown(*r) : detail::render_html(*r);
    if (text::trim(block).empty()) continue;
    blocks.push_back(std::move(block));
  }
  std::string out;
  const std::string_view sep = format == OutputFormat::Markdown ? "\n\n" : "\n";
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (i > 0) out += sep;
    out += blocks[i];
  }
  return out;
}

}  // namespace docparse
