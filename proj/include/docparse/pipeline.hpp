#pragma once

#include <algorithm>
#include <cstddef>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "docparse/config.hpp"
#include "docparse/error.hpp"
#include "docparse/idtp.hpp"
#include "docparse/layout.hpp"
#include "docparse/report.hpp"
#include "docparse/table_grid.hpp"
#include "docparse/table_merge.hpp"

// End-to-end post-processing of a multi-page document: layout validation,
// crop planning, routing, image restoration inside tables, cross-column and
// cross-page table merging, then ordered assembly.
namespace docparse {

struct PageInput {
  std::string layout_json;
  int width = 0;
  int height = 0;
  std::string fixture_json;  // {"<index>": {"content": "...", "kind": "text|formula|table|image"}}
  std::map<std::size_t, std::vector<ImageDetection>> detections;  // keyed by index as written in the layout
};

struct PlacedMap {
  std::size_t page = 0;   // 1-based
  std::size_t index = 0;  // element index (0-based, normalized)
  PlaceholderMap map;
};

struct PipelineResult {
  std::string document;
  std::vector<PlacedMap> placeholder_maps;
  nlohmann::json merge_report = nlohmann::json::array();
  nlohmann::json restore_report = nlohmann::json::array();
  nlohmann::json crops = nlohmann::json::array();
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string expand_image_ref(std::string pattern, std::size_t page, std::size_t index, std::size_t id) {
  const auto replace = [&pattern](const std::string& key, const std::string& value) {
    for (std::size_t pos = 0; (pos = pattern.find(key, pos)) != std::string::npos; pos += value.size())
      pattern.replace(pos, key.size(), value);
  };
  replace("{page}", std::to_string(page));
  replace("{index}", std::to_string(index));
  replace("{id}", std::to_string(id));
  return pattern;
}

inline std::string at_element(std::size_t page, std::optional<std::size_t> index, const std::string& what) {
  std::string out = "page " + std::to_string(page);
  if (index) out += " element " + std::to_string(*index);
  return out + ": " + what;
}

struct TableSlot {
  std::size_t page = 0;  // 0-based position in the page list
  std::size_t index = 0;
  std::optional<TableGrid> grid;  // empty when the content did not parse
};

struct PageState {
  LayoutPage layout;
  std::vector<RecognizedElement> recognized;
  std::vector<std::size_t> order;  // element indices in reading order
  std::vector<PlacedMap> maps;
  nlohmann::json restore_report = nlohmann::json::array();
  nlohmann::json crops = nlohmann::json::array();
  std::vector<std::string> warnings;
};

/// Validation, routing, fixture lookup and image restoration for one page.
inline PageState prepare_page(const PageInput& input, std::size_t page_no, const Config& cfg) {
  PageState st;
  const std::size_t human_page = page_no + 1;
  try {
    st.layout = parse_layout(input.layout_json, input.width, input.height);
  } catch (const LayoutError& e) {
    std::vector<LayoutViolation> vs = e.violations();
    for (auto& v : vs) v.message = at_element(human_page, std::nullopt, v.message);
    throw LayoutError(std::move(vs));
  }
  for (const auto& w : st.layout.warnings) st.warnings.push_back(at_element(human_page, std::nullopt, w));
  const std::size_t base = st.layout.index_base;

  nlohmann::json fixture = nlohmann::json::object();
  if (!input.fixture_json.empty()) {
    try {
      fixture = nlohmann::json::parse(input.fixture_json);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::SyntaxError, at_element(human_page, std::nullopt, std::string("fixture: ") + e.what()));
    }
    if (!fixture.is_object())
      throw Error(ErrorCode::SchemaError, at_element(human_page, std::nullopt, "fixture must be a JSON object"));
  }
  std::map<std::size_t, const nlohmann::json*> by_index;
  for (const auto& [key, value] : fixture.items()) {
    std::size_t raw = 0;
    try {
      std::size_t used = 0;
      raw = std::stoul(key, &used);
      if (used != key.size()) throw std::invalid_argument(key);
    } catch (const std::exception&) {
      throw Error(ErrorCode::SchemaError, at_element(human_page, std::nullopt, "fixture key \"" + key + "\" is not an index"));
    }
    if (raw < base || !st.layout.find(raw - base))
      throw Error(ErrorCode::UnknownElement, at_element(human_page, raw, "fixture entry has no layout element"));
    by_index[raw - base] = &value;
  }

  std::vector<LayoutElement> elements = st.layout.elements;
  std::sort(elements.begin(), elements.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  for (const LayoutElement& el : elements) {
    st.order.push_back(el.index);
    const CropSpec crop = crop_plan(st.layout, el.index);
    st.crops.push_back({{"page", human_page},
                        {"index", el.index},
                        {"bbox", {crop.clamped_bbox.x1, crop.clamped_bbox.y1, crop.clamped_bbox.x2, crop.clamped_bbox.y2}},
                        {"rotation_to_apply", crop.rotation_to_apply},
                        {"recognizer", to_string(route_region(el.label))}});

    const auto found = by_index.find(el.index);
    if (found == by_index.end()) {
      if (el.label != Label::Header && el.label != Label::Footer)
        st.warnings.push_back(at_element(human_page, el.index, "no recognized content"));
      continue;
    }
    const nlohmann::json& entry = *found->second;
    std::string content;
    if (entry.is_string()) {
      content = entry.get<std::string>();
    } else if (entry.is_object() && entry.contains("content") && entry["content"].is_string()) {
      content = entry["content"].get<std::string>();
      if (entry.contains("kind")) {
        const std::string kind = entry["kind"].is_string() ? entry["kind"].get<std::string>() : "";
        if (kind != to_string(route_region(el.label)))
          throw Error(ErrorCode::KindMismatch,
                      at_element(human_page, el.index,
                                 "fixture kind \"" + kind + "\" but label " + std::string(to_string(el.label)) +
                                     " routes to " + std::string(to_string(route_region(el.label)))));
      }
    } else {
      throw Error(ErrorCode::SchemaError, at_element(human_page, el.index, "fixture entry needs a content string"));
    }

    if (route_region(el.label) == RecognizerKind::TableRec) {
      const auto dets = input.detections.find(el.index + base);
      if (dets != input.detections.end()) {
        PlannedMasks planned = plan_masks(el.bbox, dets->second, cfg.idtp());
        for (PlaceholderEntry& e : planned.map.entries)
          e.image_ref = expand_image_ref(cfg.image_ref_template, human_page, el.index, e.id);
        try {
          RestoreResult restored = restore_images(content, planned.map, cfg.restore_mode());
          const VerificationReport check = verify_restoration(restored.html, planned.map);
          nlohmann::json rep = to_json(restored);
          rep["page"] = human_page;
          rep["index"] = el.index;
          rep["verification"] = to_json(check);
          st.restore_report.push_back(std::move(rep));
          if (restored.count_mismatch)
            st.warnings.push_back(at_element(human_page, el.index,
                                             "CountMismatch(" + std::to_string(restored.count_mismatch->found) + ", " +
                                                 std::to_string(restored.count_mismatch->expected) + ")"));
          content = std::move(restored.html);
        } catch (const Error& e) {
          st.warnings.push_back(at_element(human_page, el.index, std::string("image restore skipped: ") + e.what()));
        }
        st.maps.push_back(PlacedMap{human_page, el.index, std::move(planned.map)});
      }
    }
    st.recognized.push_back(RecognizedElement{el, std::move(content)});
  }
  return st;
}

inline bool skippable_between_tables(Label l) {
  return is_caption_label(l) || l == Label::Header || l == Label::Footer;
}

}  // namespace detail

/// Runs the whole post-processing chain. Pages are prepared concurrently;
/// merging and assembly run in order on the calling thread.
inline PipelineResult pipeline_run(const std::vector<PageInput>& pages, const Config& cfg,
                                   ContinuationScorer* scorer = nullptr,
                                   OutputFormat format = OutputFormat::Markdown) {
  cfg.validate();
  PipelineResult result;

  std::vector<std::future<detail::PageState>> futures;
  for (std::size_t p = 0; p < pages.size(); ++p)
    futures.push_back(std::async(std::launch::async, detail::prepare_page, std::cref(pages[p]), p, std::cref(cfg)));
  std::vector<detail::PageState> states;
  std::exception_ptr first_error;
  for (auto& f : futures) {
    try {
      states.push_back(f.get());
    } catch (...) {
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  for (auto& st : states) {
    for (auto& w : st.warnings) result.warnings.push_back(std::move(w));
    for (auto& m : st.maps) result.placeholder_maps.push_back(std::move(m));
    for (auto& r : st.restore_report) result.restore_report.push_back(std::move(r));
    for (auto& c : st.crops) result.crops.push_back(std::move(c));
  }

  // collect table slots in document order
  std::vector<detail::TableSlot> slots;
  std::vector<std::map<std::size_t, std::size_t>> content_pos(states.size());  // index -> recognized position
  for (std::size_t p = 0; p < states.size(); ++p) {
    for (std::size_t i = 0; i < states[p].recognized.size(); ++i)
      content_pos[p][states[p].recognized[i].element.index] = i;
    for (const RecognizedElement& r : states[p].recognized) {
      if (!is_table_label(r.element.label)) continue;
      detail::TableSlot slot{p, r.element.index, std::nullopt};
      try {
        slot.grid = parse_grid(r.content);
      } catch (const Error& e) {
        result.warnings.push_back(detail::at_element(p + 1, r.element.index, std::string("table not merged: ") + e.what()));
      }
      slots.push_back(std::move(slot));
    }
  }

  // adjacency: nothing but captions/headers/footers between two table slots
  const auto label_of = [&](std::size_t p, std::size_t index) { return states[p].layout.find(index)->label; };
  const auto only_skippable = [&](std::size_t p, std::size_t from, std::size_t to) {
    // positions in reading order strictly between `from` and `to` (to may be order.size())
    const auto& order = states[p].order;
    for (std::size_t k = from; k < to; ++k)
      if (!detail::skippable_between_tables(label_of(p, order[k]))) return false;
    return true;
  };
  const auto order_pos = [&](std::size_t p, std::size_t index) {
    const auto& order = states[p].order;
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), index) - order.begin());
  };
  const auto adjacent = [&](const detail::TableSlot& a, const detail::TableSlot& b) {
    if (!a.grid || !b.grid) return false;
    const std::size_t pa = order_pos(a.page, a.index);
    const std::size_t pb = order_pos(b.page, b.index);
    if (a.page == b.page) return only_skippable(a.page, pa + 1, pb);
    if (b.page != a.page + 1) return false;
    return only_skippable(a.page, pa + 1, states[a.page].order.size()) && only_skippable(b.page, 0, pb);
  };

  std::map<std::pair<std::size_t, std::size_t>, std::string> replaced;  // (page, index) -> table html
  std::set<std::pair<std::size_t, std::size_t>> suppressed;
  const MergeConfig merge_cfg = cfg.merge();
  std::size_t s = 0;
  while (s < slots.size()) {
    std::size_t e = s + 1;
    while (e < slots.size() && adjacent(slots[e - 1], slots[e])) ++e;
    if (!slots[s].grid) {
      s = e;
      continue;
    }
    std::vector<TableGrid> fragments;
    for (std::size_t k = s; k < e; ++k) fragments.push_back(*slots[k].grid);
    const MergeSequenceResult merged = merge_fragment_sequence_report(fragments, scorer, merge_cfg);
    for (std::size_t g = 0; g < merged.groups.size(); ++g) {
      const auto& group = merged.groups[g];
      const detail::TableSlot& head = slots[s + group.front()];
      replaced[{head.page, head.index}] = serialize_grid(merged.tables[g]);
      for (std::size_t k = 1; k < group.size(); ++k) {
        const detail::TableSlot& tail = slots[s + group[k]];
        suppressed.insert({tail.page, tail.index});
      }
    }
    if (e - s > 1) {
      nlohmann::json members = nlohmann::json::array();
      for (std::size_t k = s; k < e; ++k) members.push_back({{"page", slots[k].page + 1}, {"index", slots[k].index}});
      nlohmann::json plans = nlohmann::json::array();
      for (const MergePlan& plan : merged.plans) plans.push_back(to_json(plan));
      result.merge_report.push_back({{"candidates", members}, {"plans", plans}, {"groups", merged.groups}});
    }
    s = e;
  }

  AssembleOptions options;
  options.include_headers_footers = cfg.include_headers_footers;
  std::vector<std::string> page_docs;
  for (std::size_t p = 0; p < states.size(); ++p) {
    std::vector<RecognizedElement> kept;
    for (RecognizedElement r : states[p].recognized) {
      const std::pair<std::size_t, std::size_t> key{p, r.element.index};
      if (suppressed.count(key)) continue;
      if (const auto it = replaced.find(key); it != replaced.end()) r.content = it->second;
      kept.push_back(std::move(r));
    }
    std::string doc = assemble(kept, states[p].layout, format, options);
    if (!doc.empty()) page_docs.push_back(std::move(doc));
  }
  const std::string sep = format == OutputFormat::Markdown ? "\n\n" : "\n";
  for (std::size_t i = 0; i < page_docs.size(); ++i) {
    if (i > 0) result.document += sep;
    result.document += page_docs[i];
  }
  return result;
}

}  // namespace docparse
