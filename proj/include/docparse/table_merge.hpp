#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/error.hpp"
#include "docparse/table_grid.hpp"
#include "docparse/text.hpp"

// Type-guided merging of table fragments split across pages or columns.
//
// Three continuation patterns are recognized for a fragment `b` following a
// fragment `a` in reading order:
//   Pattern1  b repeats a's header rows; they are dropped and bodies stacked.
//   Pattern2  b continues a without a header; rows are stacked as-is.
//   Pattern3  b's first row finishes a's last row; the two boundary rows are
//             joined cell by cell before stacking.
// Pattern1 is a rule on header rows. Pattern2 vs Pattern3 is decided by a
// pluggable continuation scorer over the boundary rows.
namespace docparse {

struct MergeConfig {
  double near_threshold = 0.8;
  double continuation_threshold = 0.5;
};

enum class HeaderMatchKind { Exact, Near, None };

struct HeaderMatch {
  HeaderMatchKind kind = HeaderMatchKind::None;
  double similarity = 0.0;
  std::size_t header_rows = 0;         // rows of `a` that were compared
  bool column_count_mismatch = false;  // reported ColumnCountMismatch
};

enum class ScoreSource { Heuristic, ExternalScorer };

struct ContinuationDecision {
  bool is_row_split = false;
  double score = 0.0;
  ScoreSource source = ScoreSource::Heuristic;
  std::string fallback_reason;  // set when an external scorer failed
};

enum class MergePattern { Pattern1, Pattern2, Pattern3, NoMerge };

constexpr std::string_view to_string(MergePattern p) {
  switch (p) {
    case MergePattern::Pattern1: return "Pattern1";
    case MergePattern::Pattern2: return "Pattern2";
    case MergePattern::Pattern3: return "Pattern3";
    case MergePattern::NoMerge: return "NoMerge";
  }
  return "NoMerge";
}

constexpr std::string_view to_string(HeaderMatchKind k) {
  switch (k) {
    case HeaderMatchKind::Exact: return "Exact";
    case HeaderMatchKind::Near: return "Near";
    case HeaderMatchKind::None: return "None";
  }
  return "None";
}

constexpr std::string_view to_string(ScoreSource s) {
  return s == ScoreSource::Heuristic ? "Heuristic" : "ExternalScorer";
}

/// Joins the content of b's first-row cell anchored at `b_col` into the cell
/// of a's last row covering `a_col`.
struct BoundaryJoin {
  std::size_t b_col = 0;
  std::size_t a_col = 0;
  std::string separator;  // "" for a mid-word split, " " otherwise

  friend bool operator==(const BoundaryJoin&, const BoundaryJoin&) = default;
};

struct MergePlan {
  MergePattern pattern = MergePattern::NoMerge;
  std::size_t header_rows_to_drop = 0;
  std::vector<std::size_t> column_map;  // b column -> a column
  std::optional<std::vector<BoundaryJoin>> boundary_join;
  HeaderMatch header;
  std::optional<ContinuationDecision> continuation;
  std::string reason;  // why NoMerge, when it is
};

// ---------------------------------------------------------------------------
// Continuation scoring.

/// Scores whether the head row of the next fragment continues the tail row
/// of the previous one. Implementations return a value in [0, 1] and signal
/// unavailability by throwing Error(ScorerFailure).
class ContinuationScorer {
public:
  virtual ~ContinuationScorer() = default;
  virtual double score(const std::vector<std::string>& tail, const std::vector<std::string>& head,
                       const std::vector<std::size_t>& column_map) = 0;
};

namespace detail {

inline bool is_terminal_punct(char32_t cp) {
  switch (cp) {
    case U'.': case U'!': case U'?': case U';': case U':':
    case U'。': case U'！': case U'？': case U'；': case U'：':
      return true;
    default:
      return false;
  }
}

inline bool is_continuation_start(char32_t cp) {
  if (cp >= U'a' && cp <= U'z') return true;
  if ((cp >= 0x00DF && cp <= 0x00FF && cp != 0x00F7) || (cp >= 0x03B1 && cp <= 0x03C9) ||
      (cp >= 0x0430 && cp <= 0x045F))
    return true;
  switch (cp) {
    case U',': case U';': case U')': case U']': case U'}': case U'-': case U'%':
    case U'–': case U'…':
      return true;
    default:
      return false;
  }
}

inline char32_t last_visible(std::string_view s) {
  const std::u32string cps = text::decode_utf8(s);
  for (auto it = cps.rbegin(); it != cps.rend(); ++it)
    if (!text::is_space(*it)) return *it;
  return 0;
}

inline char32_t first_visible(std::string_view s) {
  for (char32_t cp : text::decode_utf8(s))
    if (!text::is_space(cp)) return cp;
  return 0;
}

}  // namespace detail

/// Baseline rule: 1.0 when some aligned boundary pair has a non-empty tail
/// cell without terminal punctuation and a head cell opening in lower case or
/// with a continuation character; otherwise 0.0.
inline double heuristic_continuation_score(const std::vector<std::string>& tail,
                                           const std::vector<std::string>& head,
                                           const std::vector<std::size_t>& column_map) {
  for (std::size_t j = 0; j < head.size() && j < column_map.size(); ++j) {
    const std::size_t i = column_map[j];
    if (i >= tail.size()) continue;
    const char32_t end = detail::last_visible(tail[i]);
    if (end == 0 || detail::is_terminal_punct(end)) continue;
    const char32_t start = detail::first_visible(head[j]);
    if (start != 0 && detail::is_continuation_start(start)) return 1.0;
  }
  return 0.0;
}

class HeuristicContinuationScorer : public ContinuationScorer {
public:
  double score(const std::vector<std::string>& tail, const std::vector<std::string>& head,
               const std::vector<std::size_t>& column_map) override {
    return heuristic_continuation_score(tail, head, column_map);
  }
};

// ---------------------------------------------------------------------------
// Header matching and schema alignment.

inline HeaderMatch match_headers(const TableGrid& a, const TableGrid& b, const MergeConfig& cfg) {
  HeaderMatch m;
  m.header_rows = detect_header_rows(a);
  if (a.n_cols() != b.n_cols()) {
    m.column_count_mismatch = true;
    return m;
  }
  const std::size_t k = m.header_rows;
  if (k == 0 || b.n_rows() < k || a.n_cols() == 0) return m;

  std::size_t matching = 0;
  bool same_layout = true;
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < a.n_cols(); ++c) {
      const GridCell& ca = a.cell_at(r, c);
      const GridCell& cb = b.cell_at(r, c);
      if (text::normalize_content(ca.content) == text::normalize_content(cb.content)) ++matching;
      if (ca.anchor_row != cb.anchor_row || ca.anchor_col != cb.anchor_col || ca.rowspan != cb.rowspan ||
          ca.colspan != cb.colspan)
        same_layout = false;
    }
  const std::size_t total = k * a.n_cols();
  m.similarity = static_cast<double>(matching) / static_cast<double>(total);
  if (matching == total && same_layout) m.kind = HeaderMatchKind::Exact;
  else if (m.similarity >= cfg.near_threshold) m.kind = HeaderMatchKind::Near;
  return m;
}

/// Maps every column of `b` onto a column of `a`. Equal widths map to the
/// identity; a narrower `b` embeds into a leading or trailing block of `a`
/// only when both carry header rows whose tokens agree on that block.
inline std::vector<std::size_t> align_schemas(const TableGrid& a, const TableGrid& b) {
  const std::size_t n = a.n_cols();
  const std::size_t m = b.n_cols();
  std::vector<std::size_t> map(m);
  if (n == m) {
    for (std::size_t j = 0; j < m; ++j) map[j] = j;
    return map;
  }
  if (m == 0 || m > n)
    throw Error(ErrorCode::Unalignable, std::to_string(m) + " columns cannot embed into " + std::to_string(n));
  if (detect_header_rows(a) == 0 || detect_header_rows(b) == 0)
    throw Error(ErrorCode::Unalignable, "column counts differ and no header tokens to align on");

  std::vector<std::string> ta = row_texts(a, 0);
  std::vector<std::string> tb = row_texts(b, 0);
  for (auto& t : ta) t = text::normalize_content(t);
  for (auto& t : tb) t = text::normalize_content(t);
  for (const std::size_t offset : {std::size_t{0}, n - m}) {
    bool ok = true;
    for (std::size_t j = 0; j < m && ok; ++j) ok = ta[offset + j] == tb[j];
    if (ok) {
      for (std::size_t j = 0; j < m; ++j) map[j] = offset + j;
      return map;
    }
  }
  throw Error(ErrorCode::Unalignable, "header tokens match neither a leading nor a trailing column block");
}

// ---------------------------------------------------------------------------
// Decisions.

inline ContinuationDecision classify_continuation(const TableGrid& a, const TableGrid& b,
                                                  const std::vector<std::size_t>& column_map,
                                                  ContinuationScorer* scorer, const MergeConfig& cfg) {
  ContinuationDecision d;
  if (a.n_rows() == 0 || b.n_rows() == 0) return d;
  const std::vector<std::string> tail = row_texts(a, a.n_rows() - 1);
  const std::vector<std::string> head = row_texts(b, 0);

  bool scored = false;
  if (scorer != nullptr) {
    try {
      const double s = scorer->score(tail, head, column_map);
      if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::ScorerFailure, "score out of [0,1]");
      d.score = s;
      d.source = ScoreSource::ExternalScorer;
      scored = true;
    } catch (const std::exception& e) {
      d.fallback_reason = e.what();
    }
  }
  if (!scored) {
    d.score = heuristic_continuation_score(tail, head, column_map);
    d.source = ScoreSource::Heuristic;
  }
  d.is_row_split = d.score >= cfg.continuation_threshold;
  return d;
}

/// Convenience overload that aligns the schemas itself; unalignable
/// fragments never continue each other.
inline ContinuationDecision classify_continuation(const TableGrid& a, const TableGrid& b,
                                                  ContinuationScorer* scorer, const MergeConfig& cfg) {
  try {
    return classify_continuation(a, b, align_schemas(a, b), scorer, cfg);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unalignable) throw;
    return ContinuationDecision{};
  }
}

namespace detail {

inline std::vector<BoundaryJoin> plan_boundary_join(const TableGrid& a, const TableGrid& b,
                                                    const std::vector<std::size_t>& column_map) {
  std::vector<BoundaryJoin> joins;
  const std::size_t last = a.n_rows() - 1;
  for (const GridCell* cell : b.row_cells(0)) {
    if (text::trim(cell->content).empty()) continue;
    const std::size_t a_col = column_map[cell->anchor_col];
    const std::string& left = a.cell_at(last, a_col).content;
    const bool spaced = !left.empty() && text::ends_with_space(left);
    joins.push_back(BoundaryJoin{cell->anchor_col, a_col, spaced ? " " : ""});
  }
  return joins;
}

inline std::string join_content(std::string_view left, std::string_view right, std::string_view sep) {
  if (text::trim(left).empty()) return std::string(right);
  if (text::trim(right).empty()) return std::string(left);
  if (sep.empty()) return std::string(left) + std::string(right);
  return std::string(text::rtrim(left)) + std::string(sep) + std::string(text::ltrim(right));
}

}  // namespace detail

inline MergePlan decide_merge(const TableGrid& a, const TableGrid& b, ContinuationScorer* scorer,
                              const MergeConfig& cfg) {
  MergePlan plan;
  plan.header = match_headers(a, b, cfg);
  if (a.n_rows() == 0 || b.n_rows() == 0 || a.n_cols() == 0 || b.n_cols() == 0) {
    plan.reason = "empty fragment";
    return plan;
  }

  std::optional<std::vector<std::size_t>> map;
  try {
    map = align_schemas(a, b);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Unalignable) throw;
    plan.reason = e.what();
  }

  if (plan.header.kind != HeaderMatchKind::None && map) {
    plan.pattern = MergePattern::Pattern1;
    plan.column_map = *map;
    const std::size_t kb = detect_header_rows(b);
    plan.header_rows_to_drop = kb > 0 ? std::min(kb, b.n_rows()) : plan.header.header_rows;
    return plan;
  }
  if (!map) return plan;

  plan.column_map = *map;
  plan.continuation = classify_continuation(a, b, *map, scorer, cfg);
  if (plan.continuation->is_row_split) {
    plan.pattern = MergePattern::Pattern3;
    plan.boundary_join = detail::plan_boundary_join(a, b, *map);
    return plan;
  }
  plan.pattern = MergePattern::Pattern2;
  return plan;
}

// ---------------------------------------------------------------------------
// Merging.

namespace detail {

inline TableGrid remap_columns(const TableGrid& b, const std::vector<std::size_t>& column_map,
                               std::size_t n_cols) {
  std::vector<GridCell> cells;
  for (GridCell c : b.cells()) {
    const std::size_t first = column_map[c.anchor_col];
    for (std::size_t k = 1; k < c.colspan; ++k)
      if (column_map[c.anchor_col + k] != first + k)
        throw Error(ErrorCode::PlanMismatch, "column map splits a spanning cell");
    c.anchor_col = first;
    cells.push_back(std::move(c));
  }
  return TableGrid::from_cells(b.n_rows(), n_cols, std::move(cells), true);
}

inline void check_plan(const TableGrid& a, const TableGrid& b, const MergePlan& plan) {
  const auto fail = [](const std::string& why) { throw Error(ErrorCode::PlanMismatch, why); };
  if (plan.pattern == MergePattern::NoMerge) fail("plan says NoMerge");
  if (plan.column_map.size() != b.n_cols()) fail("column map does not cover every column of b");
  std::vector<bool> used(a.n_cols(), false);
  for (std::size_t target : plan.column_map) {
    if (target >= a.n_cols()) fail("column map points past a's columns");
    if (used[target]) fail("column map is not injective");
    used[target] = true;
  }
  if (plan.pattern == MergePattern::Pattern1 && plan.header_rows_to_drop == 0)
    fail("Pattern1 must drop at least one header row");
  if (plan.pattern != MergePattern::Pattern1 && plan.header_rows_to_drop != 0)
    fail("only Pattern1 drops header rows");
  if (plan.header_rows_to_drop > b.n_rows()) fail("more header rows to drop than b has");
  if (plan.pattern == MergePattern::Pattern3) {
    if (!plan.boundary_join) fail("Pattern3 without boundary join instructions");
    if (a.n_rows() == 0 || b.n_rows() == 0) fail("Pattern3 needs a boundary row on both sides");
    for (const BoundaryJoin& j : *plan.boundary_join)
      if (j.b_col >= b.n_cols() || j.a_col >= a.n_cols()) fail("boundary join refers to a missing column");
  }
}

}  // namespace detail

inline TableGrid merge(const TableGrid& a, const TableGrid& b, const MergePlan& plan) {
  detail::check_plan(a, b, plan);
  switch (plan.pattern) {
    case MergePattern::Pattern1: {
      const TableGrid body = slice_rows(b, plan.header_rows_to_drop, b.n_rows());
      return stack_rows(a, detail::remap_columns(body, plan.column_map, a.n_cols()));
    }
    case MergePattern::Pattern2:
      return stack_rows(a, detail::remap_columns(b, plan.column_map, a.n_cols()));
    case MergePattern::Pattern3: {
      std::vector<GridCell> cells = a.cells();
      const std::size_t last = a.n_rows() - 1;
      for (const BoundaryJoin& j : *plan.boundary_join) {
        const GridCell& from = b.cell_at(0, j.b_col);
        GridCell& into = cells[a.owner(last, j.a_col)];
        into.content = detail::join_content(into.content, from.content, j.separator);
      }
      const TableGrid joined = TableGrid::from_cells(a.n_rows(), a.n_cols(), std::move(cells), false);
      const TableGrid rest = slice_rows(b, 1, b.n_rows());
      return stack_rows(joined, detail::remap_columns(rest, plan.column_map, a.n_cols()));
    }
    case MergePattern::NoMerge:
      break;
  }
  throw Error(ErrorCode::PlanMismatch, "plan says NoMerge");
}

struct MergeSequenceResult {
  std::vector<TableGrid> tables;
  std::vector<std::vector<std::size_t>> groups;  // input indices folded into each output table
  std::vector<MergePlan> plans;                  // one per adjacent pair attempted
};

/// Greedy left-to-right folding of fragments given in reading order.
/// Scorer calls are issued sequentially from the calling thread.
inline MergeSequenceResult merge_fragment_sequence_report(const std::vector<TableGrid>& fragments,
                                                          ContinuationScorer* scorer,
                                                          const MergeConfig& cfg) {
  MergeSequenceResult out;
  if (fragments.empty()) return out;
  TableGrid acc = fragments.front();
  std::vector<std::size_t> group{0};
  for (std::size_t i = 1; i < fragments.size(); ++i) {
    MergePlan plan = decide_merge(acc, fragments[i], scorer, cfg);
    if (plan.pattern != MergePattern::NoMerge) {
      acc = merge(acc, fragments[i], plan);
      group.push_back(i);
    } else {
      out.tables.push_back(std::move(acc));
      out.groups.push_back(std::move(group));
      acc = fragments[i];
      group = {i};
    }
    out.plans.push_back(std::move(plan));
  }
  out.tables.push_back(std::move(acc));
  out.groups.push_back(std::move(group));
  return out;
}

inline std::vector<TableGrid> merge_fragment_sequence(const std::vector<TableGrid>& fragments,
                                                      ContinuationScorer* scorer, const MergeConfig& cfg) {
  return merge_fragment_sequence_report(fragments, scorer, cfg).tables;
}

}  // namespace docparse
