#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/error.hpp"
#include "docparse/html.hpp"
#include "docparse/metrics.hpp"
#include "docparse/table_grid.hpp"
#include "docparse/text.hpp"

namespace docparse {

// ---------------------------------------------------------------------------
// Rule-based checks.

struct RuleWeights {
  double well_formed = 0.25;
  double rectangular = 0.25;
  double placeholder = 0.25;
  double non_empty = 0.25;

  double sum() const { return well_formed + rectangular + placeholder + non_empty; }
};

struct RuleReport {
  bool well_formed = false;
  bool rectangular = false;
  bool placeholder_ok = false;
  bool non_empty = false;
  double score = 0.0;
};

inline std::size_t count_img_tags(const TableGrid& grid) {
  std::size_t n = 0;
  for (const GridCell& c : grid.cells()) n += html::find_img_tags(c.content).size();
  return n;
}

/// Structural sanity of a candidate table. Failures lower the score; nothing
/// here throws except for invalid weights.
inline RuleReport rule_checks(std::string_view candidate_html, std::size_t expected_placeholders,
                              const RuleWeights& weights = {}) {
  if (std::abs(weights.sum() - 1.0) > 1e-9)
    throw Error(ErrorCode::ConfigError, "rule weights must sum to 1");
  RuleReport rep;
  TableFragment frag;
  try {
    frag = parse_table_html(candidate_html);
  } catch (const Error&) {
    return rep;
  }
  NormalizeReport norm;
  TableGrid grid;
  try {
    grid = normalize_grid(frag, &norm, NormalizeOptions{.strict = true});
    rep.well_formed = true;
  } catch (const Error&) {
    norm = {};
    grid = normalize_grid(frag, &norm);
  }
  rep.rectangular = rep.well_formed && norm.clean();
  rep.placeholder_ok = count_img_tags(grid) == expected_placeholders;
  rep.non_empty = std::any_of(grid.cells().begin(), grid.cells().end(),
                              [](const GridCell& c) { return !text::trim(c.content).empty(); });
  rep.score = weights.well_formed * rep.well_formed + weights.rectangular * rep.rectangular +
              weights.placeholder * rep.placeholder_ok + weights.non_empty * rep.non_empty;
  return rep;
}

// ---------------------------------------------------------------------------
// Composite reward.

/// Scores a candidate against the original table. The rendered form is the
/// canonical re-serialization of the candidate (empty when unparseable).
class RewardScorer {
public:
  virtual ~RewardScorer() = default;
  virtual double score(const std::string& original_descriptor, const std::string& candidate_html,
                       const std::string& rendered_canonical) = 0;
};

/// Reference scorer used when no learned model is attached: content-aware
/// TEDS between the rendered candidate and the original (a table HTML).
class TedsRewardScorer : public RewardScorer {
public:
  double score(const std::string& original_descriptor, const std::string&,
               const std::string& rendered_canonical) override {
    if (rendered_canonical.empty()) return 0.0;
    return teds(rendered_canonical, original_descriptor, false);
  }
};

inline std::string render_canonical(std::string_view candidate_html) {
  try {
    return canonicalize_table(candidate_html);
  } catch (const Error&) {
    return {};
  }
}

inline double composite_reward(double rule_score, double model_score, double w_rule) {
  const auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(rule_score) || !in_unit(model_score) || !in_unit(w_rule))
    throw Error(ErrorCode::OutOfRange, "reward inputs must lie in [0,1]");
  return std::clamp(w_rule * rule_score + (1.0 - w_rule) * model_score, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Group-relative advantages.

/// a_i = (r_i - mean) / (std + eps) with population std. Groups that are
/// constant, or whose std does not exceed eps, get all-zero advantages.
/// Statistics are taken on rewards relative to the first one, so a uniform
/// shift that keeps those differences exact leaves the output bit-identical.
inline std::vector<double> group_advantages(std::span<const double> rewards, double eps = 1e-6) {
  if (rewards.empty()) throw Error(ErrorCode::EmptyGroup, "advantage group is empty");
  const double n = static_cast<double>(rewards.size());
  std::vector<double> centered(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) centered[i] = rewards[i] - rewards[0];

  std::vector<double> out(rewards.size(), 0.0);
  if (std::all_of(centered.begin(), centered.end(), [](double d) { return d == 0.0; })) return out;

  double mean = 0.0;
  for (double d : centered) mean += d;
  mean /= n;
  double var = 0.0;
  for (double d : centered) var += (d - mean) * (d - mean);
  const double stddev = std::sqrt(var / n);
  if (stddev <= eps || stddev == 0.0) return out;
  for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (centered[i] - mean) / (stddev + eps);
  return out;
}

inline std::vector<double> group_advantages(const std::vector<double>& rewards, double eps = 1e-6) {
  return group_advantages(std::span<const double>(rewards), eps);
}

// ---------------------------------------------------------------------------
// Preference pairs from ground-truth perturbations.

enum class Perturbation { SwapCells, DropRow, DropColumn, ChangeSpan, CorruptText, DuplicateRow };

inline constexpr std::array<Perturbation, 6> kAllPerturbations = {
    Perturbation::SwapCells,  Perturbation::DropRow,     Perturbation::DropColumn,
    Perturbation::ChangeSpan, Perturbation::CorruptText, Perturbation::DuplicateRow};

constexpr std::string_view to_string(Perturbation p) {
  switch (p) {
    case Perturbation::SwapCells: return "SwapCells";
    case Perturbation::DropRow: return "DropRow";
    case Perturbation::DropColumn: return "DropColumn";
    case Perturbation::ChangeSpan: return "ChangeSpan";
    case Perturbation::CorruptText: return "CorruptText";
    case Perturbation::DuplicateRow: return "DuplicateRow";
  }
  return "SwapCells";
}

inline std::optional<Perturbation> perturbation_from_string(std::string_view s) {
  for (Perturbation p : kAllPerturbations)
    if (to_string(p) == s) return p;
  return std::nullopt;
}

struct PrefPair {
  std::string positive;
  std::string negative;
  Perturbation perturbation;
  std::uint64_t seed = 0;
};

namespace detail {

/// Deterministic draws independent of the standard library's distributions.
class SeededDraw {
public:
  explicit SeededDraw(std::uint64_t seed) : engine_(seed) {}
  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }

private:
  std::mt19937_64 engine_;
};

[[noreturn]] inline void inapplicable(Perturbation p, const std::string& why) {
  throw Error(ErrorCode::InapplicablePerturbation, std::string(to_string(p)) + ": " + why);
}

inline TableGrid remove_row(const TableGrid& g, std::size_t row) {
  std::vector<GridCell> cells;
  for (GridCell c : g.cells()) {
    if (c.anchor_row <= row && row < c.row_end()) {
      if (c.rowspan == 1) continue;
      --c.rowspan;
    } else if (c.anchor_row > row) {
      --c.anchor_row;
    }
    cells.push_back(std::move(c));
  }
  return TableGrid::from_cells(g.n_rows() - 1, g.n_cols(), std::move(cells), false);
}

inline TableGrid remove_column(const TableGrid& g, std::size_t col) {
  std::vector<GridCell> cells;
  for (GridCell c : g.cells()) {
    if (c.anchor_col <= col && col < c.col_end()) {
      if (c.colspan == 1) continue;
      --c.colspan;
    } else if (c.anchor_col > col) {
      --c.anchor_col;
    }
    cells.push_back(std::move(c));
  }
  return TableGrid::from_cells(g.n_rows(), g.n_cols() - 1, std::move(cells), false);
}

inline bool row_self_contained(const TableGrid& g, std::size_t r) {
  for (std::size_t c = 0; c < g.n_cols(); ++c) {
    const GridCell& cell = g.cell_at(r, c);
    if (cell.anchor_row != r || cell.rowspan != 1) return false;
  }
  return true;
}

inline TableGrid swap_cells(const TableGrid& g, SeededDraw& draw) {
  const auto& cells = g.cells();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < cells.size(); ++i)
    for (std::size_t j = i + 1; j < cells.size(); ++j)
      if (text::normalize_content(cells[i].content) != text::normalize_content(cells[j].content))
        pairs.emplace_back(i, j);
  if (pairs.empty()) inapplicable(Perturbation::SwapCells, "no two cells with different content");
  const auto [i, j] = pairs[draw.below(pairs.size())];
  std::vector<GridCell> out = cells;
  std::swap(out[i].content, out[j].content);
  return TableGrid::from_cells(g.n_rows(), g.n_cols(), std::move(out), false);
}

inline TableGrid change_span(const TableGrid& g, SeededDraw& draw) {
  // candidates: shrink a spanning cell, or widen a 1x1 cell over its right neighbour
  struct Op {
    std::size_t cell;
    int kind;  // 0 shrink rows, 1 shrink cols, 2 widen
  };
  std::vector<Op> ops;
  const auto& cells = g.cells();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const GridCell& c = cells[i];
    if (c.rowspan > 1) ops.push_back({i, 0});
    if (c.colspan > 1) ops.push_back({i, 1});
    if (c.rowspan == 1 && c.col_end() < g.n_cols()) {
      const GridCell& right = g.cell_at(c.anchor_row, c.col_end());
      if (right.anchor_row == c.anchor_row && right.rowspan == 1) ops.push_back({i, 2});
    }
  }
  if (ops.empty()) inapplicable(Perturbation::ChangeSpan, "no span can be changed");
  const Op op = ops[draw.below(ops.size())];
  std::vector<GridCell> out = cells;
  GridCell& c = out[op.cell];
  if (op.kind == 0) {
    --c.rowspan;
  } else if (op.kind == 1) {
    --c.colspan;
  } else {
    const std::size_t right = g.owner(c.anchor_row, c.col_end());
    const GridCell victim = cells[right];
    c.colspan += victim.colspan;
    const std::string joined = std::string(text::trim(c.content + " " + victim.content));
    c.content = joined;
    out.erase(out.begin() + static_cast<std::ptrdiff_t>(right));
  }
  // shrunk spans leave holes that become empty cells
  return TableGrid::from_cells(g.n_rows(), g.n_cols(), std::move(out), true);
}

inline TableGrid corrupt_text(const TableGrid& g, SeededDraw& draw) {
  if (g.cells().empty()) inapplicable(Perturbation::CorruptText, "table has no cells");
  std::vector<GridCell> out = g.cells();
  std::vector<std::size_t> non_empty;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!text::trim(out[i].content).empty()) non_empty.push_back(i);
  const std::size_t target = non_empty.empty() ? draw.below(out.size()) : non_empty[draw.below(non_empty.size())];
  std::u32string cps = text::decode_utf8(out[target].content);

  // editable positions: visible characters outside markup
  std::vector<std::size_t> visible;
  bool in_tag = false;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] == U'<') in_tag = true;
    if (!in_tag && !text::is_space(cps[i])) visible.push_back(i);
    if (cps[i] == U'>') in_tag = false;
  }
  static constexpr std::u32string_view alphabet = U"xqz0123456789#@";
  const auto pick = [&](char32_t avoid) {
    char32_t c = alphabet[draw.below(alphabet.size())];
    if (text::fold_case(c) == text::fold_case(avoid)) c = c == U'#' ? U'@' : U'#';
    return c;
  };
  const std::size_t mode = visible.empty() ? 0 : draw.below(3);
  if (mode == 0) {
    // insert before a visible character, or at the front
    const std::size_t at = visible.empty() ? 0 : visible[draw.below(visible.size())];
    cps.insert(cps.begin() + static_cast<std::ptrdiff_t>(at), pick(0));
  } else if (mode == 1) {
    const std::size_t at = visible[draw.below(visible.size())];
    cps[at] = pick(cps[at]);
  } else {
    const std::size_t at = visible[draw.below(visible.size())];
    cps.erase(cps.begin() + static_cast<std::ptrdiff_t>(at));
  }
  out[target].content = text::encode_utf8(cps);
  return TableGrid::from_cells(g.n_rows(), g.n_cols(), std::move(out), false);
}

inline TableGrid duplicate_row(const TableGrid& g, SeededDraw& draw) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < g.n_rows(); ++r)
    if (g.n_cols() > 0 && row_self_contained(g, r)) rows.push_back(r);
  if (rows.empty()) inapplicable(Perturbation::DuplicateRow, "no row free of row spans");
  const std::size_t r = rows[draw.below(rows.size())];
  std::vector<GridCell> out;
  for (GridCell c : g.cells()) {
    if (c.anchor_row > r) ++c.anchor_row;
    if (c.anchor_row == r) {
      GridCell copy = c;
      copy.anchor_row = r + 1;
      out.push_back(std::move(copy));
    }
    out.push_back(std::move(c));
  }
  return TableGrid::from_cells(g.n_rows() + 1, g.n_cols(), std::move(out), false);
}

}  // namespace detail

/// Builds a (ground truth, perturbed) pair. The same html, kind and seed
/// always yield the same pair.
inline PrefPair perturb_table(std::string_view gt_html, Perturbation kind, std::uint64_t seed) {
  TableGrid gt;
  try {
    gt = parse_grid(gt_html);
  } catch (const Error& e) {
    throw Error(ErrorCode::GtParseError, e.what());
  }
  detail::SeededDraw draw(seed);
  TableGrid neg;
  switch (kind) {
    case Perturbation::SwapCells:
      neg = detail::swap_cells(gt, draw);
      break;
    case Perturbation::DropRow:
      if (gt.n_rows() < 2) detail::inapplicable(kind, "needs at least two rows");
      neg = detail::remove_row(gt, draw.below(gt.n_rows()));
      break;
    case Perturbation::DropColumn:
      if (gt.n_cols() < 2) detail::inapplicable(kind, "needs at least two columns");
      neg = detail::remove_column(gt, draw.below(gt.n_cols()));
      break;
    case Perturbation::ChangeSpan:
      neg = detail::change_span(gt, draw);
      break;
    case Perturbation::CorruptText:
      neg = detail::corrupt_text(gt, draw);
      break;
    case Perturbation::DuplicateRow:
      neg = detail::duplicate_row(gt, draw);
      break;
  }
  PrefPair pair{serialize_grid(gt), serialize_grid(neg), kind, seed};
  if (pair.positive == pair.negative) detail::inapplicable(kind, "perturbation left the table unchanged");
  return pair;
}

}  // namespace docparse
