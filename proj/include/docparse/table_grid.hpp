#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/error.hpp"
#include "docparse/html.hpp"
#include "docparse/text.hpp"

namespace docparse {

// ---------------------------------------------------------------------------
// Raw fragment: what the recognizer emitted, before span layout.

struct RawCell {
  std::string content;
  std::size_t rowspan = 1;
  std::size_t colspan = 1;
  bool is_header = false;

  friend bool operator==(const RawCell&, const RawCell&) = default;
};

using RawRow = std::vector<RawCell>;

struct TableFragment {
  std::vector<RawRow> rows;
  std::vector<std::string> warnings;  // recovered markup problems
};

// ---------------------------------------------------------------------------
// Normalized grid.

struct GridCell {
  std::size_t anchor_row = 0;
  std::size_t anchor_col = 0;
  std::size_t rowspan = 1;
  std::size_t colspan = 1;
  std::string content;
  bool is_header = false;

  std::size_t row_end() const { return anchor_row + rowspan; }
  std::size_t col_end() const { return anchor_col + colspan; }

  friend bool operator==(const GridCell&, const GridCell&) = default;
};

/// Span-aware table. Cells are stored in row-major anchor order and every
/// grid position is owned by exactly one cell.
class TableGrid {
public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  TableGrid() = default;

  /// Builds a grid from anchored cells. Positions no cell covers are filled
  /// with empty 1x1 cells when `pad` is set; otherwise they are an error.
  /// Overlapping or out-of-bounds cells throw SpanConflict.
  static TableGrid from_cells(std::size_t n_rows, std::size_t n_cols, std::vector<GridCell> cells,
                              bool pad = true) {
    TableGrid g;
    g.n_rows_ = n_rows;
    g.n_cols_ = n_cols;
    std::vector<std::size_t> occ(n_rows * n_cols, npos);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const GridCell& c = cells[i];
      if (c.rowspan == 0 || c.colspan == 0 || c.row_end() > n_rows || c.col_end() > n_cols)
        throw Error(ErrorCode::SpanConflict, "cell at (" + std::to_string(c.anchor_row) + "," +
                                                 std::to_string(c.anchor_col) + ") exceeds grid bounds");
      for (std::size_t r = c.anchor_row; r < c.row_end(); ++r)
        for (std::size_t col = c.anchor_col; col < c.col_end(); ++col) {
          if (occ[r * n_cols + col] != npos)
            throw Error(ErrorCode::SpanConflict,
                        "position (" + std::to_string(r) + "," + std::to_string(col) + ") claimed twice");
          occ[r * n_cols + col] = i;
        }
    }
    for (std::size_t r = 0; r < n_rows; ++r)
      for (std::size_t col = 0; col < n_cols; ++col)
        if (occ[r * n_cols + col] == npos) {
          if (!pad)
            throw Error(ErrorCode::SpanConflict,
                        "position (" + std::to_string(r) + "," + std::to_string(col) + ") not covered");
          occ[r * n_cols + col] = cells.size();
          cells.push_back(GridCell{r, col, 1, 1, {}, false});
        }
    std::sort(cells.begin(), cells.end(), [](const GridCell& a, const GridCell& b) {
      return a.anchor_row != b.anchor_row ? a.anchor_row < b.anchor_row : a.anchor_col < b.anchor_col;
    });
    g.cells_ = std::move(cells);
    g.occupancy_.assign(n_rows * n_cols, npos);
    for (std::size_t i = 0; i < g.cells_.size(); ++i) {
      const GridCell& c = g.cells_[i];
      for (std::size_t r = c.anchor_row; r < c.row_end(); ++r)
        for (std::size_t col = c.anchor_col; col < c.col_end(); ++col) g.occupancy_[r * n_cols + col] = i;
    }
    return g;
  }

  std::size_t n_rows() const { return n_rows_; }
  std::size_t n_cols() const { return n_cols_; }
  const std::vector<GridCell>& cells() const { return cells_; }

  /// Index into cells() of the cell covering (row, col).
  std::size_t owner(std::size_t row, std::size_t col) const { return occupancy_.at(row * n_cols_ + col); }
  const GridCell& cell_at(std::size_t row, std::size_t col) const { return cells_[owner(row, col)]; }

  /// Cells anchored in `row`, left to right.
  std::vector<const GridCell*> row_cells(std::size_t row) const {
    std::vector<const GridCell*> out;
    for (const auto& c : cells_)
      if (c.anchor_row == row) out.push_back(&c);
    return out;
  }

  friend bool operator==(const TableGrid&, const TableGrid&) = default;

private:
  std::size_t n_rows_ = 0;
  std::size_t n_cols_ = 0;
  std::vector<GridCell> cells_;
  std::vector<std::size_t> occupancy_;
};

struct NormalizeOptions {
  bool strict = false;  // overlapping spans throw SpanConflict instead of being clipped
};

struct NormalizeReport {
  std::size_t padded_cells = 0;
  std::size_t clipped_spans = 0;
  std::vector<std::string> warnings;

  bool clean() const { return padded_cells == 0 && clipped_spans == 0; }
};

// ---------------------------------------------------------------------------
// Parsing.

namespace detail {

constexpr std::size_t kMaxColspan = 1000;
constexpr std::size_t kMaxRowspan = 65534;

inline std::size_t parse_span(const html::Tag& tag, std::string_view attr, std::size_t cap,
                              std::vector<std::string>& warnings) {
  const html::Attribute* a = tag.find(attr);
  if (!a || !a->has_value) return 1;
  const std::string_view v = text::trim(a->value);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc{} || value == 0) {
    warnings.push_back(std::string(attr) + "=\"" + a->value + "\" is not a positive integer; using 1");
    return 1;
  }
  if (ptr != v.data() + v.size())
    warnings.push_back(std::string(attr) + "=\"" + a->value + "\" has trailing characters");
  if (value > cap) {
    warnings.push_back(std::string(attr) + " capped at " + std::to_string(cap));
    value = cap;
  }
  return value;
}

}  // namespace detail

/// Parses the first `<table>` of an HTML string into raw rows and cells.
/// Cell content is kept verbatim, including inline tags and nested tables.
inline TableFragment parse_table_html(std::string_view src) {
  html::Tag tag;
  std::size_t pos = 0;
  bool found = false;
  while ((pos = src.find('<', pos)) != std::string_view::npos) {
    const auto scan = html::read_tag(src, pos, tag);
    if (scan == html::TagScan::Tag && !tag.closing && tag.name == "table") {
      found = true;
      break;
    }
    pos = scan == html::TagScan::Tag ? tag.end : pos + 1;
  }
  if (!found) throw Error(ErrorCode::NoTableFound, "input contains no <table> element");

  TableFragment frag;
  pos = tag.end;
  bool row_open = false;
  bool cell_open = false;
  bool in_thead = false;
  std::size_t nested = 0;       // depth of <table> inside the open cell
  std::size_t skipped = 0;      // depth of a stray <table> outside any cell
  std::size_t content_begin = 0;
  RawCell cell;

  const auto close_cell = [&](std::size_t content_end) {
    if (!cell_open) return;
    cell.content = std::string(src.substr(content_begin, content_end - content_begin));
    frag.rows.back().push_back(std::move(cell));
    cell = RawCell{};
    cell_open = false;
    nested = 0;
  };
  const auto open_row = [&] {
    frag.rows.emplace_back();
    row_open = true;
  };

  bool closed = false;
  while (!closed) {
    pos = src.find('<', pos);
    if (pos == std::string_view::npos) break;
    const auto scan = html::read_tag(src, pos, tag);
    if (scan == html::TagScan::Text) {
      ++pos;
      continue;
    }
    if (scan == html::TagScan::Unterminated) {
      if (cell_open) {
        // an unterminated tag inside a cell swallows the rest of the input
        frag.warnings.push_back("unterminated tag inside cell at offset " + std::to_string(pos));
        break;
      }
      throw Error(ErrorCode::MalformedMarkup, "unterminated tag at offset " + std::to_string(pos));
    }
    pos = tag.end;
    if (tag.name == "!") continue;

    if (cell_open && nested > 0) {
      if (tag.name == "table") tag.closing ? --nested : ++nested;
      continue;
    }
    if (skipped > 0) {
      if (tag.name == "table") tag.closing ? --skipped : ++skipped;
      continue;
    }

    const std::string& name = tag.name;
    if (name == "table") {
      if (tag.closing) {
        close_cell(tag.begin);
        closed = true;
      } else if (cell_open) {
        nested = 1;
      } else {
        frag.warnings.push_back("stray nested <table> outside a cell ignored");
        skipped = 1;
      }
    } else if (name == "td" || name == "th") {
      if (tag.closing) {
        close_cell(tag.begin);
        continue;
      }
      close_cell(tag.begin);
      if (!row_open) open_row();
      cell.is_header = name == "th" || in_thead;
      cell.rowspan = detail::parse_span(tag, "rowspan", detail::kMaxRowspan, frag.warnings);
      cell.colspan = detail::parse_span(tag, "colspan", detail::kMaxColspan, frag.warnings);
      cell_open = true;
      content_begin = tag.end;
    } else if (name == "tr") {
      close_cell(tag.begin);
      if (tag.closing) {
        row_open = false;
      } else {
        open_row();
      }
    } else if (name == "thead" || name == "tbody" || name == "tfoot") {
      close_cell(tag.begin);
      row_open = false;
      in_thead = name == "thead" && !tag.closing;
    }
    // every other tag is opaque: kept verbatim inside cells, ignored elsewhere
  }

  if (!closed) {
    if (cell_open) close_cell(src.size());
    if (frag.rows.empty())
      throw Error(ErrorCode::MalformedMarkup, "<table> is never closed and holds no rows");
    frag.warnings.push_back("missing </table>; recovered " + std::to_string(frag.rows.size()) + " rows");
  }
  if (frag.rows.empty()) throw Error(ErrorCode::MalformedMarkup, "<table> holds no rows");
  return frag;
}

// ---------------------------------------------------------------------------
// Normalization (HTML table layout algorithm).

inline TableGrid normalize_grid(const TableFragment& frag, NormalizeReport* report = nullptr,
                                NormalizeOptions options = {}) {
  if (frag.rows.empty()) throw Error(ErrorCode::MalformedMarkup, "fragment has no rows");
  NormalizeReport local;
  NormalizeReport& rep = report ? *report : local;

  const std::size_t n_rows = frag.rows.size();
  std::vector<std::vector<bool>> occ(n_rows);
  const auto taken = [&](std::size_t r, std::size_t c) { return c < occ[r].size() && occ[r][c]; };
  std::vector<GridCell> cells;

  for (std::size_t r = 0; r < n_rows; ++r) {
    std::size_t col = 0;
    for (const RawCell& raw : frag.rows[r]) {
      while (taken(r, col)) ++col;
      std::size_t rowspan = std::max<std::size_t>(raw.rowspan, 1);
      std::size_t colspan = std::max<std::size_t>(raw.colspan, 1);
      if (rowspan > n_rows - r) {
        rep.warnings.push_back("rowspan at (" + std::to_string(r) + "," + std::to_string(col) +
                               ") clipped from " + std::to_string(rowspan) + " to " +
                               std::to_string(n_rows - r));
        rowspan = n_rows - r;
        ++rep.clipped_spans;
      }
      // widest free run on the anchor row
      std::size_t width = 0;
      while (width < colspan && !taken(r, col + width)) ++width;
      // tallest band over that run free of earlier rowspans
      std::size_t height = 1;
      while (height < rowspan) {
        bool free = true;
        for (std::size_t k = 0; k < width && free; ++k) free = !taken(r + height, col + k);
        if (!free) break;
        ++height;
      }
      if (width < colspan || height < rowspan) {
        if (options.strict)
          throw Error(ErrorCode::SpanConflict, "cell at row " + std::to_string(r) + ", column " +
                                                   std::to_string(col) + " overlaps an earlier span");
        rep.warnings.push_back("span conflict at (" + std::to_string(r) + "," + std::to_string(col) +
                               ") resolved by clipping to " + std::to_string(height) + "x" +
                               std::to_string(width));
        ++rep.clipped_spans;
      }
      for (std::size_t rr = r; rr < r + height; ++rr) {
        if (occ[rr].size() < col + width) occ[rr].resize(col + width, false);
        for (std::size_t cc = col; cc < col + width; ++cc) occ[rr][cc] = true;
      }
      cells.push_back(GridCell{r, col, height, width, raw.content, raw.is_header});
      col += width;
    }
  }

  std::size_t n_cols = 0;
  for (const auto& row : occ) n_cols = std::max(n_cols, row.size());
  for (std::size_t r = 0; r < n_rows; ++r)
    for (std::size_t c = 0; c < n_cols; ++c)
      if (!taken(r, c)) ++rep.padded_cells;
  if (rep.padded_cells > 0)
    rep.warnings.push_back("padded " + std::to_string(rep.padded_cells) + " empty cells");
  return TableGrid::from_cells(n_rows, n_cols, std::move(cells), true);
}

/// Parses and normalizes in one step.
inline TableGrid parse_grid(std::string_view html_text, NormalizeReport* report = nullptr,
                            NormalizeOptions options = {}) {
  return normalize_grid(parse_table_html(html_text), report, options);
}

// ---------------------------------------------------------------------------
// Serialization.

/// Canonical HTML: no whitespace between tags, rowspan before colspan,
/// spans only when > 1, header cells as <th>.
inline std::string serialize_grid(const TableGrid& grid) {
  std::string out = "<table>";
  std::size_t i = 0;
  const auto& cells = grid.cells();
  for (std::size_t r = 0; r < grid.n_rows(); ++r) {
    out += "<tr>";
    for (; i < cells.size() && cells[i].anchor_row == r; ++i) {
      const GridCell& c = cells[i];
      const char* tag = c.is_header ? "th" : "td";
      out += '<';
      out += tag;
      if (c.rowspan > 1) out += " rowspan=\"" + std::to_string(c.rowspan) + "\"";
      if (c.colspan > 1) out += " colspan=\"" + std::to_string(c.colspan) + "\"";
      out += '>';
      out += c.content;
      out += "</";
      out += tag;
      out += '>';
    }
    out += "</tr>";
  }
  out += "</table>";
  return out;
}

/// Parse + normalize + serialize; the canonical form of recognizer output.
inline std::string canonicalize_table(std::string_view html_text) {
  return serialize_grid(parse_grid(html_text));
}

// ---------------------------------------------------------------------------
// Row helpers shared by merge, metrics and reward code.

/// Content per column of `row`: the content of the cell anchored at that
/// column (for any anchor row), empty for columns covered by a colspan.
inline std::vector<std::string> row_texts(const TableGrid& grid, std::size_t row) {
  std::vector<std::string> out(grid.n_cols());
  for (std::size_t c = 0; c < grid.n_cols(); ++c) {
    const GridCell& cell = grid.cell_at(row, c);
    if (cell.anchor_col == c) out[c] = cell.content;
  }
  return out;
}

/// Rows [begin, end) as a standalone grid. Cells crossing the slice edges are
/// clipped; positions owned by cells anchored above `begin` become empty.
inline TableGrid slice_rows(const TableGrid& grid, std::size_t begin, std::size_t end) {
  end = std::min(end, grid.n_rows());
  begin = std::min(begin, end);
  std::vector<GridCell> cells;
  for (const GridCell& c : grid.cells()) {
    if (c.anchor_row < begin || c.anchor_row >= end) continue;
    GridCell copy = c;
    copy.anchor_row -= begin;
    copy.rowspan = std::min(c.row_end(), end) - c.anchor_row;
    cells.push_back(std::move(copy));
  }
  return TableGrid::from_cells(end - begin, grid.n_cols(), std::move(cells), true);
}

/// Stacks `bottom` under `top`. Column counts must match.
inline TableGrid stack_rows(const TableGrid& top, const TableGrid& bottom) {
  if (top.n_cols() != bottom.n_cols() && top.n_rows() > 0 && bottom.n_rows() > 0)
    throw Error(ErrorCode::ColumnCountMismatch, std::to_string(top.n_cols()) + " vs " +
                                                    std::to_string(bottom.n_cols()) + " columns");
  std::vector<GridCell> cells = top.cells();
  for (GridCell c : bottom.cells()) {
    c.anchor_row += top.n_rows();
    cells.push_back(std::move(c));
  }
  const std::size_t n_cols = top.n_rows() > 0 ? top.n_cols() : bottom.n_cols();
  return TableGrid::from_cells(top.n_rows() + bottom.n_rows(), n_cols, std::move(cells), true);
}

// ---------------------------------------------------------------------------
// Header detection.

namespace detail {

inline bool row_all_header(const TableGrid& g, std::size_t r) {
  if (g.n_cols() == 0) return false;
  for (std::size_t c = 0; c < g.n_cols(); ++c)
    if (!g.cell_at(r, c).is_header) return false;
  return true;
}

}  // namespace detail

/// Number of leading header rows. Explicit <th>/<thead> rows are counted;
/// without them the first row is a header when all its cells are non-empty
/// and non-numeric while some column holds a numeric body cell.
inline std::size_t detect_header_rows(const TableGrid& grid) {
  std::size_t k = 0;
  while (k < grid.n_rows() && detail::row_all_header(grid, k)) ++k;
  if (k > 0 || grid.n_rows() < 2 || grid.n_cols() == 0) return k;

  for (const GridCell* c : grid.row_cells(0)) {
    if (text::normalize_content(c->content).empty() || text::is_pure_number(c->content)) return 0;
  }
  // a first-row cell spanning into the body disqualifies the row
  for (std::size_t c = 0; c < grid.n_cols(); ++c)
    if (grid.cell_at(0, c).row_end() > 1) return 0;
  for (std::size_t c = 0; c < grid.n_cols(); ++c) {
    if (grid.cell_at(0, c).anchor_col != c) continue;
    for (std::size_t r = 1; r < grid.n_rows(); ++r) {
      const GridCell& body = grid.cell_at(r, c);
      if (body.anchor_row == r && text::is_pure_number(body.content)) return 1;
    }
  }
  return 0;
}

}  // namespace docparse
