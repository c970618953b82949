#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/error.hpp"
#include "docparse/table_grid.hpp"
#include "docparse/text.hpp"

namespace docparse {

// ---------------------------------------------------------------------------
// Sequence edit distance.

/// Unit-cost Levenshtein distance between two sequences.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <typename T>
double normalized_levenshtein(std::span<const T> a, std::span<const T> b) {
  const std::size_t denom = std::max<std::size_t>({a.size(), b.size(), 1});
  return static_cast<double>(levenshtein(a, b)) / static_cast<double>(denom);
}

/// Levenshtein distance over Unicode scalar values.
inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  const std::u32string ua = text::decode_utf8(a);
  const std::u32string ub = text::decode_utf8(b);
  return levenshtein<char32_t>(ua, ub);
}

/// edit_distance / max(len(a), len(b), 1), lengths in scalar values.
inline double normalized_edit_distance(std::string_view a, std::string_view b) {
  const std::u32string ua = text::decode_utf8(a);
  const std::u32string ub = text::decode_utf8(b);
  return normalized_levenshtein<char32_t>(ua, ub);
}

/// Normalized edit distance between two reading orders of matched element ids.
template <typename Id>
double reading_order_edit(const std::vector<Id>& pred, const std::vector<Id>& gt) {
  return normalized_levenshtein<Id>(pred, gt);
}

// ---------------------------------------------------------------------------
// Ordered trees.

struct DocNode {
  std::string tag;
  std::string content;
  std::vector<std::size_t> children;
};

/// Rooted ordered tree stored flat; nodes[0] is the root. An empty node list
/// is the empty tree.
struct DocTree {
  std::vector<DocNode> nodes;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }

  std::size_t add_root(std::string tag, std::string content = {}) {
    nodes.clear();
    nodes.push_back(DocNode{std::move(tag), std::move(content), {}});
    return 0;
  }
  std::size_t add_child(std::size_t parent, std::string tag, std::string content = {}) {
    nodes.push_back(DocNode{std::move(tag), std::move(content), {}});
    nodes[parent].children.push_back(nodes.size() - 1);
    return nodes.size() - 1;
  }
};

/// table -> tr* -> (td|th)*, span values folded into the cell tag
/// (e.g. "td[2,1]" for rowspan 2, colspan 1) and content normalized.
inline DocTree build_doc_tree(const TableGrid& grid) {
  DocTree tree;
  tree.add_root("table");
  std::size_t i = 0;
  const auto& cells = grid.cells();
  for (std::size_t r = 0; r < grid.n_rows(); ++r) {
    const std::size_t tr = tree.add_child(0, "tr");
    for (; i < cells.size() && cells[i].anchor_row == r; ++i) {
      const GridCell& c = cells[i];
      std::string tag = std::string(c.is_header ? "th" : "td") + "[" + std::to_string(c.rowspan) + "," +
                        std::to_string(c.colspan) + "]";
      tree.add_child(tr, std::move(tag), text::normalize_content(c.content));
    }
  }
  return tree;
}

/// Rename costs; insertion and deletion always cost 1.
struct StructureCost {
  double rename(const DocNode& a, const DocNode& b) const { return a.tag == b.tag ? 0.0 : 1.0; }
};

struct ContentCost {
  double rename(const DocNode& a, const DocNode& b) const {
    if (a.tag != b.tag) return 1.0;
    return normalized_edit_distance(a.content, b.content);
  }
};

namespace detail {

struct PostOrder {
  std::vector<const DocNode*> node;    // 1-based post-order
  std::vector<std::size_t> leftmost;   // leftmost leaf descendant, 1-based
  std::vector<std::size_t> keyroots;   // ascending
};

inline PostOrder post_order(const DocTree& t) {
  PostOrder p;
  p.node.push_back(nullptr);
  p.leftmost.push_back(0);
  if (t.empty()) return p;
  // iterative post-order walk returning the number of each node
  struct Frame {
    std::size_t id;
    std::size_t next_child;
    std::size_t leftmost;
  };
  std::vector<Frame> stack{{0, 0, 0}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    const DocNode& n = t.nodes[f.id];
    if (f.next_child < n.children.size()) {
      stack.push_back({n.children[f.next_child++], 0, 0});
      continue;
    }
    p.node.push_back(&n);
    const std::size_t number = p.node.size() - 1;
    const std::size_t lm = n.children.empty() ? number : f.leftmost;
    p.leftmost.push_back(lm);
    stack.pop_back();
    if (!stack.empty() && stack.back().next_child == 1) stack.back().leftmost = lm;
  }
  const std::size_t n = p.node.size() - 1;
  std::vector<bool> has_higher(n + 1, false);
  for (std::size_t i = n; i >= 1; --i) {
    if (!has_higher[p.leftmost[i]]) {
      p.keyroots.push_back(i);
      has_higher[p.leftmost[i]] = true;
    }
  }
  std::reverse(p.keyroots.begin(), p.keyroots.end());
  return p;
}

}  // namespace detail

/// Ordered tree edit distance (Zhang-Shasha) with unit insert/delete cost.
template <typename CostModel>
double tree_edit_distance(const DocTree& t1, const DocTree& t2, const CostModel& cost) {
  const detail::PostOrder a = detail::post_order(t1);
  const detail::PostOrder b = detail::post_order(t2);
  const std::size_t n = a.node.size() - 1;
  const std::size_t m = b.node.size() - 1;
  if (n == 0) return static_cast<double>(m);
  if (m == 0) return static_cast<double>(n);

  std::vector<double> treedist((n + 1) * (m + 1), 0.0);
  std::vector<double> fd((n + 2) * (m + 2), 0.0);
  const auto td = [&](std::size_t i, std::size_t j) -> double& { return treedist[i * (m + 1) + j]; };

  for (std::size_t i : a.keyroots) {
    for (std::size_t j : b.keyroots) {
      const std::size_t li = a.leftmost[i];
      const std::size_t lj = b.leftmost[j];
      const std::size_t rows = i - li + 2;
      const std::size_t cols = j - lj + 2;
      // fd(x, y) is the forest distance for post-order ranges [li, li+x-1] x [lj, lj+y-1]
      const auto f = [&](std::size_t x, std::size_t y) -> double& { return fd[x * cols + y]; };
      f(0, 0) = 0.0;
      for (std::size_t x = 1; x < rows; ++x) f(x, 0) = f(x - 1, 0) + 1.0;
      for (std::size_t y = 1; y < cols; ++y) f(0, y) = f(0, y - 1) + 1.0;
      for (std::size_t x = 1; x < rows; ++x) {
        const std::size_t ni = li + x - 1;
        for (std::size_t y = 1; y < cols; ++y) {
          const std::size_t nj = lj + y - 1;
          const double del = f(x - 1, y) + 1.0;
          const double ins = f(x, y - 1) + 1.0;
          if (a.leftmost[ni] == li && b.leftmost[nj] == lj) {
            const double ren = f(x - 1, y - 1) + cost.rename(*a.node[ni], *b.node[nj]);
            f(x, y) = std::min({del, ins, ren});
            td(ni, nj) = f(x, y);
          } else {
            const double sub = f(a.leftmost[ni] - li, b.leftmost[nj] - lj) + td(ni, nj);
            f(x, y) = std::min({del, ins, sub});
          }
        }
      }
    }
  }
  return td(n, m);
}

inline double tree_edit_distance(const DocTree& t1, const DocTree& t2, bool structure_only) {
  return structure_only ? tree_edit_distance(t1, t2, StructureCost{}) : tree_edit_distance(t1, t2, ContentCost{});
}

/// Tree-edit-distance similarity between a predicted and a ground-truth
/// table: 1 - TED / max(|T_pred|, |T_gt|, 1). An unparseable prediction
/// scores 0; an unparseable ground truth throws GtParseError.
inline double teds(std::string_view pred_html, std::string_view gt_html, bool structure_only) {
  DocTree gt;
  try {
    gt = build_doc_tree(parse_grid(gt_html));
  } catch (const Error& e) {
    throw Error(ErrorCode::GtParseError, e.what());
  }
  DocTree pred;
  try {
    pred = build_doc_tree(parse_grid(pred_html));
  } catch (const Error&) {
    return 0.0;
  }
  const double dist = tree_edit_distance(pred, gt, structure_only);
  const double denom = static_cast<double>(std::max<std::size_t>({pred.size(), gt.size(), 1}));
  return std::clamp(1.0 - dist / denom, 0.0, 1.0);
}

}  // namespace docparse
