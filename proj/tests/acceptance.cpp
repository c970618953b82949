// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "docparse/docparse.hpp"
#include "support/fixtures.hpp"
#include "support/generators.hpp"

using namespace docparse;
using testsupport::Rng;
using testsupport::uniform;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(const std::string& why) {
    if (ok) detail = why;
    ok = false;
  }
};

// ---- 1

Outcome ted_oracle() {
  Outcome o;
  const auto t0 = Clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const DocTree a = testsupport::random_tree(rng, 8), b = testsupport::random_tree(rng, 8);
    const double ds = std::abs(tree_edit_distance(a, b, StructureCost{}) - testsupport::brute_force_ted(a, b, StructureCost{}));
    const double dc = std::abs(tree_edit_distance(a, b, ContentCost{}) - testsupport::brute_force_ted(a, b, ContentCost{}));
    worst = std::max({worst, ds, dc});
    if (ds > 1e-12 || dc > 1e-12) o.fail("pair " + std::to_string(i) + " differs from the exhaustive oracle");
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 30.0) o.fail("took " + std::to_string(elapsed) + " s");
  if (o.ok) {
    std::ostringstream s;
    s << "1000 pairs, max |diff| " << worst << ", " << elapsed << " s";
    o.detail = s.str();
  }
  return o;
}

// ---- 2

std::string random_string(Rng& rng) {
  static const char* alphabet[] = {"a", "b", "c", "d", "\xc3\xa9", "\xe4\xb8\xad"};
  std::string s;
  const std::size_t n = uniform(rng, 0, 20);
  for (std::size_t i = 0; i < n; ++i) s += alphabet[uniform(rng, 0, 5)];
  return s;
}

Outcome metric_identities() {
  Outcome o;
  Rng rng(2002);
  for (int i = 0; i < 200; ++i) {
    testsupport::GridShape shape;
    shape.span_probability = 0.3;
    shape.header_row = testsupport::chance(rng, 0.5);
    const std::string html = serialize_grid(testsupport::random_grid(rng, shape));
    if (teds(html, html, false) != 1.0 || teds(html, html, true) != 1.0) o.fail("teds(x,x) != 1 for " + html);
  }
  for (int i = 0; i < 5000; ++i) {
    const std::string a = random_string(rng), b = random_string(rng), c = random_string(rng);
    const std::size_t ab = edit_distance(a, b), ba = edit_distance(b, a), bc = edit_distance(b, c), ac = edit_distance(a, c);
    if (ab != ba) o.fail("asymmetric on triple " + std::to_string(i));
    if (ac > ab + bc) o.fail("triangle inequality broken on triple " + std::to_string(i));
    if ((ab == 0) != (a == b)) o.fail("identity broken on triple " + std::to_string(i));
  }
  if (o.ok) o.detail = "200 tables, 5000 string triples";
  return o;
}

// ---- 3

/// Copy of row `r` with every cell blanked except the one anchored at `col`.
TableGrid split_row(const TableGrid& g, std::size_t r, std::size_t col, std::size_t at, bool head) {
  std::vector<GridCell> cells;
  for (const GridCell* c : g.row_cells(r)) {
    GridCell copy = *c;
    copy.anchor_row = 0;
    if (c->anchor_col == col)
      copy.content = head ? c->content.substr(0, at) : c->content.substr(at);
    else if (!head)
      copy.content.clear();
    cells.push_back(std::move(copy));
  }
  return TableGrid::from_cells(1, g.n_cols(), std::move(cells), false);
}

Outcome merge_round_trips() {
  Outcome o;
  Rng rng(3003);
  std::size_t done = 0;
  std::size_t counts[3] = {0, 0, 0};
  while (done < 500) {
    testsupport::GridShape shape;
    shape.span_probability = 0.25;
    const TableGrid g = testsupport::random_grid(rng, shape);
    const std::vector<std::size_t> cuts = testsupport::clean_boundaries(g, 2);
    std::vector<std::size_t> split_rows;  // body rows with clean boundaries above and below
    std::vector<std::size_t> all = testsupport::clean_boundaries(g, 1);
    all.push_back(g.n_rows());
    for (std::size_t k = 0; k + 1 < all.size(); ++k)
      if (all[k + 1] == all[k] + 1) split_rows.push_back(all[k]);
    if (cuts.empty() || split_rows.empty()) continue;
    ++done;
    const std::string ctx = serialize_grid(g);

    const std::size_t cut = cuts[uniform(rng, 0, cuts.size() - 1)];
    const TableGrid a = slice_rows(g, 0, cut), b = slice_rows(g, cut, g.n_rows());

    const TableGrid b1 = stack_rows(slice_rows(g, 0, 1), b);
    const MergePlan p1 = decide_merge(a, b1, nullptr, MergeConfig{});
    if (p1.pattern != MergePattern::Pattern1) o.fail("expected Pattern1 for " + ctx);
    else if (merge(a, b1, p1) != g) o.fail("Pattern1 merge differs for " + ctx);
    else ++counts[0];

    const MergePlan p2 = decide_merge(a, b, nullptr, MergeConfig{});
    if (p2.pattern != MergePattern::Pattern2) o.fail("expected Pattern2 for " + ctx);
    else if (merge(a, b, p2) != g) o.fail("Pattern2 merge differs for " + ctx);
    else ++counts[1];

    const std::size_t r = split_rows[uniform(rng, 0, split_rows.size() - 1)];
    const std::vector<const GridCell*> row = g.row_cells(r);
    const std::size_t col = row[uniform(rng, 0, row.size() - 1)]->anchor_col;
    const std::size_t at = uniform(rng, 1, 3);  // inside the word "Cell"
    const TableGrid a3 = stack_rows(slice_rows(g, 0, r), split_row(g, r, col, at, true));
    const TableGrid b3 = stack_rows(split_row(g, r, col, at, false), slice_rows(g, r + 1, g.n_rows()));
    const MergePlan p3 = decide_merge(a3, b3, nullptr, MergeConfig{});
    if (p3.pattern != MergePattern::Pattern3) o.fail("expected Pattern3 for " + ctx + " row " + std::to_string(r));
    else if (merge(a3, b3, p3) != g) o.fail("Pattern3 merge differs for " + ctx + " row " + std::to_string(r));
    else ++counts[2];
  }
  std::ostringstream s;
  s << "500 grids, exact reproductions P1 " << counts[0] << "/500, P2 " << counts[1] << "/500, P3 " << counts[2] << "/500";
  o.detail = o.ok ? s.str() : o.detail + "; " + s.str();
  return o;
}

// ---- 4

Outcome capability_matrix() {
  Outcome o;
  const char* scenarios[] = {"cross_page_rp_hdr", "cross_page_no_hdr", "cross_page_split",
                             "cross_column_rp_hdr", "cross_column_no_hdr", "cross_column_split"};
  std::size_t passed = 0;
  for (const std::string name : scenarios) {
    const std::string dir = testsupport::data_path("capability/" + name + "/");
    const auto trim = [](std::string s) { return std::string(text::trim(s)); };
    const std::string a = trim(testsupport::slurp(dir + "a.html")), b = trim(testsupport::slurp(dir + "b.html"));
    const std::string expected = trim(testsupport::slurp(dir + "expected.html"));
    const std::string pattern = trim(testsupport::slurp(dir + "pattern"));

    std::vector<PageInput> pages;
    const auto make_page = [](std::vector<std::string> entries, nlohmann::json fixture) {
      PageInput p;
      p.layout_json = "[" ;
      for (std::size_t i = 0; i < entries.size(); ++i) p.layout_json += (i ? "," : "") + entries[i];
      p.layout_json += "]";
      p.fixture_json = fixture.dump();
      p.width = testsupport::kPageWidth;
      p.height = testsupport::kPageHeight;
      return p;
    };
    using testsupport::layout_entry;
    if (name.rfind("cross_page", 0) == 0) {
      pages.push_back(make_page({layout_entry({80, 100, 920, 300}, 0, "text"), layout_entry({80, 320, 920, 1300}, 1, "table"),
                                 layout_entry({460, 1350, 540, 1380}, 2, "footer")},
                                {{"0", "Lead paragraph."}, {"1", a}, {"2", "1"}}));
      pages.push_back(make_page({layout_entry({80, 30, 920, 60}, 0, "header"), layout_entry({80, 80, 920, 600}, 1, "table"),
                                 layout_entry({80, 640, 920, 700}, 2, "text")},
                                {{"0", "Running head"}, {"1", b}, {"2", "Closing paragraph."}}));
    } else {
      pages.push_back(make_page({layout_entry({80, 100, 920, 300}, 0, "text"), layout_entry({60, 320, 480, 1300}, 1, "table"),
                                 layout_entry({520, 320, 940, 1300}, 2, "table"), layout_entry({80, 1310, 920, 1340}, 3, "text")},
                                {{"0", "Lead paragraph."}, {"1", a}, {"2", b}, {"3", "Closing paragraph."}}));
    }
    const PipelineResult r = pipeline_run(pages, Config{});
    const std::string want = "Lead paragraph.\n\n" + expected + "\n\nClosing paragraph.";
    if (r.document != want) {
      o.fail(name + ": document differs");
      continue;
    }
    if (r.merge_report.size() != 1 || r.merge_report[0]["plans"][0]["pattern"] != pattern) {
      o.fail(name + ": expected " + pattern);
      continue;
    }
    ++passed;
  }
  if (o.ok) o.detail = std::to_string(passed) + "/6 scenarios merged";
  return o;
}

// ---- 5

Outcome idtp_round_trip() {
  Outcome o;
  Rng rng(5005);
  std::size_t total_rewrites = 0;
  for (int t = 0; t < 100; ++t) {
    testsupport::GridShape shape;
    shape.min_rows = 3;
    const TableGrid g = testsupport::random_grid(rng, shape);
    std::vector<std::size_t> body;
    for (std::size_t i = 0; i < g.cells().size(); ++i)
      if (!g.cells()[i].is_header) body.push_back(i);
    std::shuffle(body.begin(), body.end(), rng);
    const std::size_t k = std::min<std::size_t>(t % 5, body.size());
    std::vector<GridCell> cells = g.cells();
    for (std::size_t j = 0; j < k; ++j)
      cells[body[j]].content = testsupport::chance(rng, 0.5) ? "<img>" : "<img src=\"\" alt=\"fig\">";
    const std::string html = serialize_grid(TableGrid::from_cells(g.n_rows(), g.n_cols(), cells, false));

    // one detection per 100x100 slot so kept boxes never overlap
    const Rect table{100, 200, 900, 1000};
    std::vector<std::size_t> slots(64);
    std::iota(slots.begin(), slots.end(), 0);
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<ImageDetection> dets;
    for (std::size_t j = 0; j < k; ++j) {
      const int x = table.x1 + static_cast<int>(slots[j] % 8) * 100 + static_cast<int>(uniform(rng, 0, 20));
      const int y = table.y1 + static_cast<int>(slots[j] / 8) * 100 + static_cast<int>(uniform(rng, 0, 20));
      dets.push_back({Rect{x, y, x + static_cast<int>(uniform(rng, 30, 80)), y + static_cast<int>(uniform(rng, 30, 80))},
                      0.5 + 0.5 * static_cast<double>(uniform(rng, 0, 100)) / 100.0});
    }
    dets.push_back({Rect{0, 0, 50, 50}, 0.99});       // outside the table
    dets.push_back({Rect{400, 400, 450, 450}, 0.1});  // below min confidence
    PlannedMasks planned = plan_masks(table, dets, IdtpConfig{});
    if (planned.map.entries.size() != k) {
      o.fail("table " + std::to_string(t) + ": planned " + std::to_string(planned.map.entries.size()) + " of " + std::to_string(k));
      continue;
    }
    for (PlaceholderEntry& e : planned.map.entries) e.image_ref = "img/t" + std::to_string(t) + "_" + std::to_string(e.id) + ".png";
    const RestoreResult restored = restore_images(html, planned.map);
    const VerificationReport v = verify_restoration(restored.html, planned.map);
    if (restored.rewrites != k || restored.count_mismatch || !v.empty())
      o.fail("table " + std::to_string(t) + ": restore incomplete");
    total_rewrites += restored.rewrites;

    RgbImage pixels(table.width(), table.height());
    for (auto& byte : pixels.data) byte = static_cast<std::uint8_t>(uniform(rng, 0, 200));
    const RgbImage masked = apply_masks(pixels, planned.plan);
    std::size_t changed = 0, expected = 0;
    for (int y = 0; y < pixels.height; ++y)
      for (int x = 0; x < pixels.width; ++x) changed += pixels.at(x, y) != masked.at(x, y);
    for (const MaskEntry& m : planned.plan.masks) expected += static_cast<std::size_t>(m.rect.width()) * m.rect.height();
    if (changed != expected) o.fail("table " + std::to_string(t) + ": changed " + std::to_string(changed) + " pixels, masks cover " + std::to_string(expected));
  }
  if (o.ok) o.detail = "100 tables, " + std::to_string(total_rewrites) + " rewrites, masked pixel counts exact";
  return o;
}

// ---- 6

Outcome grpo_math() {
  Outcome o;
  Rng rng(6006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mean = 0.0, worst_std = 0.0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> r(uniform(rng, 2, 32));
    do {
      for (double& v : r) v = u(rng);
    } while (std::all_of(r.begin(), r.end(), [&](double v) { return v == r[0]; }));
    const std::vector<double> a = group_advantages(r, 0.0);
    const double n = static_cast<double>(a.size());
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / n;
    double var = 0.0;
    for (double v : a) var += (v - mean) * (v - mean);
    worst_mean = std::max(worst_mean, std::abs(mean));
    worst_std = std::max(worst_std, std::abs(std::sqrt(var / n) - 1.0));

    std::vector<double> dyadic(r.size());
    for (double& v : dyadic) v = static_cast<double>(uniform(rng, 0, 1024)) / 1024.0;
    if (std::all_of(dyadic.begin(), dyadic.end(), [&](double v) { return v == dyadic[0]; })) dyadic[0] += 0.5;
    const std::vector<double> base = group_advantages(dyadic, 0.0);
    std::vector<double> shifted = dyadic;
    const double c = static_cast<double>(static_cast<int>(uniform(rng, 0, 200)) - 100);
    for (double& v : shifted) v += c;
    if (group_advantages(shifted, 0.0) != base) o.fail("shift by " + std::to_string(c) + " changed advantages");
  }
  if (worst_mean >= 1e-9) o.fail("|mean| reached " + std::to_string(worst_mean));
  if (worst_std >= 1e-9) o.fail("|std - 1| reached " + std::to_string(worst_std));
  if (o.ok) {
    std::ostringstream s;
    s << "1000 groups, max |mean| " << worst_mean << ", max |std-1| " << worst_std;
    o.detail = s.str();
  }
  return o;
}

// ---- 7

Outcome layout_validation() {
  Outcome o;
  const nlohmann::json expected = nlohmann::json::parse(testsupport::slurp(testsupport::data_path("layout/invalid/expected.json")));
  std::size_t rejected = 0;
  for (const auto& [file, kind] : expected.items()) {
    try {
      parse_layout(testsupport::slurp(testsupport::data_path("layout/invalid/" + file)), testsupport::kPageWidth,
                   testsupport::kPageHeight);
      o.fail(file + " was accepted");
    } catch (const LayoutError& e) {
      if (!e.has(*error_code_from_string(kind.get<std::string>())))
        o.fail(file + ": expected " + kind.get<std::string>() + ", got " + std::string(to_string(e.code())));
      else
        ++rejected;
    }
  }
  std::vector<std::string> valid = {"layout/valid/two_column.json", "layout/valid/rotated_table.json", "layout/valid/empty.json"};
  for (const char* doc : {"split_table", "image_table"})
    for (int p = 1; p <= 2; ++p) valid.push_back("golden/" + std::string(doc) + "/p" + std::to_string(p) + ".layout.json");
  for (const std::string& f : valid) {
    try {
      const LayoutPage page = parse_layout(testsupport::slurp(testsupport::data_path(f)), testsupport::kPageWidth,
                                           testsupport::kPageHeight);
      const LayoutPage again = parse_layout(serialize_layout(page), testsupport::kPageWidth, testsupport::kPageHeight);
      if (again.elements != page.elements || serialize_layout(again) != serialize_layout(page))
        o.fail(f + " does not round-trip");
    } catch (const Error& e) {
      o.fail(f + " rejected: " + e.what());
    }
  }
  if (o.ok) o.detail = std::to_string(rejected) + " violation fixtures rejected, " + std::to_string(valid.size()) + " valid fixtures round-trip";
  return o;
}

// ---- 8

Outcome golden_pipeline(Clock::time_point suite_start) {
  Outcome o;
  for (const std::string doc : {"split_table", "image_table"}) {
    const auto pages = testsupport::load_document(testsupport::data_path("golden/" + doc));
    const std::string want = testsupport::slurp(testsupport::data_path("golden/" + doc + "/expected.md"));
    const PipelineResult r = pipeline_run(pages, Config{});
    if (r.document + "\n" != want) o.fail(doc + " differs from its golden Markdown");
  }
  const double elapsed = seconds_since(suite_start);
  if (elapsed >= 120.0) o.fail("suite took " + std::to_string(elapsed) + " s");
  if (o.ok) {
    std::ostringstream s;
    s << "2 documents byte-identical, suite " << elapsed << " s";
    o.detail = s.str();
  }
  return o;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"TED oracle equivalence", ted_oracle},
      {"metric identities", metric_identities},
      {"merge round trips", merge_round_trips},
      {"capability matrix", capability_matrix},
      {"image placeholder round trip", idtp_round_trip},
      {"group advantage math", grpo_math},
      {"layout validation", layout_validation},
      {"golden pipeline", [start] { return golden_pipeline(start); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.fail(std::string("exception: ") + e.what());
    }
    failures += !o.ok;
    std::printf("%s [%zu] %s: %s\n", o.ok ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
