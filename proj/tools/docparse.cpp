#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "docparse/docparse.hpp"
#include "docparse/external.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace docparse;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> sets;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << content)) throw Error(ErrorCode::IoError, "cannot write " + path);
}

json read_json(const std::string& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::SyntaxError, path + ": " + e.what());
  }
}

Config load_config(const Globals& g) {
  Config cfg;
  if (!g.config_file.empty()) cfg = load_config_file(g.config_file);
  cfg = apply_env_overrides(cfg);
  for (const std::string& kv : g.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got \"" + kv + "\"");
    set_config_value(cfg, std::string(text::trim(kv.substr(0, eq))), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

std::unique_ptr<ContinuationScorer> continuation_scorer(const Config& cfg) {
  if (cfg.continuation_scorer.empty()) return nullptr;
  return std::make_unique<ExternalContinuationScorer>(make_channel(cfg.continuation_scorer));
}

std::unique_ptr<RewardScorer> reward_scorer(const Config& cfg) {
  if (cfg.reward_scorer.empty()) return std::make_unique<TedsRewardScorer>();
  return std::make_unique<ExternalRewardScorer>(make_channel(cfg.reward_scorer));
}

std::pair<int, int> parse_size(const std::string& s) {
  int w = 0, h = 0;
  char x = 0, tail = 0;
  std::istringstream in(s);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || (in >> tail) || w <= 0 || h <= 0)
    throw Error(ErrorCode::SchemaError, "page size must look like 1000x1400, got \"" + s + "\"");
  return {w, h};
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n"; }

/// Runs f(i) for i in [0, n) on up to `jobs` threads; results keep input order.
template <typename T, typename F>
std::vector<T> ordered_map(std::size_t n, unsigned jobs, F f) {
  std::vector<T> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n))); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---- assemble

struct AssembleArgs {
  std::vector<std::string> layouts;
  std::vector<std::string> fixtures;
  std::vector<std::string> sizes;
  std::string detections_dir;
  std::string format = "md";
  std::string out;
  std::string report;
};

int cmd_assemble(const Globals& g, const AssembleArgs& a) {
  const Config cfg = load_config(g);
  if (a.layouts.size() != a.fixtures.size())
    throw Error(ErrorCode::SchemaError, "every --layout needs a matching --fixture");
  if (a.sizes.size() != 1 && a.sizes.size() != a.layouts.size())
    throw Error(ErrorCode::SchemaError, "give one --page-size for all pages or one per page");
  std::vector<PageInput> pages;
  for (std::size_t p = 0; p < a.layouts.size(); ++p) {
    PageInput in;
    in.layout_json = read_file(a.layouts[p]);
    in.fixture_json = read_file(a.fixtures[p]);
    std::tie(in.width, in.height) = parse_size(a.sizes.size() == 1 ? a.sizes[0] : a.sizes[p]);
    if (!a.detections_dir.empty()) {
      const std::string prefix = "p" + std::to_string(p + 1) + "_e";
      for (const auto& entry : fs::directory_iterator(a.detections_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind(prefix, 0) != 0 || entry.path().extension() != ".json") continue;
        const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - 5);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) continue;
        in.detections[std::stoul(digits)] = detections_from_json(read_json(entry.path().string()));
      }
    }
    pages.push_back(std::move(in));
  }
  const auto scorer = continuation_scorer(cfg);
  const OutputFormat format = a.format == "html" ? OutputFormat::Html : OutputFormat::Markdown;
  const PipelineResult r = pipeline_run(pages, cfg, scorer.get(), format);

  const std::string doc = r.document.empty() ? "" : r.document + "\n";
  if (a.out.empty() || a.out == "-")
    std::cout << doc;
  else
    write_file(a.out, doc);

  json maps = json::array();
  for (const PlacedMap& m : r.placeholder_maps) {
    json j = to_json(m.map);
    j["page"] = m.page;
    j["index"] = m.index;
    maps.push_back(std::move(j));
  }
  const json report = {{"warnings", r.warnings},      {"merges", r.merge_report}, {"restores", r.restore_report},
                       {"placeholder_maps", maps},    {"crops", r.crops}};
  std::string report_path = a.report;
  if (report_path.empty() && !a.out.empty() && a.out != "-") report_path = a.out + ".report.json";
  if (!report_path.empty()) write_file(report_path, report.dump(2) + "\n");
  for (const std::string& w : r.warnings) std::cerr << json({{"warning", w}}).dump() << "\n";
  return 0;
}

// ---- merge

int cmd_merge(const Globals& g, const std::vector<std::string>& files, const std::string& out_prefix) {
  const Config cfg = load_config(g);
  std::vector<TableGrid> fragments;
  for (const std::string& f : files) fragments.push_back(parse_grid(read_file(f)));
  const auto scorer = continuation_scorer(cfg);
  const MergeSequenceResult r = merge_fragment_sequence_report(fragments, scorer.get(), cfg.merge());
  json outputs = json::array();
  for (std::size_t t = 0; t < r.tables.size(); ++t) {
    const std::string html = serialize_grid(r.tables[t]);
    if (out_prefix.empty()) {
      outputs.push_back(html);
    } else {
      const std::string path = out_prefix + std::to_string(t) + ".html";
      write_file(path, html + "\n");
      outputs.push_back(path);
    }
  }
  json plans = json::array();
  for (const MergePlan& p : r.plans) plans.push_back(to_json(p));
  print_json({{"plans", plans}, {"groups", r.groups}, {"outputs", outputs}});
  return 0;
}

// ---- mask / restore

int cmd_mask(const Globals& g, const std::string& image, const std::vector<int>& bbox, const std::string& detections,
             const std::string& out_prefix) {
  const Config cfg = load_config(g);
  if (bbox.size() != 4) throw Error(ErrorCode::SchemaError, "--table-bbox takes x1 y1 x2 y2");
  const Rect table{bbox[0], bbox[1], bbox[2], bbox[3]};
  const RgbImage page = read_ppm_file(image);
  if (!table.valid() || table.x1 < 0 || table.y1 < 0 || table.x2 > page.width || table.y2 > page.height)
    throw Error(ErrorCode::GeometryError, "table bbox outside the image");
  PlannedMasks planned = plan_masks(table, detections_from_json(read_json(detections)), cfg.idtp());
  const RgbImage table_pixels = crop(page, table);
  const std::vector<RgbImage> pieces = crop_placeholders(table_pixels, planned);
  for (PlaceholderEntry& e : planned.map.entries) {
    e.image_ref = out_prefix + "img_" + std::to_string(e.id) + ".ppm";
    write_ppm_file(e.image_ref, pieces[e.id]);
  }
  write_ppm_file(out_prefix + "masked.ppm", apply_masks(table_pixels, planned.plan));
  write_file(out_prefix + "map.json", to_json(planned.map).dump(2) + "\n");
  print_json({{"masked", out_prefix + "masked.ppm"}, {"map", out_prefix + "map.json"}, {"placeholders", planned.map.entries.size()}});
  return 0;
}

int cmd_restore(const Globals& g, const std::string& html, const std::string& map_file, const std::string& out) {
  const Config cfg = load_config(g);
  const PlaceholderMap map = placeholder_map_from_json(read_json(map_file));
  const RestoreResult r = restore_images(read_file(html), map, cfg.restore_mode());
  const VerificationReport v = verify_restoration(r.html, map);
  if (out.empty() || out == "-")
    std::cout << r.html << "\n";
  else
    write_file(out, r.html + "\n");
  json report = to_json(r);
  report.erase("html");
  report["verification"] = to_json(v);
  (out.empty() || out == "-" ? std::cerr : std::cout) << report.dump(2) << "\n";
  return 0;
}

// ---- eval

struct EvalRow {
  json row;
};

int cmd_eval(const Globals& g, const std::string& batch_file, bool want_teds, bool want_teds_s, unsigned jobs,
             const std::string& text_report) {
  load_config(g);
  const json batch = read_json(batch_file);
  if (!batch.is_array()) throw Error(ErrorCode::SchemaError, "batch must be a JSON array");
  const fs::path base = fs::path(batch_file).parent_path();
  const auto field = [&](const json& item, const char* key) -> std::string {
    if (item.contains(key) && item[key].is_string()) return item[key].get<std::string>();
    const std::string file_key = std::string(key) + "_file";
    if (item.contains(file_key) && item[file_key].is_string())
      return read_file((base / item[file_key].get<std::string>()).string());
    throw Error(ErrorCode::SchemaError, std::string("batch item lacks \"") + key + "\"");
  };
  if (!want_teds && !want_teds_s) want_teds = want_teds_s = true;

  const std::vector<EvalRow> rows = ordered_map<EvalRow>(batch.size(), jobs, [&](std::size_t i) {
    const json& item = batch[i];
    if (!item.is_object()) throw Error(ErrorCode::SchemaError, "batch item " + std::to_string(i) + " is not an object");
    json row = {{"id", item.value("id", json(i))}};
    const std::string kind = item.value("kind", "table");
    const std::string pred = field(item, "pred"), gt = field(item, "gt");
    if (kind == "text") {
      row["edit"] = normalized_edit_distance(pred, gt);
    } else if (kind == "table") {
      if (want_teds) row["teds"] = teds(pred, gt, false);
      if (want_teds_s) row["teds_s"] = teds(pred, gt, true);
    } else {
      throw Error(ErrorCode::SchemaError, "unknown item kind \"" + kind + "\"");
    }
    return EvalRow{row};
  });

  json out_rows = json::array();
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const EvalRow& r : rows) {
    for (const char* k : {"teds", "teds_s", "edit"})
      if (r.row.contains(k)) {
        sums[k].first += r.row[k].get<double>();
        ++sums[k].second;
      }
    out_rows.push_back(r.row);
  }
  json summary = json::object();
  for (const auto& [k, s] : sums) summary[k] = s.first / static_cast<double>(s.second);
  print_json({{"rows", out_rows}, {"mean", summary}, {"count", rows.size()}});

  if (!text_report.empty()) {
    std::ostringstream t;
    t << std::fixed << std::setprecision(4);
    t << "id\tteds\tteds_s\tedit\n";
    for (const EvalRow& r : rows) {
      const json& row = r.row;
      t << (row["id"].is_string() ? row["id"].get<std::string>() : row["id"].dump());
      for (const char* k : {"teds", "teds_s", "edit"}) {
        t << '\t';
        if (row.contains(k)) t << row[k].get<double>(); else t << '-';
      }
      t << '\n';
    }
    t << "mean";
    for (const char* k : {"teds", "teds_s", "edit"}) {
      t << '\t';
      if (summary.contains(k)) t << summary[k].get<double>(); else t << '-';
    }
    t << '\n';
    write_file(text_report, t.str());
  }
  return 0;
}

// ---- reward / pairs

int cmd_reward(const Globals& g, const std::string& candidates_file, const std::string& gt_file,
               std::size_t expected_placeholders) {
  const Config cfg = load_config(g);
  const json candidates = read_json(candidates_file);
  if (!candidates.is_array() || !std::all_of(candidates.begin(), candidates.end(), [](const json& c) { return c.is_string(); }))
    throw Error(ErrorCode::SchemaError, "candidates must be a JSON array of HTML strings");
  const std::string gt = read_file(gt_file);
  canonicalize_table(gt);  // fail early on an unusable reference
  const auto scorer = reward_scorer(cfg);
  json rows = json::array();
  std::vector<double> rewards;
  for (const json& c : candidates) {
    const std::string html = c.get<std::string>();
    const RuleReport rule = rule_checks(html, expected_placeholders, cfg.rule_weights());
    const double model = scorer->score(gt, html, render_canonical(html));
    const double reward = composite_reward(rule.score, model, cfg.w_rule);
    rewards.push_back(reward);
    rows.push_back({{"rules", to_json(rule)}, {"model_score", model}, {"reward", reward}});
  }
  json advantages = json::array();
  if (!rewards.empty())
    for (double a : group_advantages(rewards, cfg.eps)) advantages.push_back(a);
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i]["advantage"] = advantages[i];
  print_json({{"candidates", rows}});
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(spec);
  for (std::string part; std::getline(in, part, ',');) {
    const auto dash = part.find('-');
    try {
      if (dash == std::string::npos) {
        seeds.push_back(std::stoull(part));
      } else {
        const std::uint64_t lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
        for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::SchemaError, "bad seed list \"" + spec + "\"");
    }
  }
  return seeds;
}

int cmd_pairs(const Globals& g, const std::string& gt_dir, const std::string& seeds_spec, const std::string& out) {
  load_config(g);
  const std::vector<std::uint64_t> seeds = parse_seeds(seeds_spec);
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(gt_dir, ec))
    if (entry.path().extension() == ".html") files.push_back(entry.path());
  if (ec) throw Error(ErrorCode::IoError, "cannot list " + gt_dir);
  std::sort(files.begin(), files.end());
  std::ostringstream lines;
  std::size_t produced = 0, skipped = 0;
  for (const fs::path& f : files) {
    const std::string gt = read_file(f.string());
    for (Perturbation kind : kAllPerturbations)
      for (std::uint64_t seed : seeds) {
        try {
          json j = to_json(perturb_table(gt, kind, seed));
          j["source"] = f.filename().string();
          lines << j.dump() << "\n";
          ++produced;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::InapplicablePerturbation) throw;
          ++skipped;
        }
      }
  }
  write_file(out, lines.str());
  print_json({{"files", files.size()}, {"pairs", produced}, {"inapplicable", skipped}});
  return 0;
}

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::SyntaxError:
    case ErrorCode::SchemaError: return 2;
    default: return 1;
  }
}

void diagnose(const std::string& code, const std::string& message, const json& extra = json::object()) {
  json j = {{"error", code}, {"message", message}};
  j.update(extra);
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document parsing post-processing toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_file, "Config file (TOML subset)");
  app.add_option("--set", g.sets, "Override a config key: key=value (repeatable)")
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.fallthrough();

  AssembleArgs aa;
  auto* assemble = app.add_subcommand("assemble", "Assemble recognized pages into one document");
  assemble->add_option("--layout", aa.layouts, "Layout JSON, one per page")->required();
  assemble->add_option("--fixture", aa.fixtures, "Recognized content JSON, one per page")->required();
  assemble->add_option("--page-size", aa.sizes, "WxH, once or once per page")->required();
  assemble->add_option("--detections-dir", aa.detections_dir, "Directory of p<page>_e<index>.json image detections");
  assemble->add_option("--format", aa.format, "md or html")->check(CLI::IsMember({"md", "html"}));
  assemble->add_option("-o,--out", aa.out, "Output document (stdout when omitted)");
  assemble->add_option("--report", aa.report, "Sidecar report JSON (default <out>.report.json)");

  std::vector<std::string> merge_files;
  std::string merge_prefix;
  auto* merge = app.add_subcommand("merge", "Merge table fragments given in reading order");
  merge->add_option("fragments", merge_files, "Fragment HTML files")->required();
  merge->add_option("--out-prefix", merge_prefix, "Write merged tables to <prefix><n>.html");

  std::string mask_image, mask_dets, mask_prefix;
  std::vector<int> mask_bbox;
  auto* mask = app.add_subcommand("mask", "Mask embedded images inside a table region");
  mask->add_option("--image", mask_image, "Page image (binary PPM)")->required();
  mask->add_option("--table-bbox", mask_bbox, "x1 y1 x2 y2")->required()->expected(4);
  mask->add_option("--detections", mask_dets, "Detections JSON")->required();
  mask->add_option("--out-prefix", mask_prefix, "Prefix for masked.ppm, map.json and img_<id>.ppm")->required();

  std::string restore_html, restore_map, restore_out;
  auto* restore = app.add_subcommand("restore", "Put image references back into recognized table HTML");
  restore->add_option("--html", restore_html, "Recognized table HTML")->required();
  restore->add_option("--map", restore_map, "Placeholder map JSON")->required();
  restore->add_option("-o,--out", restore_out, "Output HTML (stdout when omitted)");

  std::string eval_batch, eval_text;
  bool eval_teds = false, eval_teds_s = false;
  unsigned eval_jobs = std::max(1u, std::thread::hardware_concurrency());
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("batch", eval_batch, "JSON array of {id, pred|pred_file, gt|gt_file, kind}")->required();
  eval->add_flag("--teds", eval_teds, "Content-aware TEDS");
  eval->add_flag("--teds-s", eval_teds_s, "Structure-only TEDS");
  eval->add_option("-j,--jobs", eval_jobs, "Worker threads")->check(CLI::PositiveNumber);
  eval->add_option("--text-report", eval_text, "Also write a tab-separated report");

  std::string reward_candidates, reward_gt;
  std::size_t reward_k = 0;
  auto* reward = app.add_subcommand("reward", "Score a group of candidate tables");
  reward->add_option("candidates", reward_candidates, "JSON array of candidate HTML strings")->required();
  reward->add_option("--gt", reward_gt, "Reference table HTML")->required();
  reward->add_option("--placeholders", reward_k, "Expected <img> count");

  std::string pairs_dir, pairs_seeds = "0", pairs_out;
  auto* pairs = app.add_subcommand("pairs", "Build positive/negative table pairs");
  pairs->add_option("gt_dir", pairs_dir, "Directory of reference .html tables")->required();
  pairs->add_option("--seeds", pairs_seeds, "Seed list such as 0-4,9");
  pairs->add_option("-o,--out", pairs_out, "Output JSON lines")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*assemble) return cmd_assemble(g, aa);
    if (*merge) return cmd_merge(g, merge_files, merge_prefix);
    if (*mask) return cmd_mask(g, mask_image, mask_bbox, mask_dets, mask_prefix);
    if (*restore) return cmd_restore(g, restore_html, restore_map, restore_out);
    if (*eval) return cmd_eval(g, eval_batch, eval_teds, eval_teds_s, eval_jobs, eval_text);
    if (*reward) return cmd_reward(g, reward_candidates, reward_gt, reward_k);
    if (*pairs) return cmd_pairs(g, pairs_dir, pairs_seeds, pairs_out);
  } catch (const LayoutError& e) {
    json vs = json::array();
    for (const LayoutViolation& v : e.violations()) {
      json j = {{"kind", to_string(v.code)}, {"message", v.message}};
      if (v.element) j["element"] = *v.element;
      vs.push_back(std::move(j));
    }
    diagnose(std::string(to_string(e.code())), e.what(), {{"violations", vs}});
    return exit_code_for(e.code());
  } catch (const Error& e) {
    diagnose(std::string(to_string(e.code())), e.what());
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    diagnose("IoError", e.what());
    return 2;
  } catch (const json::exception& e) {
    diagnose("SchemaError", e.what());
    return 2;
  }
  return 0;
}
