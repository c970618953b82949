#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "docparse/image.hpp"
#include "json.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliRun {
  int rc = -1;
  std::string out;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(::testing::TempDir()) / "docparse_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliRun run(const std::string& args, const std::string& env = "") {
  const fs::path tmp = fs::path(::testing::TempDir()) / "docparse_cli";
  fs::create_directories(tmp);
  const std::string out = (tmp / "stdout").string(), err = (tmp / "stderr").string();
  const std::string cmd = env + " '" + std::string(DOCPARSE_CLI) + "' " + args + " >" + out + " 2>" + err;
  const int status = std::system(cmd.c_str());
  CliRun r;
  r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = testsupport::slurp(out);
  r.err = testsupport::slurp(err);
  return r;
}

std::string data(const std::string& rel) { return "'" + testsupport::data_path(rel) + "'"; }

std::string golden_args(const std::string& doc) {
  std::string args = "assemble --page-size 1000x1400";
  for (int p = 1; p <= 2; ++p)
    args += " --layout " + data("golden/" + doc + "/p" + std::to_string(p) + ".layout.json") + " --fixture " +
            data("golden/" + doc + "/p" + std::to_string(p) + ".fixture.json");
  return args + " --detections-dir " + data("golden/" + doc);
}

}  // namespace

TEST(Cli, AssembleGoldenIsByteIdentical) {
  for (const std::string doc : {"split_table", "image_table"}) {
    const fs::path dir = scratch("golden_" + doc);
    const CliRun r = run(golden_args(doc) + " -o '" + (dir / "out.md").string() + "'");
    ASSERT_EQ(r.rc, 0) << r.err;
    EXPECT_EQ(testsupport::slurp(dir / "out.md"), testsupport::slurp(testsupport::data_path("golden/" + doc + "/expected.md")));
    const json report = json::parse(testsupport::slurp(dir / "out.md.report.json"));
    EXPECT_TRUE(report.contains("merges"));
    EXPECT_TRUE(report.contains("crops"));
  }
}

TEST(Cli, AssembleToStdout) {
  const CliRun r = run(golden_args("split_table"));
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(r.out, testsupport::slurp(testsupport::data_path("golden/split_table/expected.md")));
  EXPECT_NE(r.err.find("1-based"), std::string::npos);
}

TEST(Cli, AssembleExitCodes) {
  const CliRun geometry = run("assemble --page-size 100x100 --layout " + data("cli/bad_layout.json") + " --fixture " +
                           data("cli/empty_fixture.json"));
  EXPECT_EQ(geometry.rc, 1);
  EXPECT_EQ(json::parse(geometry.err)["error"], "GeometryError");

  const CliRun missing = run("assemble --page-size 100x100 --layout /nonexistent.json --fixture " +
                          data("cli/empty_fixture.json"));
  EXPECT_EQ(missing.rc, 2);
  EXPECT_EQ(json::parse(missing.err)["error"], "IoError");

  const CliRun syntax = run("assemble --page-size 100x100 --layout " + data("cli/reward_gt.html") + " --fixture " +
                         data("cli/empty_fixture.json"));
  EXPECT_EQ(syntax.rc, 2);

  EXPECT_EQ(run("assemble --page-size 100 --layout a --fixture b").rc, 2);
  EXPECT_EQ(run("frobnicate").rc, 2);
}

TEST(Cli, ConfigErrorsAreDomainErrors) {
  const CliRun r = run(golden_args("split_table") + " --set near_threshold=3");
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(json::parse(r.err)["error"], "ConfigError");
  const CliRun env = run(golden_args("split_table"), "DOCPARSE_MIN_CONFIDENCE=-1");
  EXPECT_EQ(env.rc, 1);
}

TEST(Cli, MergeRepeatedHeader) {
  const fs::path dir = scratch("merge");
  const CliRun r = run("merge " + data("capability/cross_page_rp_hdr/a.html") + " " +
                    data("capability/cross_page_rp_hdr/b.html") + " --out-prefix '" + (dir / "table_").string() + "'");
  ASSERT_EQ(r.rc, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["plans"].size(), 1u);
  EXPECT_EQ(j["plans"][0]["pattern"], "Pattern1");
  ASSERT_EQ(j["outputs"].size(), 1u);
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}), 1);
  EXPECT_EQ(testsupport::slurp(dir / "table_0.html"),
            testsupport::slurp(testsupport::data_path("capability/cross_page_rp_hdr/expected.html")));
}

TEST(Cli, MergeRejectsNonTable) {
  const CliRun r = run("merge " + data("cli/empty_fixture.json"));
  EXPECT_EQ(r.rc, 1);
  EXPECT_EQ(json::parse(r.err)["error"], "NoTableFound");
}

TEST(Cli, EvalIdenticalTables) {
  const fs::path dir = scratch("eval");
  const CliRun r = run("eval " + data("cli/eval_identical.json") + " -j 3 --text-report '" + (dir / "report.tsv").string() + "'");
  ASSERT_EQ(r.rc, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["rows"].size(), 3u);
  EXPECT_EQ(j["rows"][0]["id"], "simple");
  EXPECT_EQ(j["rows"][2]["id"], "header");
  for (const json& row : j["rows"]) {
    EXPECT_EQ(row["teds"], 1.0);
    EXPECT_EQ(row["teds_s"], 1.0);
  }
  EXPECT_EQ(j["mean"]["teds"], 1.0);
  const std::string text = testsupport::slurp(dir / "report.tsv");
  EXPECT_NE(text.find("spans\t1.0000\t1.0000\t-"), std::string::npos) << text;
}

TEST(Cli, RewardGroup) {
  const CliRun r = run("reward " + data("cli/reward_candidates.json") + " --gt " + data("cli/reward_gt.html"));
  ASSERT_EQ(r.rc, 0) << r.err;
  const json j = json::parse(r.out);
  ASSERT_EQ(j["candidates"].size(), 3u);
  EXPECT_EQ(j["candidates"][0]["reward"], 1.0);
  EXPECT_GT(j["candidates"][0]["advantage"].get<double>(), 0.0);
  EXPECT_EQ(j["candidates"][2]["model_score"], 0.0);
  EXPECT_LT(j["candidates"][2]["advantage"].get<double>(), 0.0);
  double sum = 0.0;
  for (const json& c : j["candidates"]) sum += c["advantage"].get<double>();
  EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(Cli, PairsAreDeterministic) {
  const fs::path dir = scratch("pairs");
  const CliRun a = run("pairs " + data("capability/cross_page_split") + " --seeds 0-2 -o '" + (dir / "a.jsonl").string() + "'");
  ASSERT_EQ(a.rc, 0) << a.err;
  const CliRun b = run("pairs " + data("capability/cross_page_split") + " --seeds 0-2 -o '" + (dir / "b.jsonl").string() + "'");
  ASSERT_EQ(b.rc, 0) << b.err;
  const std::string lines = testsupport::slurp(dir / "a.jsonl");
  EXPECT_EQ(lines, testsupport::slurp(dir / "b.jsonl"));
  const json summary = json::parse(a.out);
  EXPECT_EQ(summary["files"], 3);
  EXPECT_EQ(static_cast<std::size_t>(std::count(lines.begin(), lines.end(), '\n')), summary["pairs"].get<std::size_t>());
  EXPECT_EQ(summary["pairs"].get<std::size_t>() + summary["inapplicable"].get<std::size_t>(), 3u * 6u * 3u);
  EXPECT_EQ(run("pairs " + data("capability") + " --seeds x -o '" + (dir / "c.jsonl").string() + "'").rc, 2);
}

TEST(Cli, MaskThenRestore) {
  const fs::path dir = scratch("mask");
  docparse::RgbImage page(60, 40, docparse::Rgb{255, 255, 255});
  for (int y = 12; y < 18; ++y)
    for (int x = 22; x < 30; ++x) page.set(x, y, docparse::Rgb{200, 0, 0});
  docparse::write_ppm_file((dir / "page.ppm").string(), page);
  {
    std::ofstream d(dir / "dets.json");
    d << R"([{"bbox":[22,12,30,18],"confidence":0.9},{"bbox":[0,0,4,4],"confidence":0.9}])";
    std::ofstream h(dir / "table.html");
    h << R"(<table><tr><td>Logo</td><td><img src="placeholder://0"></td></tr></table>)";
  }
  const std::string prefix = (dir / "t_").string();
  const CliRun m = run("mask --image '" + (dir / "page.ppm").string() + "' --table-bbox 10 10 50 30 --detections '" +
                    (dir / "dets.json").string() + "' --out-prefix '" + prefix + "'");
  ASSERT_EQ(m.rc, 0) << m.err;
  EXPECT_EQ(json::parse(m.out)["placeholders"], 1);
  const docparse::RgbImage masked = docparse::read_ppm_file(prefix + "masked.ppm");
  EXPECT_EQ(masked.width, 40);
  EXPECT_EQ(masked.at(12, 2), (docparse::Rgb{211, 211, 211}));
  EXPECT_EQ(masked.at(0, 0), (docparse::Rgb{255, 255, 255}));
  const docparse::RgbImage piece = docparse::read_ppm_file(prefix + "img_0.ppm");
  EXPECT_EQ(piece.width, 8);
  EXPECT_EQ(piece.at(0, 0), (docparse::Rgb{200, 0, 0}));

  const CliRun r = run("restore --html '" + (dir / "table.html").string() + "' --map '" + prefix + "map.json' -o '" +
                    (dir / "restored.html").string() + "'");
  ASSERT_EQ(r.rc, 0) << r.err;
  EXPECT_EQ(testsupport::slurp(dir / "restored.html"),
            "<table><tr><td>Logo</td><td><img src=\"" + prefix + "img_0.ppm\"></td></tr></table>\n");
  const json rep = json::parse(r.out);
  EXPECT_EQ(rep["rewrites"], 1);
  EXPECT_TRUE(rep["verification"]["ok"].get<bool>());

  const CliRun strict = run("--set placeholder_mode=strict restore --html '" + (dir / "table.html").string() +
                         "' --map '" + prefix + "map.json'");
  EXPECT_EQ(strict.rc, 0) << strict.err;
}
