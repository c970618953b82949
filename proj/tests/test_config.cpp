#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <map>

#include "docparse/config.hpp"

using namespace docparse;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST(Config, Defaults) {
  const Config c;
  EXPECT_EQ(c.near_threshold, 0.8);
  EXPECT_EQ(c.continuation_threshold, 0.5);
  EXPECT_EQ(c.min_confidence, 0.3);
  EXPECT_EQ(c.w_rule, 0.5);
  EXPECT_EQ(c.eps, 1e-6);
  EXPECT_FALSE(c.include_headers_footers);
  EXPECT_EQ(c.idtp().fill, (Rgb{211, 211, 211}));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, ParseDocument) {
  const Config c = parse_config(R"(
# merge settings
[merge]
near_threshold = 0.9   # trailing comment
continuation_threshold=0.25
include_headers_footers = yes
continuation_scorer = "exec:python3 -c 'print(1)' # not a comment"
fill_color = '200,10,0'
)");
  EXPECT_EQ(c.near_threshold, 0.9);
  EXPECT_EQ(c.continuation_threshold, 0.25);
  EXPECT_TRUE(c.include_headers_footers);
  EXPECT_EQ(c.continuation_scorer, "exec:python3 -c 'print(1)' # not a comment");
  EXPECT_EQ(c.idtp().fill, (Rgb{200, 10, 0}));
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { parse_config("bogus = 1"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("near_threshold = high"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("near_threshold"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("include_headers_footers = maybe"); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("near_threshold = 1.5").validate(); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("rule_weight_well_formed = 0.5").validate(); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("placeholder_mode = loose").validate(); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { parse_config("fill_color = \"#12\"").validate(); }), ErrorCode::ConfigError);
  EXPECT_EQ(code_of([] { load_config_file("/nonexistent/docparse.toml"); }), ErrorCode::IoError);
}

TEST(Config, RoundTrip) {
  Config c;
  c.near_threshold = 0.1 + 0.2;
  c.eps = 1e-12;
  c.include_headers_footers = true;
  c.placeholder_mode = "strict";
  c.continuation_scorer = "exec:say \"hi\" \\ there";
  c.image_ref_template = "figs/{page}-{id}.ppm";
  c.rule_weight_well_formed = 0.4;
  c.rule_weight_non_empty = 0.1;
  EXPECT_EQ(parse_config(write_config(c)), c);
  EXPECT_EQ(parse_config(write_config(Config{})), Config{});
}

TEST(Config, Precedence) {
  const std::string path = ::testing::TempDir() + "docparse_precedence.toml";
  {
    std::ofstream out(path);
    out << "near_threshold = 0.6\nw_rule = 0.7\nmin_confidence = 0.4\n";
  }
  const std::map<std::string, std::string> env = {{"DOCPARSE_W_RULE", "0.9"}, {"DOCPARSE_MIN_CONFIDENCE", "0.45"}};
  Config c = load_config_file(path);
  c = apply_env_overrides(c, [&](const char* name) -> const char* {
    const auto it = env.find(name);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  set_config_value(c, "min_confidence", "0.5");
  EXPECT_EQ(c.near_threshold, 0.6);
  EXPECT_EQ(c.w_rule, 0.9);
  EXPECT_EQ(c.min_confidence, 0.5);
  EXPECT_EQ(c.continuation_threshold, 0.5);
  std::remove(path.c_str());
}
