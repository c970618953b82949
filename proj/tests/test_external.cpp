#include <gtest/gtest.h>

#include <thread>

#include "docparse/external.hpp"

using namespace docparse;

namespace {

// echoes 0.75 for requests whose tail ends without a period, else 0.25
const char* kScorerScript =
    "exec:python3 -u -c \""
    "import sys, json\n"
    "for line in sys.stdin:\n"
    "    req = json.loads(line)\n"
    "    tail = req.get('tail') or ['']\n"
    "    print(0.75 if not tail[-1].endswith('.') else 0.25, flush=True)\n"
    "\"";

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST(ParseScore, Validation) {
  EXPECT_EQ(detail::parse_score(" 0.5\n"), 0.5);
  EXPECT_EQ(detail::parse_score("1"), 1.0);
  EXPECT_EQ(code_of([] { detail::parse_score("nan"); }), ErrorCode::ScorerFailure);
  EXPECT_EQ(code_of([] { detail::parse_score("1.5"); }), ErrorCode::ScorerFailure);
  EXPECT_EQ(code_of([] { detail::parse_score("0.5 extra"); }), ErrorCode::ScorerFailure);
}

TEST(MakeChannel, RejectsUnknownScheme) {
  EXPECT_EQ(code_of([] { make_channel("ftp://host"); }), ErrorCode::ConfigError);
}

TEST(SubprocessChannel, PersistentProcessAnswersEachLine) {
  ExternalContinuationScorer scorer(make_channel(kScorerScript));
  EXPECT_EQ(scorer.score({"a", "open"}, {"b", "c"}, {0, 1}), 0.75);
  EXPECT_EQ(scorer.score({"a", "closed."}, {"b", "c"}, {0, 1}), 0.25);
  EXPECT_EQ(scorer.score({"x"}, {"y"}, {0}), 0.75);
}

TEST(SubprocessChannel, FailuresBecomeScorerFailure) {
  ExternalContinuationScorer garbage(make_channel("exec:while read l; do echo nope; done"));
  EXPECT_EQ(code_of([&] { garbage.score({"a"}, {"b"}, {0}); }), ErrorCode::ScorerFailure);
  ExternalContinuationScorer dead(make_channel("exec:true"));
  EXPECT_EQ(code_of([&] { dead.score({"a"}, {"b"}, {0}); }), ErrorCode::ScorerFailure);
  SubprocessChannel slow("sleep 5", std::chrono::milliseconds(100));
  EXPECT_EQ(code_of([&] { slow.exchange("{}"); }), ErrorCode::ScorerFailure);
}

TEST(SubprocessChannel, DrivesMergeDecisions) {
  ExternalContinuationScorer scorer(make_channel(kScorerScript));
  const TableGrid a = parse_grid("<table><tr><td>Alpha</td></tr></table>");
  const TableGrid b = parse_grid("<table><tr><td>Beta</td></tr></table>");
  const ContinuationDecision d = classify_continuation(a, b, &scorer, MergeConfig{});
  EXPECT_EQ(d.source, ScoreSource::ExternalScorer);
  EXPECT_TRUE(d.is_row_split);
}

TEST(HttpChannel, PostsRequestAndReadsFloat) {
  httplib::Server server;
  std::string seen;
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.body;
    res.set_content("0.625", "text/plain");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ExternalRewardScorer scorer(make_channel("http://127.0.0.1:" + std::to_string(port) + "/score"));
  EXPECT_EQ(scorer.score("orig", "<table></table>", "canon"), 0.625);
  const auto body = nlohmann::json::parse(seen);
  EXPECT_EQ(body["original_descriptor"], "orig");
  EXPECT_EQ(body["candidate_html"], "<table></table>");
  EXPECT_EQ(body["rendered_canonical"], "canon");

  ExternalRewardScorer missing(make_channel("http://127.0.0.1:" + std::to_string(port) + "/nowhere"));
  EXPECT_EQ(code_of([&] { missing.score("", "", ""); }), ErrorCode::ScorerFailure);
  server.stop();
  worker.join();
}
