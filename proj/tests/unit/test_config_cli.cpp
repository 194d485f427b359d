#include <gtest/gtest.h>

#include <cstdlib>
#include <sstream>

#include "cli.hpp"
#include "fixtures.hpp"
#include "multisql/config.hpp"
#include "multisql/error.hpp"
#include "multisql/jsonl.hpp"

namespace multisql {
namespace {

using nlohmann::json;
using testkit::TempDir;

json demo_config() { return json::parse(testkit::read_source("demo/config.json")); }

ErrorCode parse_code(const json& j) {
  try {
    PipelineConfig::parse(j, testkit::source_path("demo"));
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInvalidArgument;
}

TEST(Config, DemoConfigParses) {
  const auto cfg = PipelineConfig::load(testkit::source_path("demo/config.json"));
  ASSERT_EQ(cfg.generators.size(), 3u);
  EXPECT_EQ(cfg.generators[1].template_id, "text2sql_complex.v1");
  EXPECT_EQ(cfg.settings.schema_iterations, 2);
  EXPECT_EQ(cfg.settings.timeout_ms, 5000);
  EXPECT_EQ(cfg.seed, 7u);
  // Script paths resolve against the config's directory.
  EXPECT_EQ(cfg.backends.at("g1").script, testkit::source_path("demo") / "mock/generator1.jsonl");
  EXPECT_EQ(cfg.roles.at("selector"), "selector");
}

TEST(Config, RejectsBadFiles) {
  auto with = [](auto edit) {
    json j = demo_config();
    edit(j);
    return parse_code(j);
  };
  EXPECT_EQ(with([](json& j) { j["colour"] = "blue"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"][0]["backend"] = "nope"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"][0]["template"] = "missing.v1"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"][0]["template"] = "text2sql_icl.v1"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"][2]["rank"] = 5; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"][2]["id"] = "SQLG_1"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["generators"] = json::array(); }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["backends"]["g1"]["script"] = "mock/none.jsonl"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["backends"]["g1"]["type"] = "carrier-pigeon"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["backends"]["web"] = {{"type", "http"}, {"url", "http://x"}}; }),
            ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["roles"]["judge"] = "schema"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["execution"]["equivalence"] = "fuzzy"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["execution"]["timeout_ms"] = 0; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["schema_filter"]["iterations"] = 0; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["schema_filter"]["top_k_values"] = "five"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["selection"]["policy"] = "dice"; }), ErrorCode::kConfigInvalid);
  EXPECT_EQ(with([](json& j) { j["workers"] = 0; }), ErrorCode::kConfigInvalid);

  TempDir dir;
  write_text(dir / "broken.json", "{\"backends\": ");
  EXPECT_THROW(PipelineConfig::load(dir / "broken.json"), Error);
  EXPECT_THROW(PipelineConfig::load(dir / "absent.json"), Error);
}

TEST(Config, HttpBackendsAndEnvironmentLookup) {
  json j = demo_config();
  j["backends"]["web"] = {{"type", "http"}, {"url", "http://127.0.0.1:9/v1/chat/completions"}, {"model", "m"},
                          {"retries", 0}};
  j["generators"][0]["backend"] = "web";
  j["embedding"] = {{"type", "hashed"}, {"dimension", 64}};
  const auto cfg = PipelineConfig::parse(j, testkit::source_path("demo"));
  EXPECT_EQ(cfg.backends.at("web").endpoint.retries, 0);
  EXPECT_EQ(cfg.embedding.dimension, 64u);
  const auto rt = build_runtime(cfg);
  EXPECT_EQ(rt.backends->embedder().dimension(), 64u);
  EXPECT_FALSE(rt.backends->shared_backend_for(generator_role("SQLG_1"))->is_scripted());

  ::setenv(kConfigEnvVar, "/tmp/from-env.json", 1);
  EXPECT_EQ(locate_config(std::nullopt), "/tmp/from-env.json");
  EXPECT_EQ(locate_config(std::string("flag.json")), "flag.json");
  ::unsetenv(kConfigEnvVar);
  EXPECT_THROW(locate_config(std::nullopt), Error);
}

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "multisql");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ::unsetenv(kConfigEnvVar);
    db_ = testkit::build_db(dir_ / "db" / "store" / "store.sqlite", testkit::read_source("demo/store.sql"));
    config_ = testkit::source_path("demo/config.json").string();
  }

  CliResult ask(const std::string& out_dir, std::vector<std::string> extra = {}) {
    std::vector<std::string> args{"ask", db_.string(), "-q", kQuestion, "--config", config_, "--out", out_dir};
    args.insert(args.end(), extra.begin(), extra.end());
    return cli_run(args);
  }

  static constexpr const char* kQuestion = "What is the total amount spent by each user living in Paris?";
  TempDir dir_;
  std::filesystem::path db_;
  std::string config_;
};

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli_run({}).code, cli::kUsage);
  EXPECT_EQ(cli_run({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(cli_run({"ask", db_.string()}).code, cli::kUsage);  // no question
  const auto missing = cli_run({"ask", db_.string(), "-q", "hi", "--out", (dir_ / "o").string()});
  EXPECT_EQ(missing.code, cli::kUsage);
  EXPECT_NE(missing.err.find(kConfigEnvVar), std::string::npos);
  EXPECT_EQ(cli_run({"synth", "d.json", "--db-root", ".", "--task", "painting"}).code, cli::kUsage);
  EXPECT_EQ(cli_run({"--help"}).code, cli::kOk);
}

TEST_F(CliTest, IntrospectPrintsTheRenderedSchema) {
  const auto r = cli_run({"introspect", db_.string(), "--out", (dir_ / "i").string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_EQ(r.out, render_schema(introspect(db_, Dialect::kSqlite, kDefaultSampleCap, "store")));
  EXPECT_EQ(read_text(dir_ / "i" / "schema.txt"), r.out);
  EXPECT_NE(r.out.find("【DB_ID】 store"), std::string::npos);
  EXPECT_EQ(cli_run({"introspect", (dir_ / "none.sqlite").string()}).code, cli::kPipelineFailure);
}

TEST_F(CliTest, AskIsReproducible) {
  const auto a = ask((dir_ / "a").string(), {"--execute"});
  const auto b = ask((dir_ / "b").string(), {"--execute"});
  ASSERT_EQ(a.code, cli::kOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(read_text(dir_ / "a" / "transcript.json"), read_text(dir_ / "b" / "transcript.json"));
  EXPECT_NE(a.out.find("Alice\t31"), std::string::npos);
  EXPECT_NE(a.out.find("Chloe\t203.24"), std::string::npos);
  const auto t = json::parse(read_text(dir_ / "a" / "transcript.json"));
  EXPECT_EQ(t["selection"]["branch"], "majority");
  EXPECT_EQ(t["candidates"].size(), 6u);
  EXPECT_FALSE(t["candidates"][0].contains("elapsed_ms"));
  // A different seed does not touch scripted answers.
  EXPECT_EQ(ask((dir_ / "c").string(), {"--seed", "99"}).out.substr(0, 20), a.out.substr(0, 20));
}

TEST_F(CliTest, ConfigFromEnvironment) {
  ::setenv(kConfigEnvVar, config_.c_str(), 1);
  const auto r = cli_run({"ask", db_.string(), "-q", kQuestion, "--out", (dir_ / "env").string()});
  ::unsetenv(kConfigEnvVar);
  EXPECT_EQ(r.code, cli::kOk) << r.err;
}

TEST_F(CliTest, LinkAndGenWriteTheirArtifacts) {
  const auto link = cli_run({"link", db_.string(), "-q", kQuestion, "--config", config_, "--out", (dir_ / "l").string()});
  ASSERT_EQ(link.code, cli::kOk) << link.err;
  const auto report = json::parse(read_text(dir_ / "l" / "link.json"));
  EXPECT_EQ(report, json::parse(link.out));

  const auto gen = cli_run({"gen", db_.string(), "-q", kQuestion, "--config", config_, "--out", (dir_ / "g").string()});
  ASSERT_EQ(gen.code, cli::kOk) << gen.err;
  EXPECT_EQ(read_jsonl(dir_ / "g" / "candidates.jsonl").size(), 6u);
  EXPECT_NE(gen.out.find("SQLG_3 S1 ok"), std::string::npos);
}

TEST_F(CliTest, EvalWritesReportAndItems) {
  const auto out = dir_ / "eval";
  const auto r = cli_run({"eval", testkit::source_path("demo/dataset.json").string(), "--db-root",
                          (dir_ / "db").string(), "--config", config_, "--out", out.string()});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto report = json::parse(read_text(out / "report.json"));
  EXPECT_EQ(report["items"], 3);
  EXPECT_DOUBLE_EQ(report["ex"].get<double>(), 1.0);
  EXPECT_EQ(read_jsonl(out / "items.jsonl").size(), 3u);
  EXPECT_EQ(read_text(out / "summary.txt"), r.out);
  EXPECT_NE(r.out.find("100.00%"), std::string::npos);
}

TEST_F(CliTest, SynthTasks) {
  const auto dataset = testkit::source_path("demo/dataset.json").string();
  const auto root = (dir_ / "db").string();
  const auto multi = cli_run({"synth", dataset, "--db-root", root, "--config", config_, "--task", "multitask", "--out",
                              (dir_ / "m").string()});
  ASSERT_EQ(multi.code, cli::kOk) << multi.err;
  EXPECT_EQ(read_jsonl(dir_ / "m" / "samples.jsonl").size() +
                json::parse(read_text(dir_ / "m" / "stats.json"))["mutation_skips"].get<std::size_t>(),
            3u);

  const auto sel = cli_run({"synth", dataset, "--db-root", root, "--config", config_, "--task", "selection",
                            "--list-size", "3", "--out", (dir_ / "s").string()});
  ASSERT_EQ(sel.code, cli::kOk) << sel.err;
  const auto samples = read_jsonl(dir_ / "s" / "samples.jsonl");
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) EXPECT_EQ(s["meta"]["list_size"], 3);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "s" / "balance.json"));

  // The demo config binds no reformat backend.
  const auto ref = cli_run({"synth", dataset, "--db-root", root, "--config", config_, "--task", "reformat", "--out",
                            (dir_ / "r").string()});
  EXPECT_EQ(ref.code, cli::kPipelineFailure);
  EXPECT_NE(ref.err.find("UnboundRole"), std::string::npos);
}

}  // namespace
}  // namespace multisql
