#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "corpus.hpp"
#include "fixtures.hpp"
#include "multisql/data_synth.hpp"
#include "multisql/error.hpp"
#include "multisql/selection.hpp"

namespace multisql {
namespace {

using testkit::TempDir;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(Apportion, LargestRemainderExamples) {
  EXPECT_EQ(apportion(100, {}), (std::vector<std::size_t>{40, 20, 20, 20}));
  // 7 * (.4,.2,.2,.2) = 2.8, 1.4, 1.4, 1.4: floors 5, then the .8 and the first .4.
  EXPECT_EQ(apportion(7, {}), (std::vector<std::size_t>{3, 2, 1, 1}));
  EXPECT_EQ(apportion(0, {}), (std::vector<std::size_t>{0, 0, 0, 0}));
}

TEST(Apportion, SumsToNAndStaysWithinOneOfExact) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const TaskMix mix{w(rng), w(rng), w(rng), w(rng)};
    const std::size_t n = static_cast<std::size_t>(trial);
    const auto counts = apportion(n, mix);
    const double total = mix.text2sql + mix.question_inference + mix.evidence_inference + mix.self_refine;
    const double weights[] = {mix.text2sql, mix.question_inference, mix.evidence_inference, mix.self_refine};
    std::size_t sum = 0;
    for (int i = 0; i < 4; ++i) {
      sum += counts[i];
      EXPECT_LT(std::abs(static_cast<double>(counts[i]) - n * weights[i] / total), 1.0);
    }
    EXPECT_EQ(sum, n);
  }
}

TEST(Mutation, AggregateSwapExample) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = mutate_sql("SELECT COUNT(x) FROM t", seed);
    EXPECT_EQ(m.sql, "SELECT SUM(x) FROM t");
    EXPECT_EQ(m.kind, MutationKind::kAggregateSwap);
  }
  EXPECT_EQ(mutate_sql("SELECT MIN(x) FROM t", 3).sql, "SELECT MAX(x) FROM t");
}

TEST(Mutation, DeterministicPerSeed) {
  const std::string gold =
      "SELECT DISTINCT u.name FROM users u JOIN orders o ON o.user_id = u.id WHERE o.amount > 20 AND u.id < 4";
  std::set<std::string> outputs;
  for (std::uint64_t seed = 0; seed < 64; ++seed) {
    const auto a = mutate_sql(gold, seed);
    EXPECT_EQ(a.sql, mutate_sql(gold, seed).sql);
    EXPECT_NE(a.sql, gold);
    outputs.insert(a.sql);
  }
  EXPECT_GE(outputs.size(), 4u);
}

TEST(Mutation, CatalogueOfRewrites) {
  EXPECT_EQ(mutate_sql("SELECT DISTINCT city FROM users", 1).sql, "SELECT city FROM users");

  // Only the WHERE literal and the join predicate are sites here.
  const std::string join = "SELECT a FROM x JOIN y ON x.id = y.id WHERE b = 2";
  const std::set<std::string> allowed{"SELECT a FROM x JOIN y WHERE b = 2", "SELECT a FROM x JOIN y ON x.id = y.id WHERE b = 1",
                                      "SELECT a FROM x JOIN y ON x.id = y.id WHERE b = 3"};
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 64; ++seed) seen.insert(mutate_sql(join, seed).sql);
  EXPECT_EQ(seen, allowed);

  TempDir dir;
  const auto doc = introspect(testkit::store_db(dir));
  std::set<std::string> swaps;
  for (std::uint64_t seed = 0; seed < 64; ++seed) swaps.insert(mutate_sql("SELECT name FROM users", seed, &doc).sql);
  EXPECT_EQ(swaps, (std::set<std::string>{"SELECT id FROM users", "SELECT city FROM users",
                                          "SELECT signup_date FROM users"}));
}

TEST(Mutation, NothingToMutate) {
  EXPECT_EQ(code_of([] { mutate_sql("SELECT 1", 0); }), ErrorCode::kNoApplicableMutation);
  EXPECT_EQ(code_of([] { mutate_sql("SELECT name FROM users", 0); }), ErrorCode::kNoApplicableMutation);
  EXPECT_EQ(code_of([] { mutate_sql("SELECT 1; SELECT 2", 0); }), ErrorCode::kInvalidArgument);
}

class StoreSynth : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = testkit::store_db(dir_);
    catalog_.add("store", db_);
  }

  TempDir dir_;
  std::filesystem::path db_;
  DatabaseCatalog catalog_;
  PromptLibrary prompts_;
};

TEST_F(StoreSynth, MultitaskHonoursTheMix) {
  const auto items = testkit::store_items(100);
  SynthStats stats;
  MultitaskOptions options;
  options.seed = 11;
  const auto samples = synth_multitask(items, catalog_, prompts_, options, stats);
  EXPECT_EQ(stats.gold_failures, 0u);
  EXPECT_EQ(stats.reassigned, 0u);
  // Self-refine skips are the only allowed loss.
  EXPECT_EQ(stats.emitted["text2sql"], 40u);
  EXPECT_EQ(stats.emitted["question_inference"], 20u);
  EXPECT_EQ(stats.emitted["evidence_inference"], 20u);
  EXPECT_EQ(stats.emitted["self_refine"] + stats.mutation_skips, 20u);
  EXPECT_GE(stats.emitted["self_refine"], 15u);

  // Output follows input order.
  std::int64_t last = -1;
  for (const auto& s : samples) {
    const auto id = s.meta.at("question_id").get<std::int64_t>();
    EXPECT_GT(id, last);
    last = id;
    EXPECT_FALSE(s.prompt.empty());
    EXPECT_FALSE(s.target.empty());
  }
}

TEST_F(StoreSynth, MultitaskTargetsAndConstructionRules) {
  const auto items = testkit::store_items(100);
  SynthStats stats;
  MultitaskOptions options;
  options.seed = 3;
  const auto samples = synth_multitask(items, catalog_, prompts_, options, stats);
  for (const auto& s : samples) {
    const auto& item = items.at(s.meta.at("question_id").get<std::size_t>());
    switch (s.task) {
      case TrainingTask::kText2Sql:
        EXPECT_EQ(s.target, item.gold_sql);
        EXPECT_TRUE(execute(s.target, db_).ok());
        EXPECT_NE(s.prompt.find(item.question), std::string::npos);
        break;
      case TrainingTask::kQuestionInference:
        EXPECT_EQ(s.target, item.question);
        EXPECT_NE(s.prompt.find(item.gold_sql), std::string::npos);
        break;
      case TrainingTask::kEvidenceInference: {
        EXPECT_EQ(s.target, item.evidence);
        const auto pool = s.meta.at("evidence_pool").get<std::vector<std::string>>();
        EXPECT_EQ(pool.size(), options.evidence_distractors + 1);
        EXPECT_EQ(std::count(pool.begin(), pool.end(), item.evidence), 1);
        EXPECT_EQ(pool.at(s.meta.at("gold_position").get<std::size_t>()), item.evidence);
        for (std::size_t i = 0; i < pool.size(); ++i) {
          EXPECT_NE(s.prompt.find(std::to_string(i + 1) + ". " + pool[i]), std::string::npos);
        }
        break;
      }
      case TrainingTask::kSelfRefine: {
        EXPECT_EQ(s.target, item.gold_sql);
        const auto mutated = s.meta.at("mutated_sql").get<std::string>();
        EXPECT_NE(mutated, item.gold_sql);
        // Independent check: the mutated query really answers differently.
        const auto gold = execute(item.gold_sql, db_);
        const auto bad = execute(mutated, db_);
        EXPECT_FALSE(equivalent(gold, bad));
        EXPECT_EQ(s.meta.at("mutated_status").get<std::string>(), exec_status_name(bad.status));
        EXPECT_NE(s.prompt.find(mutated), std::string::npos);
        break;
      }
      case TrainingTask::kSelection: ADD_FAILURE(); break;
    }
  }
}

TEST_F(StoreSynth, MultitaskIsDeterministicAndSkipsBrokenGold) {
  auto items = testkit::store_items(30);
  items[4].gold_sql = "SELECT nope FROM users";
  auto dump = [&](std::uint64_t seed) {
    SynthStats stats;
    MultitaskOptions options;
    options.seed = seed;
    std::vector<nlohmann::json> out;
    for (const auto& s : synth_multitask(items, catalog_, prompts_, options, stats)) out.push_back(s.to_json());
    EXPECT_EQ(stats.gold_failures, 1u);
    return out;
  };
  const auto a = dump(5);
  EXPECT_EQ(a, dump(5));
  EXPECT_NE(a, dump(6));
  for (const auto& j : a) EXPECT_NE(j.at("meta").at("question_id"), 4);
}

TEST_F(StoreSynth, EvidenceShortfallGoesToText2Sql) {
  auto items = testkit::store_items(20);
  for (auto& item : items) item.evidence.clear();
  SynthStats stats;
  const auto samples = synth_multitask(items, catalog_, prompts_, {}, stats);
  EXPECT_EQ(stats.reassigned, 4u);
  EXPECT_EQ(stats.emitted["evidence_inference"], 0u);
  EXPECT_EQ(stats.emitted["text2sql"], 12u);
}

TEST_F(StoreSynth, SelectionIsBalancedAndDeformalized) {
  const auto items = testkit::store_items(500);
  SynthStats stats;
  BalancePolicy policy;
  policy.seed = 9;
  const auto samples =
      synth_selection(items, catalog_, testkit::store_selection_source(db_), prompts_, policy, stats);
  ASSERT_EQ(samples.size(), 500u);
  const auto report = balance_report(samples);

  // Recount positions straight from the meta records.
  std::vector<std::size_t> positions(5, 0);
  for (const auto& s : samples) {
    const auto pos = s.meta.at("correct_position").get<std::size_t>();
    ++positions.at(pos);
    EXPECT_EQ(s.target, std::to_string(pos + 1));
    const auto cands = s.meta.at("candidates").get<std::vector<std::string>>();
    ASSERT_EQ(cands.size(), 5u);
    for (const auto& c : cands) EXPECT_EQ(deformalize(c), c);
    const auto& item = items.at(s.meta.at("question_id").get<std::size_t>());
    EXPECT_EQ(cands[pos], deformalize(item.gold_sql));
    EXPECT_NE(s.prompt.find("Candidate 5:\n"), std::string::npos);
  }
  for (std::size_t c : positions) EXPECT_LE(std::abs(static_cast<double>(c) - 100.0), 5.0);
  EXPECT_EQ(report.positions.at(5), positions);
  EXPECT_LE(report.max_position_deviation, policy.tolerance);
  EXPECT_LE(report.max_generator_deviation, policy.tolerance);
  EXPECT_TRUE(report.within(policy.tolerance));
}

TEST_F(StoreSynth, VaryingNegativesBalancesCombinations) {
  const auto items = testkit::store_items(400);
  SynthStats stats;
  BalancePolicy policy;
  policy.vary_negatives = true;
  const auto samples =
      synth_selection(items, catalog_, testkit::store_selection_source(db_), prompts_, policy, stats);
  const auto report = balance_report(samples);
  EXPECT_EQ(report.negatives.size(), 4u);
  EXPECT_LE(report.max_combination_deviation, 0.05);
  EXPECT_LE(report.max_position_deviation, 0.10);
}

TEST_F(StoreSynth, SelectionSkipsWithoutCorrectCandidate) {
  const auto items = testkit::store_items(10);
  SynthStats stats;
  CandidateSource all_wrong = [&](const BenchItem& item) {
    std::vector<CandidateSql> out;
    for (int n = 0; n < 5; ++n) {
      const std::string sql = "SELECT " + std::to_string(1000 + item.question_id * 10 + n);
      out.push_back(testkit::candidate(sql, "SQLG_1", execute(sql, db_)));
    }
    return out;
  };
  EXPECT_TRUE(synth_selection(items, catalog_, all_wrong, prompts_, {}, stats).empty());
  EXPECT_EQ(stats.no_correct_candidate, 10u);
}

TEST_F(StoreSynth, MutationsTopUpMissingNegatives) {
  const auto items = testkit::store_items(10);
  CandidateSource only_gold = [&](const BenchItem& item) {
    return std::vector<CandidateSql>{testkit::candidate(item.gold_sql, "SQLG_1", execute(item.gold_sql, db_))};
  };
  SynthStats with;
  BalancePolicy policy;
  policy.list_size = 2;
  const auto samples = synth_selection(items, catalog_, only_gold, prompts_, policy, with);
  EXPECT_EQ(samples.size() + with.insufficient_negatives, 10u);
  EXPECT_GE(samples.size(), 8u);
  for (const auto& s : samples) {
    const auto gens = s.meta.at("generators").get<std::vector<std::string>>();
    EXPECT_EQ(std::count(gens.begin(), gens.end(), "mutation"), 1);
  }
  SynthStats without;
  policy.augment_with_mutations = false;
  EXPECT_TRUE(synth_selection(items, catalog_, only_gold, prompts_, policy, without).empty());
  EXPECT_EQ(without.insufficient_negatives, 10u);
}

TEST_F(StoreSynth, ReformatGateAcceptsEquivalentCte) {
  const std::string gold =
      "SELECT u.name FROM users u JOIN orders o ON o.user_id = u.id WHERE o.amount > 100";
  const std::string cte =
      "WITH big AS (SELECT user_id FROM orders WHERE amount > 100) "
      "SELECT u.name FROM users u JOIN big ON big.user_id = u.id";
  auto mock = testkit::scripted({{std::string("using common table expressions or subqueries"), testkit::fenced(cte)},
                                 {std::string("in a standardized style"), "SELECT name FROM users"}});
  BackendRegistry reg;
  reg.bind("reformat", mock);
  const auto doc = catalog_.doc("store");
  SynthStats stats;
  const auto accepted = reformat_sql(gold, ReformatStyle::kComplexPattern, reg, prompts_, *doc, db_, stats);
  EXPECT_TRUE(accepted.accepted);
  EXPECT_EQ(accepted.sql, cte);
  EXPECT_TRUE(equivalent(execute(accepted.sql, db_), execute(gold, db_)));

  const auto rejected = reformat_sql(gold, ReformatStyle::kStandardized, reg, prompts_, *doc, db_, stats);
  EXPECT_FALSE(rejected.accepted);
  EXPECT_EQ(rejected.sql, gold);
  EXPECT_EQ(stats.reformat_accepted, 1u);
  EXPECT_EQ(stats.reformat_rejected, 1u);
  EXPECT_EQ(mock->requests().at(0).role_id, "reformat");
}

TEST_F(StoreSynth, ReformatCorpusHasOneSamplePerStyle) {
  const auto items = testkit::store_items(3);
  std::vector<MockEntry> script;
  for (const auto& item : items) {
    script.push_back({std::nullopt, item.gold_sql + " "});
    script.push_back({std::nullopt, "not sql at all"});
  }
  BackendRegistry reg;
  reg.bind("reformat", testkit::scripted(script));
  SynthStats stats;
  const auto samples = synth_reformat(items, catalog_, {ReformatStyle::kComplexPattern, ReformatStyle::kStandardized},
                                      reg, prompts_, stats);
  ASSERT_EQ(samples.size(), 6u);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(samples[i].task, TrainingTask::kText2Sql);
    EXPECT_EQ(samples[i].meta.at("accepted").get<bool>(), i % 2 == 0);
    EXPECT_EQ(samples[i].target, items[i / 2].gold_sql);
  }
  EXPECT_EQ(stats.reformat_rejected, 3u);

  BackendRegistry empty;
  EXPECT_EQ(code_of([&] {
              synth_reformat(items, catalog_, {ReformatStyle::kStandardized}, empty, prompts_, stats);
            }),
            ErrorCode::kUnboundRole);
  EXPECT_EQ(parse_reformat_style("complex"), ReformatStyle::kComplexPattern);
  EXPECT_EQ(code_of([] { parse_reformat_style("fancy"); }), ErrorCode::kConfigInvalid);
}

TEST(BalanceMath, RelativeDeviation) {
  EXPECT_DOUBLE_EQ(max_relative_deviation({200, 200, 200, 200, 200}), 0.0);
  EXPECT_DOUBLE_EQ(max_relative_deviation({210, 190, 200, 200, 200}), 0.05);
  EXPECT_DOUBLE_EQ(max_relative_deviation({}), 0.0);
}

TEST(TrainingRecords, JsonShape) {
  TrainingSample s;
  s.task = TrainingTask::kSelfRefine;
  s.prompt = "p";
  s.target = "t";
  s.meta["question_id"] = 3;
  const auto j = s.to_json();
  EXPECT_EQ(j.at("task"), "self_refine");
  EXPECT_EQ(j.at("prompt"), "p");
  EXPECT_EQ(j.at("target"), "t");
  EXPECT_EQ(j.at("meta").at("question_id"), 3);
}

}  // namespace
}  // namespace multisql
