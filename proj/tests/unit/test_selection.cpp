#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "multisql/error.hpp"
#include "multisql/selection.hpp"
#include "reference.hpp"

namespace multisql {
namespace {

using testkit::candidate;
using testkit::int_rows;

const GeneratorRanks kRanks = {{"SQLG_1", 1}, {"SQLG_2", 2}, {"SQLG_3", 3}, {"SQLG_4", 4}, {"SQLG_5", 5}};

class ThrowingSelector final : public ChatBackend {
 public:
  std::string chat(const ChatRequest&) override { throw Error(ErrorCode::kBackendFailure, "down"); }
};

// Random query text with noise the de-formalizer has to remove.
std::string noisy_query(std::mt19937& rng) {
  static const std::vector<std::string> kPieces = {
      "select", "SELECT", "from", "FROM", "where", "Where", "a", "t.b", "COUNT(*)", "'x  y'", "\"Col Name\"",
      "=", "1", "2.5", "join", "on", "order by", "desc", "-- note\n", "/* block */", "(", ")", ",", "group by"};
  static const std::vector<std::string> kSpace = {" ", "  ", "\n", "\t", " \n "};
  std::uniform_int_distribution<std::size_t> piece(0, kPieces.size() - 1);
  std::uniform_int_distribution<std::size_t> space(0, kSpace.size() - 1);
  std::uniform_int_distribution<int> len(1, 20);
  std::string out = kSpace[space(rng)];
  for (int i = len(rng); i > 0; --i) out += kPieces[piece(rng)] + kSpace[space(rng)];
  if (len(rng) % 2 == 0) out += ";";
  return out;
}

TEST(Deformalize, Examples) {
  EXPECT_EQ(deformalize("select  a\nfrom t;"), "SELECT a FROM t");
  EXPECT_EQ(deformalize("SELECT 'a  b'"), "SELECT 'a  b'");
  EXPECT_EQ(deformalize("select a -- why\nfrom t /* c */ where x=1;;  "), "SELECT a FROM t WHERE x=1");
  EXPECT_EQ(deformalize("select \"Mixed Case\" from T"), "SELECT \"Mixed Case\" FROM T");
  EXPECT_EQ(deformalize("  not   sql\n at all "), "not sql at all");
  EXPECT_EQ(deformalize("(select 1)"), "(SELECT 1)");
}

TEST(Deformalize, IdempotentOnGeneratedCorpus) {
  std::mt19937 rng(1234);
  for (int i = 0; i < 1000; ++i) {
    const auto q = noisy_query(rng);
    const auto once = deformalize(q);
    EXPECT_EQ(deformalize(once), once) << q;
    EXPECT_EQ(once.find("  ") == std::string::npos || once.find('\'') != std::string::npos, true) << once;
  }
}

TEST(LengthKey, CountsDeformalizedCharacters) {
  EXPECT_EQ(length_key("select  a   from t;").length, std::string("SELECT a FROM t").size());
  EXPECT_LT(length_key("SELECT b FROM t"), length_key("SELECT c FROM t"));
}

std::vector<CandidateSql> sized_fixture(const std::vector<std::size_t>& sizes) {
  std::vector<CandidateSql> out;
  int result = 0;
  int gen = 0;
  for (std::size_t s : sizes) {
    ++result;
    for (std::size_t k = 0; k < s; ++k) {
      out.push_back(candidate("SELECT " + std::to_string(result) + std::string(k, ' '),
                              "SQLG_" + std::to_string(gen++ % 5 + 1), int_rows({result})));
    }
  }
  return out;
}

TEST(Clustering, CountsClusterSizes) {
  const auto cs = sized_fixture({6, 3, 1});
  const auto set = cluster_candidates(cs);
  ASSERT_EQ(set.clusters.size(), 3u);
  EXPECT_EQ(set.clusters[0].members.size(), 6u);
  EXPECT_EQ(set.clusters[1].members.size(), 3u);
  EXPECT_EQ(set.clusters[2].members.size(), 1u);
  EXPECT_EQ(set.total_candidates, 10u);
}

TEST(Clustering, ErrorsAndAnomaliesAreExcluded) {
  std::vector<CandidateSql> cs;
  for (int i = 0; i < 3; ++i) cs.push_back(candidate("x", "SQLG_1", ExecutionOutcome::failure(ExecStatus::kSyntaxError, "")));
  auto anomalous = int_rows({});
  anomalous.status = ExecStatus::kAnomalous;
  cs.push_back(candidate("SELECT NULL", "SQLG_2", anomalous));
  const auto set = cluster_candidates(cs);
  EXPECT_TRUE(set.empty());
  EXPECT_EQ(set.total_candidates, 0u);
  EXPECT_EQ(set.input_candidates, 4u);
  EXPECT_THROW(reorganize(set, kRanks), Error);
}

TEST(Clustering, IdenticalResultsFormOneCluster) {
  std::vector<CandidateSql> cs;
  for (int i = 0; i < 10; ++i) cs.push_back(candidate("SELECT 1", "SQLG_1", int_rows({1, 1, 2})));
  cs[3].outcome = int_rows({2, 1});  // same set
  EXPECT_EQ(cluster_candidates(cs).clusters.size(), 1u);
  EXPECT_EQ(cluster_candidates(cs, EquivalenceMode::kBag).clusters.size(), 2u);
}

TEST(Reorganize, MajorityBranchEmitsEverything) {
  const auto cs = sized_fixture({1, 3, 6});
  const auto r = reorganize(cluster_candidates(cs), kRanks);
  EXPECT_EQ(r.branch, SelectionBranch::kMajority);
  EXPECT_EQ(r.ordered.size(), 10u);
  EXPECT_EQ(r.cluster_sizes, (std::vector<std::size_t>{6, 3, 1}));
  // The cluster of six (indices 4..9) comes first, members by rank.
  for (std::size_t i = 0; i < 6; ++i) EXPECT_GE(r.ordered[i].index, 4u);
  for (std::size_t i = 1; i < 6; ++i) {
    EXPECT_LE(kRanks.at(r.ordered[i - 1].candidate->generator_id), kRanks.at(r.ordered[i].candidate->generator_id));
  }
}

TEST(Reorganize, MinorityBranchEmitsRepresentatives) {
  const auto cs = sized_fixture({4, 4, 2});
  const auto r = reorganize(cluster_candidates(cs), kRanks);
  EXPECT_EQ(r.branch, SelectionBranch::kMinority);
  ASSERT_EQ(r.ordered.size(), 3u);
  // Each representative is the shortest member (no trailing spaces).
  EXPECT_EQ(r.ordered[0].candidate->sql, "SELECT 1");
  EXPECT_EQ(r.ordered[1].candidate->sql, "SELECT 2");
  EXPECT_EQ(r.ordered[2].candidate->sql, "SELECT 3");
}

TEST(Reorganize, HalfRoundsUp) {
  // |L| = 9: a cluster of 5 is a majority, 4 is not.
  EXPECT_EQ(reorganize(cluster_candidates(sized_fixture({5, 4})), kRanks).branch, SelectionBranch::kMajority);
  EXPECT_EQ(reorganize(cluster_candidates(sized_fixture({4, 3, 2})), kRanks).branch, SelectionBranch::kMinority);
}

TEST(Reorganize, MatchesBruteForceReference) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto cs = testkit::random_candidates(rng, 12);
    const auto expected = testkit::reference_select(cs, kRanks);
    SelectionContext ctx;
    ctx.policy = SelectorPolicy::kMajority;
    const auto got = select_final(ctx, cs, {}, "q", "", kRanks);
    EXPECT_EQ(selection_branch_name(got.branch), expected.branch);
    EXPECT_EQ(got.chosen, expected.chosen);
    if (expected.branch == "majority" || expected.branch == "minority") {
      std::vector<std::size_t> order;
      for (const auto& o : got.reorganized.ordered) order.push_back(o.index);
      EXPECT_EQ(order, expected.ordered);
      EXPECT_EQ(got.reorganized.cluster_sizes, expected.sizes);
      EXPECT_TRUE(std::is_sorted(expected.sizes.rbegin(), expected.sizes.rend()));
    }
  }
}

TEST(SelectorReply, IndexAndSqlForms) {
  const std::vector<CandidateSql> cs{candidate("SELECT a FROM t", "SQLG_1", int_rows({1})),
                                     candidate("SELECT b FROM t", "SQLG_2", int_rows({2}))};
  const std::vector<IndexedCandidate> ordered{{0, &cs[0]}, {1, &cs[1]}};
  EXPECT_EQ(parse_selector_reply("2", ordered), 1u);
  EXPECT_EQ(parse_selector_reply("Candidate 1 is correct.", ordered), 0u);
  EXPECT_EQ(parse_selector_reply("0", ordered), std::nullopt);
  EXPECT_EQ(parse_selector_reply("3", ordered), std::nullopt);
  EXPECT_EQ(parse_selector_reply("I cannot tell", ordered), std::nullopt);
  EXPECT_EQ(parse_selector_reply("Go with 2", ordered), 1u);
  EXPECT_EQ(parse_selector_reply("```sql\nselect b\nfrom t;\n```", ordered), 1u);
  EXPECT_EQ(parse_selector_reply("SELECT c FROM t", ordered), std::nullopt);
  EXPECT_EQ(render_candidate_list(ordered), "Candidate 1:\nSELECT a FROM t\nCandidate 2:\nSELECT b FROM t\n");
}

class ModelSelection : public ::testing::Test {
 protected:
  void SetUp() override {
    db_ = testkit::store_db(dir_);
    doc_ = std::make_shared<const SchemaDoc>(introspect(db_));
    ctx_.backends = &registry_;
    ctx_.prompts = &prompts_;
    schemas_ = {SchemaSubset(doc_, {{"users", "name"}}, 1), SchemaSubset(doc_, {{"orders", "amount"}}, 2)};
  }

  testkit::TempDir dir_;
  std::filesystem::path db_;
  SchemaDocPtr doc_;
  BackendRegistry registry_;
  PromptLibrary prompts_;
  SelectionContext ctx_;
  std::vector<SchemaSubset> schemas_;
};

TEST_F(ModelSelection, SingleClusterPicksShortestWithoutModel) {
  auto mock = testkit::scripted({});
  registry_.bind("selector", mock);
  const std::vector<CandidateSql> cs{candidate("SELECT a FROM t JOIN t", "SQLG_1", int_rows({1})),
                                     candidate("SELECT a FROM t", "SQLG_2", int_rows({1}))};
  const auto r = select_final(ctx_, cs, schemas_, "q", "", kRanks);
  EXPECT_EQ(r.branch, SelectionBranch::kSingleCluster);
  EXPECT_EQ(r.chosen, 1u);
  EXPECT_EQ(mock->calls(), 0u);
}

TEST_F(ModelSelection, AllFailedFallsBackToShortestNonEmpty) {
  const std::vector<CandidateSql> cs{
      candidate("", "SQLG_1", ExecutionOutcome::failure(ExecStatus::kRuntimeError, "backend")),
      candidate("SELEC long one", "SQLG_2", ExecutionOutcome::failure(ExecStatus::kSyntaxError, "")),
      candidate("SELEC x", "SQLG_3", ExecutionOutcome::failure(ExecStatus::kSyntaxError, ""))};
  const auto r = select_final(ctx_, cs, schemas_, "q", "", kRanks);
  EXPECT_EQ(r.branch, SelectionBranch::kDegenerate);
  EXPECT_EQ(r.chosen, 2u);
}

TEST_F(ModelSelection, ModelPickIsHonouredAndPromptCarriesUnionSchema) {
  auto mock = testkit::scripted({{std::string("You choose the correct SQL query"), "2"}});
  registry_.bind("selector", mock);
  const auto cs = sized_fixture({6, 3, 1});
  const auto r = select_final(ctx_, cs, schemas_, "Which?", "hint", kRanks);
  EXPECT_TRUE(r.selector_called);
  EXPECT_EQ(r.chosen, r.reorganized.ordered[1].index);
  const auto text = mock->requests().at(0).joined_text();
  EXPECT_NE(text.find("(name: TEXT"), std::string::npos);
  EXPECT_NE(text.find("(amount: REAL"), std::string::npos);
  EXPECT_NE(text.find("Candidate 10:"), std::string::npos);
  EXPECT_EQ(mock->requests().at(0).role_id, "selector");
}

TEST_F(ModelSelection, AnswerOneAgreesWithMajorityPolicy) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    const auto cs = testkit::random_candidates(rng, 10);
    BackendRegistry reg;
    reg.bind("selector", testkit::scripted({{std::nullopt, "1"}}));
    SelectionContext model = ctx_;
    model.backends = &reg;
    SelectionContext majority = ctx_;
    majority.policy = SelectorPolicy::kMajority;
    EXPECT_EQ(select_final(model, cs, schemas_, "q", "", kRanks).chosen,
              select_final(majority, cs, schemas_, "q", "", kRanks).chosen);
  }
}

TEST_F(ModelSelection, UnparseableAndBackendFailuresFallBack) {
  const auto cs = sized_fixture({2, 1, 1});
  registry_.bind("selector", testkit::scripted({{std::nullopt, "no idea"}}));
  auto r = select_final(ctx_, cs, schemas_, "q", "", kRanks);
  EXPECT_TRUE(r.unparseable_fallback);
  EXPECT_EQ(r.chosen, r.reorganized.ordered.front().index);

  registry_.bind("selector", std::make_shared<ThrowingSelector>());
  r = select_final(ctx_, cs, schemas_, "q", "", kRanks);
  EXPECT_TRUE(r.backend_fallback);
  EXPECT_FALSE(r.backend_error.empty());
  EXPECT_EQ(r.chosen, r.reorganized.ordered.front().index);
}

TEST(SelectorPolicyNames, RoundTrip) {
  EXPECT_EQ(parse_selector_policy("model"), SelectorPolicy::kModel);
  EXPECT_EQ(parse_selector_policy("majority"), SelectorPolicy::kMajority);
  EXPECT_THROW(parse_selector_policy("vote"), Error);
}

}  // namespace
}  // namespace multisql
