#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "multisql/backend.hpp"
#include "multisql/generation.hpp"
#include "multisql/prompts.hpp"
#include "multisql/schema.hpp"
#include "multisql/sql_exec.hpp"

namespace multisql {

// Removes comments, collapses whitespace, upper-cases keywords, keeps quoted
// text verbatim and drops trailing semicolons. Idempotent.
std::string deformalize(std::string_view sql);

// Ordering key for "shortest": deformalized length, then the deformalized
// text itself.
struct LengthKey {
  std::size_t length;
  std::string text;
  auto operator<=>(const LengthKey&) const = default;
};
LengthKey length_key(std::string_view sql);

// Generator id -> rank (1 = best). Unknown generators sort last.
using GeneratorRanks = std::map<std::string, int, std::less<>>;

GeneratorRanks ranks_of(const std::vector<GeneratorBinding>& bindings);

struct IndexedCandidate {
  std::size_t index = 0;  // position in the original candidate list
  const CandidateSql* candidate = nullptr;
};

struct Cluster {
  ResultKey key;
  CanonicalResult canonical;
  std::vector<IndexedCandidate> members;
};

struct ClusterSet {
  std::vector<Cluster> clusters;
  std::size_t total_candidates = 0;  // ok candidates, i.e. |L| once errors are excluded
  std::size_t input_candidates = 0;
  bool empty() const { return clusters.empty(); }
};

// Groups the ok candidates by equivalent execution results, in order of first
// appearance. Candidates must outlive the returned set.
ClusterSet cluster_candidates(std::span<const CandidateSql> candidates,
                              EquivalenceMode mode = EquivalenceMode::kSet);

enum class SelectionBranch { kSingleCluster, kMajority, kMinority, kDegenerate };

std::string_view selection_branch_name(SelectionBranch branch);

struct Reorganized {
  SelectionBranch branch = SelectionBranch::kMajority;
  std::vector<IndexedCandidate> ordered;
  std::vector<std::size_t> cluster_sizes;  // after inter-group sorting
};

// Inter-group sort by size (ties: best member rank, then shortest member),
// intra-group sort by generator rank. If the largest cluster holds at least
// half of the ok candidates (rounded up) every member is emitted in cluster
// order, otherwise the shortest member of each cluster.
// Throws Error(kEmptyClusterSet).
Reorganized reorganize(const ClusterSet& clusters, const GeneratorRanks& ranks);

enum class SelectorPolicy { kModel, kMajority };

SelectorPolicy parse_selector_policy(std::string_view name);
std::string_view selector_policy_name(SelectorPolicy policy);

struct SelectionContext {
  const BackendRegistry* backends = nullptr;
  const PromptLibrary* prompts = nullptr;
  EquivalenceMode mode = EquivalenceMode::kSet;
  SelectorPolicy policy = SelectorPolicy::kModel;
};

struct SelectionResult {
  std::size_t chosen = 0;  // index into the candidate list
  SelectionBranch branch = SelectionBranch::kSingleCluster;
  ClusterSet clusters;
  Reorganized reorganized;
  std::string selector_reply;
  bool selector_called = false;
  bool backend_fallback = false;
  bool unparseable_fallback = false;
  std::string backend_error;

  nlohmann::json to_json(std::span<const CandidateSql> candidates) const;
};

// 1-based index in `reply`, or a SQL statement matched by deformalized text.
std::optional<std::size_t> parse_selector_reply(const std::string& reply,
                                                const std::vector<IndexedCandidate>& ordered);

std::string render_candidate_list(const std::vector<IndexedCandidate>& ordered);

// Picks the final SQL from `candidates`. `schemas` feeds the schema union
// shown to the selection model.
SelectionResult select_final(const SelectionContext& ctx, std::span<const CandidateSql> candidates,
                             const std::vector<SchemaSubset>& schemas, const std::string& question,
                             const std::string& evidence, const GeneratorRanks& ranks);

}  // namespace multisql
