#include "multisql/selection.hpp"

#include <algorithm>
#include <climits>
#include <regex>

#include "multisql/error.hpp"
#include "multisql/sql_lexer.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

namespace {

// Text whose first significant word does not open a statement is prose.
bool looks_like_sql(const std::vector<sql::Token>& tokens) {
  static constexpr std::string_view kLeads[] = {"SELECT", "WITH",   "VALUES", "INSERT", "UPDATE",
                                                "DELETE", "CREATE", "PRAGMA", "EXPLAIN"};
  for (const auto& t : tokens) {
    if (t.kind == sql::TokenKind::kSpace || t.kind == sql::TokenKind::kComment) continue;
    if (t.kind == sql::TokenKind::kPunct && t.text == "(") continue;
    return std::ranges::any_of(kLeads, [&](std::string_view k) { return t.is_word(k); });
  }
  return false;
}

}  // namespace

std::string deformalize(std::string_view input) {
  auto tokens = sql::tokenize(input);
  if (!looks_like_sql(tokens)) return text::collapse_whitespace(input);
  while (!tokens.empty()) {
    const auto& t = tokens.back();
    if (t.kind == sql::TokenKind::kSpace || t.kind == sql::TokenKind::kComment ||
        (t.kind == sql::TokenKind::kPunct && t.text == ";")) {
      tokens.pop_back();
    } else {
      break;
    }
  }
  std::string out;
  bool pending_space = false;
  for (const auto& t : tokens) {
    if (t.kind == sql::TokenKind::kSpace || t.kind == sql::TokenKind::kComment) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    if (t.kind == sql::TokenKind::kWord && sql::is_keyword(t.text)) {
      out += text::to_upper(t.text);
    } else {
      out += t.text;
    }
  }
  return out;
}

LengthKey length_key(std::string_view sql) {
  std::string d = deformalize(sql);
  const std::size_t n = d.size();
  return {n, std::move(d)};
}

GeneratorRanks ranks_of(const std::vector<GeneratorBinding>& bindings) {
  GeneratorRanks out;
  for (const auto& b : bindings) out[b.generator_id] = b.rank;
  return out;
}

namespace {

int rank_of(const GeneratorRanks& ranks, const std::string& id) {
  auto it = ranks.find(id);
  return it == ranks.end() ? INT_MAX : it->second;
}

// Shortest member: deformalized length, then text, then list position.
const IndexedCandidate& shortest(const std::vector<IndexedCandidate>& members) {
  return *std::min_element(members.begin(), members.end(), [](const auto& a, const auto& b) {
    auto ka = length_key(a.candidate->sql);
    auto kb = length_key(b.candidate->sql);
    return ka != kb ? ka < kb : a.index < b.index;
  });
}

}  // namespace

ClusterSet cluster_candidates(std::span<const CandidateSql> candidates, EquivalenceMode mode) {
  ClusterSet out;
  out.input_candidates = candidates.size();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    if (!c.outcome.ok()) continue;
    ++out.total_candidates;
    CanonicalResult canonical = canonicalize(c.outcome.rows, mode);
    const ResultKey key = result_key(canonical);
    auto it = std::find_if(out.clusters.begin(), out.clusters.end(), [&](const Cluster& cl) {
      // Digest first, full comparison to rule out collisions.
      return cl.key == key && cl.canonical == canonical;
    });
    if (it == out.clusters.end()) {
      out.clusters.push_back({key, std::move(canonical), {}});
      it = std::prev(out.clusters.end());
    }
    it->members.push_back({i, &c});
  }
  return out;
}

std::string_view selection_branch_name(SelectionBranch branch) {
  switch (branch) {
    case SelectionBranch::kSingleCluster: return "single_cluster";
    case SelectionBranch::kMajority: return "majority";
    case SelectionBranch::kMinority: return "minority";
    case SelectionBranch::kDegenerate: return "degenerate";
  }
  return "majority";
}

Reorganized reorganize(const ClusterSet& clusters, const GeneratorRanks& ranks) {
  if (clusters.empty()) throw Error(ErrorCode::kEmptyClusterSet, "nothing to reorganize");

  struct Sorted {
    std::vector<IndexedCandidate> members;
    int best_rank;
    LengthKey shortest_key;
    std::size_t first_index;
  };
  std::vector<Sorted> sorted;
  for (const auto& cluster : clusters.clusters) {
    Sorted s{cluster.members, INT_MAX, {}, cluster.members.front().index};
    // Intra-group: generator rank, then list position.
    std::stable_sort(s.members.begin(), s.members.end(), [&](const auto& a, const auto& b) {
      return rank_of(ranks, a.candidate->generator_id) < rank_of(ranks, b.candidate->generator_id);
    });
    s.best_rank = rank_of(ranks, s.members.front().candidate->generator_id);
    s.shortest_key = length_key(shortest(s.members).candidate->sql);
    sorted.push_back(std::move(s));
  }
  // Inter-group: size descending with deterministic tie-breaks.
  std::sort(sorted.begin(), sorted.end(), [](const Sorted& a, const Sorted& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    if (a.best_rank != b.best_rank) return a.best_rank < b.best_rank;
    if (a.shortest_key != b.shortest_key) return a.shortest_key < b.shortest_key;
    return a.first_index < b.first_index;
  });

  Reorganized out;
  for (const auto& s : sorted) out.cluster_sizes.push_back(s.members.size());
  const std::size_t half = (clusters.total_candidates + 1) / 2;
  if (sorted.front().members.size() >= half) {
    out.branch = SelectionBranch::kMajority;
    for (const auto& s : sorted) out.ordered.insert(out.ordered.end(), s.members.begin(), s.members.end());
  } else {
    out.branch = SelectionBranch::kMinority;
    for (const auto& s : sorted) out.ordered.push_back(shortest(s.members));
  }
  return out;
}

SelectorPolicy parse_selector_policy(std::string_view name) {
  if (name == "model") return SelectorPolicy::kModel;
  if (name == "majority") return SelectorPolicy::kMajority;
  throw Error(ErrorCode::kConfigInvalid, "unknown selector policy " + std::string(name));
}

std::string_view selector_policy_name(SelectorPolicy policy) {
  return policy == SelectorPolicy::kModel ? "model" : "majority";
}

std::optional<std::size_t> parse_selector_reply(const std::string& reply,
                                                const std::vector<IndexedCandidate>& ordered) {
  auto first_index = [&]() -> std::optional<std::size_t> {
    for (const auto& t : sql::significant(sql::tokenize(reply))) {
      if (t.kind != sql::TokenKind::kNumber) continue;
      if (t.text.size() > 6 || t.text.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
      const std::size_t n = std::stoul(t.text);
      if (n >= 1 && n <= ordered.size()) return n - 1;
      return std::nullopt;
    }
    return std::nullopt;
  };
  // Fences are stripped first; the lexer would read backticks as quoting.
  // Every query contains SELECT; "with" alone is common in prose.
  static const std::regex kSelect(R"(\bselect\b)", std::regex::icase);
  const bool has_sql = reply.find("```") != std::string::npos || std::regex_search(reply, kSelect);
  if (has_sql) {
    // Free-text answer: match a candidate by deformalized SQL.
    try {
      const std::string answer = deformalize(extract_sql(reply));
      for (std::size_t i = 0; i < ordered.size(); ++i) {
        if (deformalize(ordered[i].candidate->sql) == answer) return i;
      }
    } catch (const Error&) {
    }
    return std::nullopt;
  }
  return first_index();
}

std::string render_candidate_list(const std::vector<IndexedCandidate>& ordered) {
  std::string out;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    out += "Candidate " + std::to_string(i + 1) + ":\n" + deformalize(ordered[i].candidate->sql) + "\n";
  }
  return out;
}

SelectionResult select_final(const SelectionContext& ctx, std::span<const CandidateSql> candidates,
                             const std::vector<SchemaSubset>& schemas, const std::string& question,
                             const std::string& evidence, const GeneratorRanks& ranks) {
  if (candidates.empty()) throw Error(ErrorCode::kInvalidArgument, "no candidates to select from");
  SelectionResult result;
  result.clusters = cluster_candidates(candidates, ctx.mode);

  if (result.clusters.empty()) {
    // Every candidate failed: fall back to the shortest non-empty SQL.
    result.branch = SelectionBranch::kDegenerate;
    std::vector<IndexedCandidate> all;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (!candidates[i].sql.empty()) all.push_back({i, &candidates[i]});
    }
    if (all.empty()) all.push_back({0, &candidates[0]});
    result.chosen = shortest(all).index;
    return result;
  }
  if (result.clusters.clusters.size() == 1) {
    result.branch = SelectionBranch::kSingleCluster;
    result.chosen = shortest(result.clusters.clusters.front().members).index;
    return result;
  }

  result.reorganized = reorganize(result.clusters, ranks);
  result.branch = result.reorganized.branch;
  const auto& ordered = result.reorganized.ordered;
  result.chosen = ordered.front().index;
  if (ctx.policy == SelectorPolicy::kMajority) return result;

  if (ctx.backends == nullptr || ctx.prompts == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "model selection needs backends and prompts");
  }
  ColumnSet union_columns;
  SchemaDocPtr doc;
  for (const auto& s : schemas) {
    doc = s.parent_ptr();
    union_columns.insert(s.columns().begin(), s.columns().end());
  }
  const std::string schema_text = doc ? render_schema(*doc, &union_columns) : std::string();
  auto request = build_request(ctx.prompts->get(prompt_ids::kSelector),
                               {{"schema", schema_text},
                                {"question", question},
                                {"evidence", evidence},
                                {"candidates", render_candidate_list(ordered)}},
                               std::string(roles::kSelector), kSelectorTemperature);
  try {
    result.selector_called = true;
    result.selector_reply = ctx.backends->chat(request);
  } catch (const Error& e) {
    if (!is_backend_error(e.code())) throw;
    result.backend_fallback = true;
    result.backend_error = e.what();
    return result;
  }
  if (auto pick = parse_selector_reply(result.selector_reply, ordered)) {
    result.chosen = ordered[*pick].index;
  } else {
    result.unparseable_fallback = true;
  }
  return result;
}

json SelectionResult::to_json(std::span<const CandidateSql> candidates) const {
  json cl = json::array();
  for (const auto& c : clusters.clusters) {
    json members = json::array();
    for (const auto& m : c.members) members.push_back(m.index);
    cl.push_back({{"size", c.members.size()}, {"members", std::move(members)}});
  }
  json order = json::array();
  for (const auto& o : reorganized.ordered) order.push_back(o.index);
  return {{"branch", selection_branch_name(branch)},
          {"clusters", std::move(cl)},
          {"ok_candidates", clusters.total_candidates},
          {"cluster_sizes", reorganized.cluster_sizes},
          {"emitted_order", std::move(order)},
          {"chosen_index", chosen},
          {"chosen_generator", candidates.empty() ? "" : candidates[chosen].generator_id},
          {"chosen_sql", candidates.empty() ? "" : candidates[chosen].sql},
          {"selector_called", selector_called},
          {"selector_reply", selector_reply},
          {"backend_fallback", backend_fallback},
          {"unparseable_fallback", unparseable_fallback}};
}

}  // namespace multisql
