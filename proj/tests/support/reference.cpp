#include "reference.hpp"

#include <climits>
#include <cmath>
#include <cstdio>
#include <set>

#include "fixtures.hpp"
#include "multisql/selection.hpp"

namespace multisql::testkit {

namespace {

std::string render_cell(const Cell& cell) {
  if (std::holds_alternative<Null>(cell)) return "null";
  if (const auto* i = std::get_if<std::int64_t>(&cell)) return "int " + std::to_string(*i);
  if (const auto* d = std::get_if<double>(&cell)) {
    const double r = std::round(*d * 1e6) / 1e6;
    if (r == std::floor(r)) return "int " + std::to_string(static_cast<long long>(r));
    char buf[64];
    std::snprintf(buf, sizeof buf, "real %.6f", r);
    return buf;
  }
  return "text " + std::get<std::string>(cell);
}

// Set semantics: distinct rendered rows.
std::set<std::vector<std::string>> result_set(const ExecutionOutcome& o) {
  std::set<std::vector<std::string>> out;
  for (const auto& row : o.rows) {
    std::vector<std::string> r;
    for (const auto& c : row) r.push_back(render_cell(c));
    out.insert(r);
  }
  return out;
}

struct Group {
  std::vector<std::size_t> members;  // in input order
};

// (deformalized length, deformalized text, index)
bool shorter(const std::vector<CandidateSql>& cs, std::size_t a, std::size_t b) {
  const std::string da = deformalize(cs[a].sql);
  const std::string db = deformalize(cs[b].sql);
  if (da.size() != db.size()) return da.size() < db.size();
  if (da != db) return da < db;
  return a < b;
}

std::size_t shortest_of(const std::vector<CandidateSql>& cs, const std::vector<std::size_t>& idx) {
  std::size_t best = idx.front();
  for (std::size_t i : idx) {
    if (shorter(cs, i, best)) best = i;
  }
  return best;
}

}  // namespace

ReferenceSelection reference_select(const std::vector<CandidateSql>& cs,
                                    const std::map<std::string, int, std::less<>>& ranks) {
  auto rank = [&](std::size_t i) {
    auto it = ranks.find(cs[i].generator_id);
    return it == ranks.end() ? INT_MAX : it->second;
  };
  std::vector<Group> groups;
  std::vector<std::set<std::vector<std::string>>> keys;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (cs[i].outcome.status != ExecStatus::kOk) continue;
    ++ok;
    const auto key = result_set(cs[i].outcome);
    std::size_t g = 0;
    while (g < keys.size() && keys[g] != key) ++g;
    if (g == keys.size()) {
      keys.push_back(key);
      groups.emplace_back();
    }
    groups[g].members.push_back(i);
  }

  ReferenceSelection out;
  if (groups.empty()) {
    out.branch = "degenerate";
    std::vector<std::size_t> nonempty;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      if (!cs[i].sql.empty()) nonempty.push_back(i);
    }
    out.chosen = nonempty.empty() ? 0 : shortest_of(cs, nonempty);
    return out;
  }
  if (groups.size() == 1) {
    out.branch = "single_cluster";
    out.chosen = shortest_of(cs, groups[0].members);
    return out;
  }

  // Members by (rank, input index): insertion sort.
  for (auto& g : groups) {
    auto& m = g.members;
    for (std::size_t a = 1; a < m.size(); ++a) {
      for (std::size_t b = a; b > 0 && rank(m[b]) < rank(m[b - 1]); --b) std::swap(m[b], m[b - 1]);
    }
  }
  // Groups by selection: repeatedly take the best remaining.
  auto better = [&](const Group& a, const Group& b) {
    if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
    if (rank(a.members.front()) != rank(b.members.front())) return rank(a.members.front()) < rank(b.members.front());
    const std::size_t sa = shortest_of(cs, a.members);
    const std::size_t sb = shortest_of(cs, b.members);
    const std::string da = deformalize(cs[sa].sql);
    const std::string db = deformalize(cs[sb].sql);
    if (da.size() != db.size()) return da.size() < db.size();
    if (da != db) return da < db;
    std::size_t fa = *std::min_element(a.members.begin(), a.members.end());
    std::size_t fb = *std::min_element(b.members.begin(), b.members.end());
    return fa < fb;
  };
  std::vector<Group> ordered_groups;
  std::vector<bool> used(groups.size(), false);
  for (std::size_t round = 0; round < groups.size(); ++round) {
    std::size_t best = groups.size();
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (used[g]) continue;
      if (best == groups.size() || better(groups[g], groups[best])) best = g;
    }
    used[best] = true;
    ordered_groups.push_back(groups[best]);
  }
  for (const auto& g : ordered_groups) out.sizes.push_back(g.members.size());

  const std::size_t need = ok / 2 + ok % 2;
  if (ordered_groups.front().members.size() >= need) {
    out.branch = "majority";
    for (const auto& g : ordered_groups) out.ordered.insert(out.ordered.end(), g.members.begin(), g.members.end());
  } else {
    out.branch = "minority";
    for (const auto& g : ordered_groups) out.ordered.push_back(shortest_of(cs, g.members));
  }
  out.chosen = out.ordered.front();
  return out;
}

std::vector<CandidateSql> random_candidates(std::mt19937_64& rng, std::size_t max_count) {
  static const std::vector<std::string> kSql = {
      "SELECT a FROM t",        "select a from t",         "SELECT b FROM t",       "SELECT a, b FROM t",
      "SELECT x FROM tt",       "SELECT COUNT(*) FROM t",  "SELECT  a\nFROM t;",    "SELECT z FROM t",
      "SELECT a FROM t WHERE 1", "SELECT 'a  b' FROM t",   "",                      "SELECT y FROM t"};
  std::uniform_int_distribution<std::size_t> count(1, max_count);
  std::uniform_int_distribution<int> result(0, 3);
  std::uniform_int_distribution<int> status(0, 9);
  std::uniform_int_distribution<std::size_t> sql(0, kSql.size() - 1);
  std::uniform_int_distribution<int> gen(1, 6);  // 6 = unranked generator
  std::vector<CandidateSql> out;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    ExecutionOutcome o;
    const int s = status(rng);
    if (s == 0) {
      o = ExecutionOutcome::failure(ExecStatus::kSyntaxError, "bad");
    } else if (s == 1) {
      o = ExecutionOutcome::failure(ExecStatus::kTimeout, "slow");
    } else if (s == 2) {
      o = int_rows({});
      o.rows = {{Cell{Null{}}}};
      o.status = ExecStatus::kAnomalous;
    } else {
      const int r = result(rng);
      // Results 2 and 3 differ only in order and duplication: same set.
      o = r == 0 ? int_rows({1}) : r == 1 ? int_rows({1, 2}) : r == 2 ? int_rows({3, 4, 4}) : int_rows({4, 3});
    }
    out.push_back(candidate(kSql[sql(rng)], "SQLG_" + std::to_string(gen(rng)), std::move(o)));
  }
  return out;
}

}  // namespace multisql::testkit
