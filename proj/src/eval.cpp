#include "multisql/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <thread>

#include "multisql/error.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

namespace {

bool is_error(ExecStatus s) {
  return s == ExecStatus::kSyntaxError || s == ExecStatus::kRuntimeError || s == ExecStatus::kTimeout;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::string percent(const std::optional<double>& v) { return v ? percent(*v) : "n/a"; }

}  // namespace

std::string_view ex_verdict_name(ExVerdict verdict) {
  switch (verdict) {
    case ExVerdict::kCorrect: return "correct";
    case ExVerdict::kWrong: return "wrong";
    case ExVerdict::kPredError: return "pred_error";
    case ExVerdict::kGoldError: return "gold_error";
  }
  return "wrong";
}

ExVerdict score_ex(const ExecutionOutcome& pred, const ExecutionOutcome& gold, EquivalenceMode mode) {
  if (is_error(gold.status)) return ExVerdict::kGoldError;
  if (is_error(pred.status)) return ExVerdict::kPredError;
  return equivalent(pred, gold, mode) ? ExVerdict::kCorrect : ExVerdict::kWrong;
}

ExVerdict score_ex(std::string_view pred, std::string_view gold, const std::filesystem::path& db_file,
                   EquivalenceMode mode, std::int64_t timeout_ms) {
  const auto gold_outcome = execute(gold, db_file, timeout_ms);
  const auto pred_outcome = execute(pred, db_file, timeout_ms);
  return score_ex(pred_outcome, gold_outcome, mode);
}

GoldAnnotation annotate_gold(std::string_view gold_sql, const SchemaDoc& doc) {
  const auto refs = scan_references(gold_sql, doc);
  GoldAnnotation out{refs.column_set(), {}};
  for (const auto& v : refs.values) {
    const bool seen = std::any_of(out.values.begin(), out.values.end(), [&](const ValueOccurrence& o) {
      return o.ref == v.ref && o.literal == v.literal;
    });
    if (!seen) out.values.push_back(v);
  }
  return out;
}

SchemaMetrics schema_metrics(const ColumnSet& subset, const GoldAnnotation& gold,
                             const std::vector<RetrievedValue>& retrieved) {
  SchemaMetrics m;
  m.subset_size = subset.size();
  std::size_t hits = 0;
  for (const auto& c : gold.columns) hits += subset.contains(c) ? 1 : 0;
  m.precision = subset.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(subset.size());
  m.column_recall = gold.columns.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(gold.columns.size());
  if (!gold.values.empty()) {
    std::size_t found = 0;
    for (const auto& v : gold.values) {
      if (!subset.contains(v.ref)) continue;
      const bool got = std::any_of(retrieved.begin(), retrieved.end(), [&](const RetrievedValue& r) {
        return r.column == v.ref && text::iequals(r.value_text, v.literal);
      });
      found += got ? 1 : 0;
    }
    m.value_recall = static_cast<double>(found) / static_cast<double>(gold.values.size());
  }
  return m;
}

// ---- contribution -------------------------------------------------------

ContributionReport contribution_report(const std::vector<ContributionRecord>& records) {
  ContributionReport report;
  for (const auto& r : records) {
    for (const auto& [generator, correct] : r.candidates) {
      auto& g = report.generators[generator];
      ++g.candidates;
      g.correct += correct ? 1 : 0;
    }
    if (r.unanimous) {
      ++report.unanimous_items;
    } else {
      ++report.contested_items;
      ++report.generators[r.chosen_generator].chosen_contested;
    }
  }
  for (auto& [id, g] : report.generators) {
    g.avg_ex = g.candidates == 0 ? 0.0 : static_cast<double>(g.correct) / static_cast<double>(g.candidates);
    if (report.contested_items > 0) {
      g.cr = static_cast<double>(g.chosen_contested) / static_cast<double>(report.contested_items);
    }
  }
  const std::size_t total = report.unanimous_items + report.contested_items;
  report.unanimous_share = total == 0 ? 0.0 : static_cast<double>(report.unanimous_items) / static_cast<double>(total);
  return report;
}

json ContributionReport::to_json() const {
  json gens = json::object();
  for (const auto& [id, g] : generators) {
    gens[id] = {{"candidates", g.candidates},
                {"correct", g.correct},
                {"avg_ex", g.avg_ex},
                {"chosen_contested", g.chosen_contested},
                {"cr", optional_number(g.cr)}};
  }
  return {{"generators", std::move(gens)},
          {"unanimous_items", unanimous_items},
          {"contested_items", contested_items},
          {"unanimous_share", unanimous_share}};
}

// ---- full evaluation ----------------------------------------------------

json ItemResult::to_json() const {
  json schema_json = json::array();
  for (const auto& m : schema) {
    schema_json.push_back({{"precision", m.precision},
                           {"column_recall", m.column_recall},
                           {"value_recall", optional_number(m.value_recall)},
                           {"size", m.subset_size}});
  }
  json out = {{"question_id", item.question_id},
              {"db_id", item.db_id},
              {"verdict", ex_verdict_name(verdict)},
              {"pred_sql", pred_sql},
              {"gold_sql", item.gold_sql},
              {"chosen_generator", chosen_generator},
              {"branch", branch},
              {"schema", std::move(schema_json)},
              {"refine_triggers", refine_triggers},
              {"selector_fallback", selector_fallback},
              {"retrieved_fallback", retrieved_fallback}};
  if (!error.empty()) out["error"] = error;
  if (!transcript.is_null()) out["transcript"] = transcript;
  return out;
}

namespace {

ItemResult evaluate_item(const Pipeline& pipeline, const BenchItem& item, const DatabaseCatalog& catalog,
                         const EvalOptions& options) {
  ItemResult r;
  r.item = item;
  std::filesystem::path db;
  SchemaDocPtr doc;
  try {
    db = catalog.db_file(item.db_id);
    doc = catalog.doc(item.db_id);
  } catch (const Error& e) {
    r.verdict = ExVerdict::kGoldError;
    r.error = "question " + std::to_string(item.question_id) + ": " + e.what();
    return r;
  }
  const ExecutionOutcome gold = execute(item.gold_sql, db, options.timeout_ms);

  AskRun run;
  try {
    run = pipeline.ask(doc, db, item.question, item.evidence);
  } catch (const Error& e) {
    r.error = "question " + std::to_string(item.question_id) + ": " + e.what();
    r.verdict = is_error(gold.status) ? ExVerdict::kGoldError : ExVerdict::kPredError;
    return r;
  }
  r.pred_sql = run.chosen_sql;
  r.chosen_generator = run.candidates[run.selection.chosen].generator_id;
  r.branch = std::string(selection_branch_name(run.selection.branch));
  r.selector_fallback = run.selection.backend_fallback || run.selection.unparseable_fallback;
  r.retrieved_fallback = run.link.retrieved_fallback_to_full;
  for (const auto& c : run.candidates) r.refine_triggers += c.refined ? 1 : 0;

  const ExecutionOutcome pred = execute(r.pred_sql, db, options.timeout_ms);
  r.verdict = score_ex(pred, gold, options.mode);

  const GoldAnnotation annotation = annotate_gold(item.gold_sql, *doc);
  for (const auto& subset : run.link.selection.subsets) {
    r.schema.push_back(schema_metrics(subset.columns(), annotation, run.link.values));
  }

  r.contribution.chosen_generator = r.chosen_generator;
  r.contribution.unanimous = run.selection.branch == SelectionBranch::kSingleCluster;
  for (const auto& c : run.candidates) {
    r.contribution.candidates.push_back({c.generator_id, equivalent(c.outcome, gold, options.mode)});
  }
  r.transcript = ask_transcript(run, pipeline.settings(), options.timings);
  return r;
}

}  // namespace

EvalReport aggregate(std::vector<ItemResult> results) {
  EvalReport report;
  report.items = results.size();
  std::vector<ContributionRecord> contributions;
  std::vector<std::size_t> value_items;
  for (const auto& r : results) {
    switch (r.verdict) {
      case ExVerdict::kCorrect: ++report.correct; break;
      case ExVerdict::kWrong: ++report.wrong; break;
      case ExVerdict::kPredError: ++report.pred_errors; break;
      case ExVerdict::kGoldError: ++report.gold_errors; break;
    }
    report.pipeline_failures += r.error.empty() ? 0 : 1;
    report.refine_triggers += r.refine_triggers;
    report.selector_fallbacks += r.selector_fallback ? 1 : 0;
    report.retrieved_fallbacks += r.retrieved_fallback ? 1 : 0;
    if (r.error.empty() && r.verdict != ExVerdict::kGoldError) contributions.push_back(r.contribution);

    if (report.subsets.size() < r.schema.size()) {
      report.subsets.resize(r.schema.size());
      value_items.resize(r.schema.size());
    }
    for (std::size_t i = 0; i < r.schema.size(); ++i) {
      auto& avg = report.subsets[i];
      ++avg.items;
      avg.precision += r.schema[i].precision;
      avg.column_recall += r.schema[i].column_recall;
      if (r.schema[i].value_recall) {
        avg.value_recall = avg.value_recall.value_or(0.0) + *r.schema[i].value_recall;
        ++value_items[i];
      }
    }
  }
  for (std::size_t i = 0; i < report.subsets.size(); ++i) {
    auto& avg = report.subsets[i];
    avg.precision /= static_cast<double>(avg.items);
    avg.column_recall /= static_cast<double>(avg.items);
    if (avg.value_recall) *avg.value_recall /= static_cast<double>(value_items[i]);
  }
  report.scored = report.items - report.gold_errors;
  report.ex = report.scored == 0 ? 0.0 : static_cast<double>(report.correct) / static_cast<double>(report.scored);
  report.contribution = contribution_report(contributions);
  report.results = std::move(results);
  return report;
}

EvalReport evaluate(const Pipeline& pipeline, const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                    const EvalOptions& options) {
  std::vector<ItemResult> results(items.size());
  // Scripted backends answer in call order, so their items must run in
  // dataset order.
  const std::size_t workers =
      pipeline.backends().any_scripted() ? 1 : std::max<std::size_t>(1, std::min(options.workers, items.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) results[i] = evaluate_item(pipeline, items[i], catalog, options);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < items.size(); i = next++) {
          results[i] = evaluate_item(pipeline, items[i], catalog, options);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return aggregate(std::move(results));
}

json EvalReport::to_json() const {
  json subset_json = json::array();
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    subset_json.push_back({{"index", i + 1},
                           {"precision", subsets[i].precision},
                           {"column_recall", subsets[i].column_recall},
                           {"value_recall", optional_number(subsets[i].value_recall)},
                           {"items", subsets[i].items}});
  }
  return {{"items", items},
          {"scored", scored},
          {"correct", correct},
          {"wrong", wrong},
          {"pred_errors", pred_errors},
          {"gold_errors", gold_errors},
          {"pipeline_failures", pipeline_failures},
          {"ex", ex},
          {"refine_triggers", refine_triggers},
          {"selector_fallbacks", selector_fallbacks},
          {"retrieved_fallbacks", retrieved_fallbacks},
          {"schema", std::move(subset_json)},
          {"contribution", contribution.to_json()}};
}

std::string EvalReport::summary_table() const {
  std::string out;
  char line[160];
  auto row = [&](const char* label, const std::string& value) {
    std::snprintf(line, sizeof line, "%-22s %s\n", label, value.c_str());
    out += line;
  };
  row("items", std::to_string(items));
  row("scored", std::to_string(scored));
  row("correct", std::to_string(correct));
  row("EX", percent(ex));
  row("wrong", std::to_string(wrong));
  row("pred errors", std::to_string(pred_errors));
  row("gold errors (excluded)", std::to_string(gold_errors));
  row("pipeline failures", std::to_string(pipeline_failures));
  row("refine triggers", std::to_string(refine_triggers));
  row("selector fallbacks", std::to_string(selector_fallbacks));
  row("unanimous share", percent(contribution.unanimous_share));

  out += "\nsubset  P         R_c       R_v\n";
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    std::snprintf(line, sizeof line, "S%-6zu %-9s %-9s %s\n", i + 1, percent(subsets[i].precision).c_str(),
                  percent(subsets[i].column_recall).c_str(), percent(subsets[i].value_recall).c_str());
    out += line;
  }
  out += "\ngenerator             avg EX    CR        chosen\n";
  for (const auto& [id, g] : contribution.generators) {
    std::snprintf(line, sizeof line, "%-21s %-9s %-9s %zu\n", id.c_str(), percent(g.avg_ex).c_str(),
                  percent(g.cr).c_str(), g.chosen_contested);
    out += line;
  }
  return out;
}

}  // namespace multisql
