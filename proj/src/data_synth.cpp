#include "multisql/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include "multisql/error.hpp"
#include "multisql/selection.hpp"
#include "multisql/sql_lexer.hpp"
#include "multisql/sql_refs.hpp"
#include "multisql/sqlite_db.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

namespace {

// Portable seeded stream; std distributions differ between standard
// libraries and corpora must be reproducible everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(next() % n); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  Rng r(seed ^ (a * 0xD6E8FEB86659FD93ULL) ^ (b * 0xA0761D6478BD642FULL));
  return r.next();
}

// Cycles through a shuffled permutation of 0..n-1 so that every value is
// drawn equally often.
class Deck {
 public:
  explicit Deck(std::size_t n) : n_(n) {}

  std::size_t draw(Rng& rng) {
    if (next_ == cards_.size()) {
      cards_.resize(n_);
      std::iota(cards_.begin(), cards_.end(), std::size_t{0});
      rng.shuffle(cards_);
      next_ = 0;
    }
    return cards_[next_++];
  }

 private:
  std::size_t n_;
  std::vector<std::size_t> cards_;
  std::size_t next_ = 0;
};

std::string render_prompt(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values) {
  for (const std::string* part : {&tmpl.system, &tmpl.user}) {
    for (std::size_t open = part->find('{'); open != std::string::npos; open = part->find('{', open + 1)) {
      const std::size_t close = part->find('}', open);
      if (close == std::string::npos) break;
      const std::string key = part->substr(open + 1, close - open - 1);
      const bool placeholder =
          !key.empty() && std::all_of(key.begin(), key.end(), [](char c) { return std::islower(c) || c == '_'; });
      if (placeholder && !values.contains(key)) {
        throw Error(ErrorCode::kInvalidArgument, "template placeholder {" + key + "} has no value");
      }
    }
  }
  std::string out = text::fill_template(tmpl.system, values);
  if (!out.empty()) out += "\n\n";
  return out + text::fill_template(tmpl.user, values);
}

json base_meta(const BenchItem& item) { return {{"question_id", item.question_id}, {"db_id", item.db_id}}; }

void emit(std::vector<TrainingSample>& out, SynthStats& stats, TrainingSample sample) {
  if (sample.prompt.empty() || sample.target.empty()) return;
  ++stats.emitted[std::string(training_task_name(sample.task))];
  out.push_back(std::move(sample));
}

struct Resolved {
  std::filesystem::path db;
  SchemaDocPtr doc;
};

Resolved resolve(const DatabaseCatalog& catalog, const BenchItem& item) {
  try {
    return {catalog.db_file(item.db_id), catalog.doc(item.db_id)};
  } catch (const Error& e) {
    throw Error(e.code(), "question " + std::to_string(item.question_id) + ": " + e.message());
  }
}

std::string item_tag(const BenchItem& item) { return "question " + std::to_string(item.question_id); }

}  // namespace

std::string_view training_task_name(TrainingTask task) {
  switch (task) {
    case TrainingTask::kText2Sql: return "text2sql";
    case TrainingTask::kQuestionInference: return "question_inference";
    case TrainingTask::kEvidenceInference: return "evidence_inference";
    case TrainingTask::kSelfRefine: return "self_refine";
    case TrainingTask::kSelection: return "selection";
  }
  return "text2sql";
}

json TrainingSample::to_json() const {
  return {{"task", training_task_name(task)}, {"prompt", prompt}, {"target", target}, {"meta", meta}};
}

json SynthStats::to_json() const {
  return {{"emitted", emitted},
          {"gold_failures", gold_failures},
          {"mutation_skips", mutation_skips},
          {"no_correct_candidate", no_correct_candidate},
          {"insufficient_negatives", insufficient_negatives},
          {"source_failures", source_failures},
          {"reassigned", reassigned},
          {"reformat_accepted", reformat_accepted},
          {"reformat_rejected", reformat_rejected},
          {"log", log}};
}

// ---- SQL mutation -------------------------------------------------------

std::string_view mutation_kind_name(MutationKind kind) {
  switch (kind) {
    case MutationKind::kColumnSwap: return "column_swap";
    case MutationKind::kDropJoinPredicate: return "drop_join_predicate";
    case MutationKind::kAggregateSwap: return "aggregate_swap";
    case MutationKind::kLiteralPerturb: return "literal_perturb";
    case MutationKind::kRemoveDistinct: return "remove_distinct";
  }
  return "aggregate_swap";
}

namespace {

struct Site {
  std::size_t begin;  // token range replaced
  std::size_t end;
  std::vector<std::string> replacements;  // one is drawn
};

std::string swapped_aggregate(const std::string& word) {
  const std::string u = text::to_upper(word);
  if (u == "COUNT") return "SUM";
  if (u == "SUM") return "AVG";
  if (u == "AVG") return "MAX";
  if (u == "MAX") return "MIN";
  if (u == "MIN") return "MAX";
  return {};
}

std::vector<std::string> perturbed_literals(const std::string& literal) {
  if (literal.find_first_not_of("0123456789") == std::string::npos) {
    if (literal.size() > 18) return {};
    const long long v = std::stoll(literal);
    return {std::to_string(v - 1), std::to_string(v + 1)};
  }
  const auto dot = literal.find('.');
  if (dot == std::string::npos || literal.find_first_not_of("0123456789.") != std::string::npos) return {};
  const int decimals = static_cast<int>(literal.size() - dot - 1);
  const double v = std::strtod(literal.c_str(), nullptr);
  std::vector<std::string> out;
  for (double d : {v - 1.0, v + 1.0}) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, d);
    out.emplace_back(buf);
  }
  return out;
}

bool plain_identifier(const std::string& name) {
  if (name.empty() || !(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  return std::all_of(name.begin(), name.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }) &&
         !sql::is_keyword(name);
}

bool ends_join_predicate(const sql::Token& t) {
  for (auto kw : {"JOIN", "INNER", "LEFT", "RIGHT", "CROSS", "NATURAL", "FULL", "WHERE", "GROUP", "ORDER", "LIMIT",
                  "HAVING", "UNION", "INTERSECT", "EXCEPT", "WINDOW"}) {
    if (t.is_word(kw)) return true;
  }
  return t.kind == sql::TokenKind::kPunct && t.text == ";";
}

}  // namespace

Mutation mutate_sql(std::string_view gold, std::uint64_t seed, const SchemaDoc* doc) {
  const auto tokens = sql::tokenize(gold);
  std::vector<std::size_t> sig;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind != sql::TokenKind::kSpace && tokens[i].kind != sql::TokenKind::kComment) sig.push_back(i);
  }
  auto at = [&](std::size_t p) -> const sql::Token& { return tokens[sig[p]]; };
  auto punct = [&](std::size_t p, std::string_view s) {
    return p < sig.size() && at(p).kind == sql::TokenKind::kPunct && at(p).text == s;
  };
  for (std::size_t p = 0; p < sig.size(); ++p) {
    if (punct(p, ";")) {
      for (std::size_t q = p + 1; q < sig.size(); ++q) {
        if (!punct(q, ";")) throw Error(ErrorCode::kInvalidArgument, "expected a single statement");
      }
      sig.resize(p);
      break;
    }
  }

  std::map<MutationKind, std::vector<Site>> sites;
  std::vector<int> projection_depths;  // SELECT lists still open
  int depth = 0;
  for (std::size_t p = 0; p < sig.size(); ++p) {
    const auto& t = at(p);
    if (punct(p, "(")) {
      ++depth;
    } else if (punct(p, ")")) {
      --depth;
      while (!projection_depths.empty() && projection_depths.back() > depth) projection_depths.pop_back();
    } else if (t.is_word("SELECT")) {
      projection_depths.push_back(depth);
    } else if (t.is_word("FROM")) {
      if (!projection_depths.empty() && projection_depths.back() == depth) projection_depths.pop_back();
    }

    if (t.kind == sql::TokenKind::kWord && punct(p + 1, "(") && !punct(p + 2, "*")) {
      if (auto swap = swapped_aggregate(t.text); !swap.empty()) {
        sites[MutationKind::kAggregateSwap].push_back({sig[p], sig[p] + 1, {swap}});
      }
    }
    if (t.is_word("DISTINCT")) {
      std::size_t end = sig[p] + 1;
      if (end < tokens.size() && tokens[end].kind == sql::TokenKind::kSpace) ++end;
      sites[MutationKind::kRemoveDistinct].push_back({sig[p], end, {""}});
    }
    if (t.kind == sql::TokenKind::kNumber && projection_depths.empty()) {
      if (auto values = perturbed_literals(t.text); !values.empty()) {
        sites[MutationKind::kLiteralPerturb].push_back({sig[p], sig[p] + 1, std::move(values)});
      }
    }
    if (t.is_word("ON")) {
      int d = 0;
      std::size_t q = p + 1;
      for (; q < sig.size(); ++q) {
        if (punct(q, "(")) ++d;
        if (punct(q, ")")) {
          if (d == 0) break;
          --d;
        }
        if (d == 0 && ends_join_predicate(at(q))) break;
      }
      // Keep the whitespace in front of whatever follows the predicate.
      std::size_t end = q < sig.size() ? sig[q] : tokens.size();
      while (end > sig[p] + 1 && tokens[end - 1].kind == sql::TokenKind::kSpace) --end;
      std::size_t begin = sig[p];
      while (begin > 0 && tokens[begin - 1].kind == sql::TokenKind::kSpace) --begin;
      sites[MutationKind::kDropJoinPredicate].push_back({begin, end, {""}});
    }
  }

  if (doc != nullptr) {
    for (const auto& occ : scan_references(tokens, *doc).columns) {
      if (std::find(sig.begin(), sig.end(), occ.token) == sig.end()) continue;
      const TableMeta* table = doc->find_table(occ.ref.table);
      if (table == nullptr) continue;
      Site site{occ.token, occ.token + 1, {}};
      for (const auto& c : table->columns) {
        if (c.ref.column == occ.ref.column) continue;
        site.replacements.push_back(plain_identifier(c.ref.column) ? c.ref.column : quote_identifier(c.ref.column));
      }
      if (!site.replacements.empty()) sites[MutationKind::kColumnSwap].push_back(std::move(site));
    }
  }

  std::vector<MutationKind> kinds;
  for (const auto& [kind, list] : sites) {
    if (!list.empty()) kinds.push_back(kind);
  }
  if (kinds.empty()) throw Error(ErrorCode::kNoApplicableMutation, "no mutation applies to: " + std::string(gold));

  Rng rng(seed);
  const MutationKind kind = kinds[rng.below(kinds.size())];
  const auto& list = sites[kind];
  const Site& site = list[rng.below(list.size())];
  const std::string& replacement = site.replacements[rng.below(site.replacements.size())];

  std::string out;
  for (std::size_t i = 0; i < site.begin; ++i) out += tokens[i].text;
  out += replacement;
  for (std::size_t i = site.end; i < tokens.size(); ++i) out += tokens[i].text;
  return {out, kind};
}

// ---- multi-task corpus --------------------------------------------------

std::vector<std::size_t> apportion(std::size_t n, const TaskMix& mix) {
  const std::vector<double> weights = {mix.text2sql, mix.question_inference, mix.evidence_inference,
                                       mix.self_refine};
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "task mix weights must be non-negative");
    total += w;
  }
  if (total <= 0.0) throw Error(ErrorCode::kInvalidArgument, "task mix weights sum to zero");

  std::vector<std::size_t> counts(weights.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = static_cast<double>(n) * weights[i] / total;
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[i];
    remainders.push_back({exact - static_cast<double>(counts[i]), i});
  }
  std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i % remainders.size()].second];
  return counts;
}

std::vector<TrainingSample> synth_multitask(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                            const PromptLibrary& prompts, const MultitaskOptions& options,
                                            SynthStats& stats) {
  struct Eligible {
    std::size_t item;
    Resolved where;
    ExecutionOutcome gold;
    TrainingTask task = TrainingTask::kText2Sql;
  };
  std::vector<Eligible> eligible;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Resolved where = resolve(catalog, items[i]);
    ExecutionOutcome gold = execute(items[i].gold_sql, where.db, options.timeout_ms);
    if (!gold.ok()) {
      ++stats.gold_failures;
      stats.log.push_back(item_tag(items[i]) + ": gold SQL " + std::string(exec_status_name(gold.status)) + ", skipped");
      continue;
    }
    eligible.push_back({i, std::move(where), std::move(gold)});
  }

  // Seeded assignment; evidence inference draws only from items that have
  // evidence, any shortfall goes to text2sql.
  auto quotas = apportion(eligible.size(), options.mix);
  std::vector<std::size_t> order(eligible.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng assign_rng(derive_seed(options.seed, 0x7461736BULL));
  assign_rng.shuffle(order);
  std::vector<bool> taken(eligible.size(), false);
  std::size_t evidence_needed = quotas[2];
  for (std::size_t e : order) {
    if (evidence_needed == 0) break;
    if (items[eligible[e].item].evidence.empty()) continue;
    eligible[e].task = TrainingTask::kEvidenceInference;
    taken[e] = true;
    --evidence_needed;
  }
  if (evidence_needed > 0) {
    stats.reassigned += evidence_needed;
    stats.log.push_back(std::to_string(evidence_needed) + " evidence-inference slots reassigned to text2sql");
    quotas[0] += evidence_needed;
  }
  const std::pair<TrainingTask, std::size_t> rest[] = {{TrainingTask::kText2Sql, quotas[0]},
                                                       {TrainingTask::kQuestionInference, quotas[1]},
                                                       {TrainingTask::kSelfRefine, quotas[3]}};
  std::size_t slot = 0;
  std::size_t used = 0;
  for (std::size_t e : order) {
    if (taken[e]) continue;
    while (slot < std::size(rest) && used == rest[slot].second) {
      ++slot;
      used = 0;
    }
    eligible[e].task = slot < std::size(rest) ? rest[slot].first : TrainingTask::kText2Sql;
    ++used;
  }

  std::vector<std::string> evidence_texts;
  for (const auto& item : items) {
    if (!item.evidence.empty() &&
        std::find(evidence_texts.begin(), evidence_texts.end(), item.evidence) == evidence_texts.end()) {
      evidence_texts.push_back(item.evidence);
    }
  }

  std::vector<TrainingSample> out;
  for (const auto& e : eligible) {
    const BenchItem& item = items[e.item];
    const std::string schema = render_schema(*e.where.doc);
    TrainingSample sample;
    sample.task = e.task;
    sample.meta = base_meta(item);
    switch (e.task) {
      case TrainingTask::kText2Sql:
        sample.prompt = render_prompt(prompts.get(prompt_ids::kText2Sql),
                                      {{"schema", schema}, {"question", item.question}, {"evidence", item.evidence}});
        sample.target = item.gold_sql;
        break;
      case TrainingTask::kQuestionInference:
        sample.prompt = render_prompt(prompts.get(prompt_ids::kTaskQuestionInference),
                                      {{"schema", schema}, {"evidence", item.evidence}, {"sql", item.gold_sql}});
        sample.target = item.question;
        break;
      case TrainingTask::kEvidenceInference: {
        std::vector<std::string> distractors;
        for (const auto& t : evidence_texts) {
          if (t != item.evidence) distractors.push_back(t);
        }
        Rng rng(derive_seed(options.seed, 0x65766964ULL, e.item));
        rng.shuffle(distractors);
        if (distractors.size() > options.evidence_distractors) distractors.resize(options.evidence_distractors);
        std::vector<std::string> pool = distractors;
        pool.push_back(item.evidence);
        rng.shuffle(pool);
        std::string listing;
        std::size_t gold_position = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
          if (pool[i] == item.evidence) gold_position = i;
          listing += std::to_string(i + 1) + ". " + pool[i] + "\n";
        }
        sample.prompt = render_prompt(prompts.get(prompt_ids::kTaskEvidenceInference),
                                      {{"schema", schema},
                                       {"question", item.question},
                                       {"sql", item.gold_sql},
                                       {"evidence_pool", listing}});
        sample.target = item.evidence;
        sample.meta["evidence_pool"] = pool;
        sample.meta["gold_position"] = gold_position;
        break;
      }
      case TrainingTask::kSelfRefine: {
        std::optional<Mutation> chosen;
        ExecutionOutcome mutated_outcome;
        for (int attempt = 0; attempt < options.max_mutation_attempts && !chosen; ++attempt) {
          Mutation m;
          try {
            m = mutate_sql(item.gold_sql, derive_seed(options.seed, e.item, static_cast<std::uint64_t>(attempt) + 1),
                           e.where.doc.get());
          } catch (const Error& err) {
            if (err.code() == ErrorCode::kNoApplicableMutation) break;
            throw;
          }
          if (m.sql == item.gold_sql) continue;
          ExecutionOutcome o = execute(m.sql, e.where.db, options.timeout_ms);
          if (equivalent(o, e.gold, options.mode)) continue;
          chosen = std::move(m);
          mutated_outcome = std::move(o);
        }
        if (!chosen) {
          ++stats.mutation_skips;
          stats.log.push_back(item_tag(item) + ": no result-changing mutation, self_refine sample skipped");
          continue;
        }
        sample.prompt = render_prompt(prompts.get(prompt_ids::kTaskSelfRefine),
                                      {{"schema", schema},
                                       {"question", item.question},
                                       {"evidence", item.evidence},
                                       {"prev_sql", chosen->sql},
                                       {"exec_feedback", describe_outcome(mutated_outcome)}});
        sample.target = item.gold_sql;
        sample.meta["mutation"] = mutation_kind_name(chosen->kind);
        sample.meta["mutated_sql"] = chosen->sql;
        sample.meta["mutated_status"] = exec_status_name(mutated_outcome.status);
        break;
      }
      case TrainingTask::kSelection: break;
    }
    emit(out, stats, std::move(sample));
  }
  return out;
}

// ---- selection corpus ---------------------------------------------------

std::vector<TrainingSample> synth_selection(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                            const CandidateSource& source, const PromptLibrary& prompts,
                                            const BalancePolicy& policy, SynthStats& stats) {
  if (policy.list_size < 2) throw Error(ErrorCode::kInvalidArgument, "selection lists need at least 2 candidates");
  Rng rng(derive_seed(policy.seed, 0x73656CULL));
  std::map<std::size_t, Deck> position_decks;
  Deck negatives_deck(policy.list_size - 1);
  std::map<std::string, std::size_t> generator_counts;

  std::vector<TrainingSample> out;
  for (const auto& item : items) {
    const Resolved where = resolve(catalog, item);
    const ExecutionOutcome gold = execute(item.gold_sql, where.db, policy.timeout_ms);
    if (!gold.ok()) {
      ++stats.gold_failures;
      stats.log.push_back(item_tag(item) + ": gold SQL " + std::string(exec_status_name(gold.status)) + ", skipped");
      continue;
    }
    std::vector<CandidateSql> candidates;
    try {
      candidates = source(item);
    } catch (const Error& e) {
      if (!is_backend_error(e.code()) && e.code() != ErrorCode::kExtractionFailure) throw;
      ++stats.source_failures;
      stats.log.push_back(item_tag(item) + ": candidate generation failed: " + e.what());
      continue;
    }

    // Positive: the correct candidate whose generator is least represented.
    const CandidateSql* positive = nullptr;
    for (const auto& c : candidates) {
      if (!c.outcome.ok() || !equivalent(c.outcome, gold, policy.mode)) continue;
      if (positive == nullptr || generator_counts[c.generator_id] < generator_counts[positive->generator_id]) {
        positive = &c;
      }
    }
    if (positive == nullptr) {
      ++stats.no_correct_candidate;
      stats.log.push_back(item_tag(item) + ": no candidate matches gold, skipped");
      continue;
    }

    struct Entry {
      std::string sql;
      std::string generator;
    };
    const std::string positive_sql = deformalize(positive->sql);
    std::set<std::string> seen = {positive_sql};
    std::vector<Entry> negatives;
    for (const auto& c : candidates) {
      if (!c.outcome.ok() || equivalent(c.outcome, gold, policy.mode)) continue;
      std::string d = deformalize(c.sql);
      if (seen.insert(d).second) negatives.push_back({std::move(d), c.generator_id});
    }

    const std::size_t wanted = policy.vary_negatives ? negatives_deck.draw(rng) + 1 : policy.list_size - 1;
    if (negatives.size() > wanted) {
      rng.shuffle(negatives);
      negatives.resize(wanted);
    }
    if (negatives.size() < wanted && policy.augment_with_mutations) {
      for (std::uint64_t attempt = 1; attempt <= 4 * wanted && negatives.size() < wanted; ++attempt) {
        Mutation m;
        try {
          m = mutate_sql(positive->sql, derive_seed(policy.seed, static_cast<std::uint64_t>(item.question_id), attempt),
                         where.doc.get());
        } catch (const Error& e) {
          if (e.code() == ErrorCode::kNoApplicableMutation || e.code() == ErrorCode::kInvalidArgument) break;
          throw;
        }
        const ExecutionOutcome o = execute(m.sql, where.db, policy.timeout_ms);
        if (!o.ok() || equivalent(o, gold, policy.mode)) continue;
        std::string d = deformalize(m.sql);
        if (seen.insert(d).second) negatives.push_back({std::move(d), "mutation"});
      }
    }
    if (negatives.size() < wanted) {
      ++stats.insufficient_negatives;
      stats.log.push_back(item_tag(item) + ": only " + std::to_string(negatives.size()) + " wrong candidates, skipped");
      continue;
    }

    const std::size_t list_size = wanted + 1;
    const std::size_t position = position_decks.try_emplace(list_size, list_size).first->second.draw(rng);
    rng.shuffle(negatives);
    std::vector<Entry> listing = negatives;
    listing.insert(listing.begin() + static_cast<std::ptrdiff_t>(position), Entry{positive_sql, positive->generator_id});

    std::string rendered;
    json sqls = json::array();
    json generators = json::array();
    for (std::size_t i = 0; i < listing.size(); ++i) {
      rendered += "Candidate " + std::to_string(i + 1) + ":\n" + listing[i].sql + "\n";
      sqls.push_back(listing[i].sql);
      generators.push_back(listing[i].generator);
    }
    TrainingSample sample;
    sample.task = TrainingTask::kSelection;
    sample.prompt = render_prompt(prompts.get(prompt_ids::kTaskSelection), {{"schema", render_schema(*where.doc)},
                                                                            {"question", item.question},
                                                                            {"evidence", item.evidence},
                                                                            {"candidates", rendered}});
    sample.target = std::to_string(position + 1);
    sample.meta = base_meta(item);
    sample.meta["candidates"] = std::move(sqls);
    sample.meta["generators"] = std::move(generators);
    sample.meta["list_size"] = list_size;
    sample.meta["correct_position"] = position;
    sample.meta["negatives"] = wanted;
    sample.meta["positive_generator"] = positive->generator_id;
    ++generator_counts[positive->generator_id];
    emit(out, stats, std::move(sample));
  }
  return out;
}

double max_relative_deviation(const std::vector<std::size_t>& counts) {
  if (counts.empty()) return 0.0;
  const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (total == 0.0) return 0.0;
  const double mean = total / static_cast<double>(counts.size());
  double worst = 0.0;
  for (std::size_t c : counts) worst = std::max(worst, std::abs(static_cast<double>(c) - mean) / mean);
  return worst;
}

BalanceReport balance_report(const std::vector<TrainingSample>& samples) {
  BalanceReport report;
  for (const auto& s : samples) {
    if (s.task != TrainingTask::kSelection) continue;
    const auto size = s.meta.at("list_size").get<std::size_t>();
    auto& counts = report.positions[size];
    counts.resize(size);
    ++counts.at(s.meta.at("correct_position").get<std::size_t>());
    ++report.negatives[s.meta.at("negatives").get<std::size_t>()];
    ++report.generators[s.meta.at("positive_generator").get<std::string>()];
  }
  for (const auto& [size, counts] : report.positions) {
    report.max_position_deviation = std::max(report.max_position_deviation, max_relative_deviation(counts));
  }
  auto values = [](const auto& m) {
    std::vector<std::size_t> v;
    for (const auto& [k, n] : m) v.push_back(n);
    return v;
  };
  report.max_combination_deviation = max_relative_deviation(values(report.negatives));
  report.max_generator_deviation = max_relative_deviation(values(report.generators));
  return report;
}

bool BalanceReport::within(double tolerance) const {
  return max_position_deviation <= tolerance && max_combination_deviation <= tolerance &&
         max_generator_deviation <= tolerance;
}

json BalanceReport::to_json() const {
  json pos = json::object();
  for (const auto& [size, counts] : positions) pos[std::to_string(size)] = counts;
  json neg = json::object();
  for (const auto& [k, n] : negatives) neg[std::to_string(k)] = n;
  return {{"positions", pos},
          {"negatives", neg},
          {"generators", generators},
          {"max_position_deviation", max_position_deviation},
          {"max_combination_deviation", max_combination_deviation},
          {"max_generator_deviation", max_generator_deviation}};
}

// ---- reformulation ------------------------------------------------------

std::string_view reformat_style_name(ReformatStyle style) {
  return style == ReformatStyle::kComplexPattern ? "complex_pattern" : "standardized";
}

ReformatStyle parse_reformat_style(std::string_view name) {
  if (name == "complex_pattern" || name == "complex") return ReformatStyle::kComplexPattern;
  if (name == "standardized" || name == "standard") return ReformatStyle::kStandardized;
  throw Error(ErrorCode::kConfigInvalid, "unknown reformat style " + std::string(name));
}

ReformatResult reformat_sql(const std::string& gold, ReformatStyle style, const BackendRegistry& backends,
                            const PromptLibrary& prompts, const SchemaDoc& doc,
                            const std::filesystem::path& db_file, SynthStats& stats, EquivalenceMode mode,
                            std::int64_t timeout_ms) {
  const auto& tmpl = prompts.get(style == ReformatStyle::kComplexPattern ? prompt_ids::kReformatComplex
                                                                          : prompt_ids::kReformatStandard);
  auto request = build_request(tmpl, {{"schema", render_schema(doc)}, {"sql", gold}}, std::string(roles::kReformat),
                               kGeneratorTemperature);
  const std::string reply = backends.chat(request);

  ReformatResult result{gold, false, {}};
  auto reject = [&](std::string reason) {
    result.reason = std::move(reason);
    ++stats.reformat_rejected;
    stats.log.push_back("reformat rejected: " + result.reason);
    return result;
  };
  std::string rewrite;
  try {
    rewrite = extract_sql(reply);
  } catch (const Error&) {
    return reject("no SQL in reply");
  }
  const ExecutionOutcome gold_outcome = execute(gold, db_file, timeout_ms);
  if (!gold_outcome.ok()) return reject("gold SQL " + std::string(exec_status_name(gold_outcome.status)));
  const ExecutionOutcome outcome = execute(rewrite, db_file, timeout_ms);
  if (!equivalent(outcome, gold_outcome, mode)) {
    return reject("rewrite not equivalent (" + std::string(exec_status_name(outcome.status)) + ")");
  }
  ++stats.reformat_accepted;
  result.sql = std::move(rewrite);
  result.accepted = true;
  return result;
}

std::vector<TrainingSample> synth_reformat(const std::vector<BenchItem>& items, const DatabaseCatalog& catalog,
                                           const std::vector<ReformatStyle>& styles, const BackendRegistry& backends,
                                           const PromptLibrary& prompts, SynthStats& stats, EquivalenceMode mode,
                                           std::int64_t timeout_ms) {
  std::vector<TrainingSample> out;
  for (const auto& item : items) {
    const Resolved where = resolve(catalog, item);
    const ExecutionOutcome gold = execute(item.gold_sql, where.db, timeout_ms);
    if (!gold.ok()) {
      ++stats.gold_failures;
      stats.log.push_back(item_tag(item) + ": gold SQL " + std::string(exec_status_name(gold.status)) + ", skipped");
      continue;
    }
    const std::string schema = render_schema(*where.doc);
    for (ReformatStyle style : styles) {
      ReformatResult r;
      try {
        r = reformat_sql(item.gold_sql, style, backends, prompts, *where.doc, where.db, stats, mode, timeout_ms);
      } catch (const Error& e) {
        throw Error(e.code(), item_tag(item) + ": " + e.message());
      }
      TrainingSample sample;
      sample.task = TrainingTask::kText2Sql;
      sample.prompt = render_prompt(prompts.get(prompt_ids::kText2Sql),
                                    {{"schema", schema}, {"question", item.question}, {"evidence", item.evidence}});
      sample.target = r.sql;
      sample.meta = base_meta(item);
      sample.meta["style"] = reformat_style_name(style);
      sample.meta["accepted"] = r.accepted;
      if (!r.accepted) sample.meta["rejection"] = r.reason;
      emit(out, stats, std::move(sample));
    }
  }
  return out;
}

}  // namespace multisql
