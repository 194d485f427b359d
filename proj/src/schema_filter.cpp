#include "multisql/schema_filter.hpp"

#include <algorithm>
#include <map>

#include "multisql/error.hpp"
#include "multisql/sql_lexer.hpp"
#include "multisql/sqlite_db.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

std::vector<std::string> dedupe_keywords(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& item : raw) {
    std::string_view k = text::trim(item);
    // Strip list decorations models like to add.
    while (!k.empty() && (k.front() == '-' || k.front() == '*' || k.front() == '"' || k.front() == '\'' ||
                          k.front() == '`' || k.front() == '[')) {
      k.remove_prefix(1);
    }
    while (!k.empty() && (k.back() == '"' || k.back() == '\'' || k.back() == '`' || k.back() == ']' ||
                          k.back() == '.')) {
      k.remove_suffix(1);
    }
    k = text::trim(k);
    if (k.empty()) continue;
    if (seen.insert(text::to_lower(k)).second) out.emplace_back(k);
  }
  return out;
}

KeywordSet extract_keywords(const BackendRegistry& backends, const PromptLibrary& prompts,
                            const std::string& question, const std::string& evidence) {
  if (text::trim(question).empty()) throw Error(ErrorCode::kInvalidArgument, "empty question");
  KeywordSet out{{}, question, evidence, false};
  auto request = build_request(prompts.get(prompt_ids::kKeywords), {{"question", question}, {"evidence", evidence}},
                               std::string(roles::kSchema), kSchemaTemperature);
  const std::string reply = backends.chat(request);
  out.keywords = dedupe_keywords(text::split_any(reply, ",;\n"));
  if (out.keywords.empty()) {
    out.used_fallback = true;
    out.keywords = dedupe_keywords(text::content_words(question + " " + evidence));
  }
  return out;
}

std::vector<ScoredColumn> score_columns_from_vectors(const SchemaDoc& doc, const std::vector<std::string>& keywords,
                                                     const EmbeddingVector& question_vector,
                                                     const std::vector<EmbeddingVector>& table_vectors,
                                                     const std::vector<EmbeddingVector>& column_vectors,
                                                     const std::vector<EmbeddingVector>& keyword_vectors) {
  if (table_vectors.size() != doc.tables().size() || column_vectors.size() != doc.column_count() ||
      keyword_vectors.size() != keywords.size()) {
    throw Error(ErrorCode::kInvalidArgument, "vector counts do not match the schema");
  }
  // Table relevance is shared by every column of the table.
  std::vector<double> table_score;
  std::vector<std::size_t> column_table;
  for (std::size_t t = 0; t < doc.tables().size(); ++t) {
    table_score.push_back(cosine(question_vector, table_vectors[t]));
    for (std::size_t c = 0; c < doc.tables()[t].columns.size(); ++c) column_table.push_back(t);
  }
  const auto columns = doc.all_columns();
  std::vector<ScoredColumn> out;
  out.reserve(keywords.size() * columns.size());
  for (std::size_t k = 0; k < keywords.size(); ++k) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t c = 0; c < columns.size(); ++c) {
      ranked.emplace_back(table_score[column_table[c]] * cosine(keyword_vectors[k], column_vectors[c]), c);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [score, c] : ranked) out.push_back({columns[c], keywords[k], score});
  }
  return out;
}

std::vector<ScoredColumn> score_columns(const KeywordSet& keywords, const SchemaDoc& doc, EmbeddingBackend& embedder) {
  if (doc.column_count() == 0) throw Error(ErrorCode::kInvalidArgument, "schema has no columns");
  if (keywords.keywords.empty()) return {};
  std::string qe = keywords.source_question;
  if (!keywords.source_evidence.empty()) qe += " " + keywords.source_evidence;

  std::vector<std::string> texts{qe};
  for (const auto& table : doc.tables()) texts.push_back(table_metadata_text(table));
  for (const auto& table : doc.tables()) {
    for (const auto& column : table.columns) texts.push_back(column_metadata_text(doc, column));
  }
  for (const auto& k : keywords.keywords) texts.push_back(k);
  auto vectors = embedder.embed(texts);
  if (vectors.size() != texts.size()) throw Error(ErrorCode::kBackendFailure, "embedding count mismatch");

  auto it = vectors.begin();
  EmbeddingVector question_vector = *it++;
  std::vector<EmbeddingVector> table_vectors(it, it + static_cast<std::ptrdiff_t>(doc.tables().size()));
  it += static_cast<std::ptrdiff_t>(doc.tables().size());
  std::vector<EmbeddingVector> column_vectors(it, it + static_cast<std::ptrdiff_t>(doc.column_count()));
  it += static_cast<std::ptrdiff_t>(doc.column_count());
  std::vector<EmbeddingVector> keyword_vectors(it, vectors.end());
  return score_columns_from_vectors(doc, keywords.keywords, question_vector, table_vectors, column_vectors,
                                    keyword_vectors);
}

std::size_t distance_cap(std::string_view keyword, std::size_t min_cap) {
  return std::max(keyword.size(), min_cap);
}

std::vector<EditMatch> top_k_by_edit_distance(std::string_view keyword, const std::vector<std::string>& values,
                                              std::size_t k, std::size_t cap) {
  const std::string needle = text::to_lower(keyword);
  std::vector<EditMatch> hits;
  for (const auto& value : values) {
    const std::size_t d = text::levenshtein(needle, text::to_lower(value), cap);
    if (d <= cap) hits.push_back({value, d});
  }
  auto by_rank = [](const EditMatch& a, const EditMatch& b) {
    return a.distance != b.distance ? a.distance < b.distance : a.value < b.value;
  };
  if (hits.size() > k) {
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), by_rank);
    hits.resize(k);
  } else {
    std::sort(hits.begin(), hits.end(), by_rank);
  }
  return hits;
}

std::set<std::string> lsh_tokens(const SubwordTokenizer& tokenizer, std::string_view value, const ColumnRef& column) {
  return tokenizer.tokenize(std::string(value) + " " + column.table + " " + column.column);
}

std::vector<RetrievedValue> retrieve_column_values(const std::string& keyword, const ColumnRef& column,
                                                   const std::vector<std::string>& values,
                                                   const RetrievalConfig& config, EmbeddingBackend& embedder,
                                                   const SubwordTokenizer& tokenizer, const MinHashLsh& lsh) {
  auto matches = top_k_by_edit_distance(keyword, values, config.top_k_values,
                                        distance_cap(keyword, config.min_distance_cap));
  if (config.lsh_enabled && !matches.empty()) {
    const auto probe = lsh.signature(lsh_tokens(tokenizer, keyword, column));
    std::erase_if(matches, [&](const EditMatch& m) {
      return !lsh.collide(probe, lsh.signature(lsh_tokens(tokenizer, m.value, column)));
    });
  }
  // Empty values cannot be embedded and never match anything useful.
  std::erase_if(matches, [](const EditMatch& m) { return m.value.empty(); });
  if (matches.empty()) return {};

  std::vector<std::string> texts{keyword};
  for (const auto& m : matches) texts.push_back(m.value);
  auto vectors = embedder.embed(texts);
  std::vector<RetrievedValue> out;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const double c = cosine(vectors[0], vectors[i + 1]);
    if (c >= config.value_threshold) out.push_back({column, keyword, matches[i].value, matches[i].distance, c});
  }
  return out;
}

bool is_text_type(std::string_view data_type) {
  const std::string t = text::to_upper(data_type);
  return t.empty() || t.find("TEXT") != std::string::npos || t.find("CHAR") != std::string::npos ||
         t.find("CLOB") != std::string::npos || t.find("STRING") != std::string::npos;
}

std::vector<std::string> distinct_text_values(const std::filesystem::path& db_file, const ColumnRef& column) {
  SqliteDb db = SqliteDb::open_readonly(db_file);
  std::vector<std::string> out;
  const std::string col = quote_identifier(column.column);
  db.query("SELECT DISTINCT CAST(" + col + " AS TEXT) FROM " + quote_identifier(column.table) + " WHERE " + col +
               " IS NOT NULL",
           [&](const Row& row) {
             out.push_back(cell_to_string(row[0]));
             return true;
           });
  return out;
}

std::vector<RetrievedValue> retrieve_values(const KeywordSet& keywords, const std::filesystem::path& db_file,
                                            const SchemaDoc& doc, const RetrievalConfig& config,
                                            EmbeddingBackend& embedder, const SubwordTokenizer& tokenizer) {
  // Open once up front so an unreadable file fails fast.
  SqliteDb::open_readonly(db_file);
  if (keywords.keywords.empty()) return {};
  const MinHashLsh lsh(config.lsh_shape);
  std::vector<RetrievedValue> out;
  std::map<ColumnRef, std::vector<std::string>> cache;
  for (const auto& table : doc.tables()) {
    for (const auto& column : table.columns) {
      if (is_text_type(column.data_type)) cache.emplace(column.ref, distinct_text_values(db_file, column.ref));
    }
  }
  for (const auto& keyword : keywords.keywords) {
    for (const auto& table : doc.tables()) {
      for (const auto& column : table.columns) {
        auto it = cache.find(column.ref);
        if (it == cache.end()) continue;
        auto hits = retrieve_column_values(keyword, column.ref, it->second, config, embedder, tokenizer, lsh);
        out.insert(out.end(), hits.begin(), hits.end());
      }
    }
  }
  return out;
}

ColumnSet build_retrieved_schema(const std::vector<ScoredColumn>& scored, const std::vector<RetrievedValue>& values,
                                 const SchemaDoc& doc, std::size_t top_k_columns) {
  ColumnSet out;
  std::map<std::string, std::size_t> taken;
  for (const auto& s : scored) {
    // `scored` is already ranked per keyword.
    if (taken[s.keyword]++ < top_k_columns) out.insert(s.ref);
  }
  for (const auto& v : values) out.insert(v.column);
  for (auto& key : pf_key_closure(doc, out)) out.insert(key);
  return out;
}

ColumnSet parse_column_selection(const std::string& reply, const SchemaDoc& doc, const ColumnSet& allowed) {
  // Expand `a.b` quoted as one identifier into a, '.', b.
  std::vector<std::string> parts;
  for (const auto& token : sql::significant(sql::tokenize(reply))) {
    if (token.kind == sql::TokenKind::kQuotedIdent || token.kind == sql::TokenKind::kString) {
      std::string inner = token.kind == sql::TokenKind::kQuotedIdent ? token.identifier()
                                                                    : token.text.substr(1, token.text.size() - 2);
      auto dot = inner.find('.');
      if (dot != std::string::npos) {
        parts.push_back(inner.substr(0, dot));
        parts.push_back(".");
        parts.push_back(inner.substr(dot + 1));
      } else {
        parts.push_back(inner);
      }
    } else {
      parts.push_back(token.text);
    }
  }
  ColumnSet out;
  for (std::size_t i = 0; i + 2 < parts.size(); ++i) {
    if (parts[i + 1] != ".") continue;
    if (auto ref = doc.resolve(parts[i], parts[i + 2]); ref && allowed.contains(*ref)) out.insert(*ref);
  }
  return out;
}

ColumnSelectionResult select_columns(const BackendRegistry& backends, const PromptLibrary& prompts,
                                     const SchemaDocPtr& doc, const ColumnSet& retrieved,
                                     const std::string& question, const std::string& evidence, int iterations) {
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "column selection needs at least one iteration");
  ColumnSelectionResult result;
  ColumnSet pool = retrieved;
  ColumnSet previous;
  for (int i = 1; i <= iterations; ++i) {
    SelectionIteration iter;
    if (!pool.empty()) {
      auto request = build_request(prompts.get(prompt_ids::kColumnSelect),
                                   {{"schema", render_schema(*doc, &pool)}, {"question", question}, {"evidence", evidence}},
                                   std::string(roles::kSchema), kSchemaTemperature);
      iter.reply = backends.chat(request);
      iter.selected = parse_column_selection(iter.reply, *doc, pool);
    }
    iter.unparseable = iter.selected.empty();
    iter.keys = pf_key_closure(*doc, iter.selected);

    ColumnSet unified = previous;
    unified.insert(iter.selected.begin(), iter.selected.end());
    unified.insert(iter.keys.begin(), iter.keys.end());
    SchemaSubset subset(doc, std::move(unified), i);
    previous = subset.columns();
    result.subsets.push_back(std::move(subset));

    for (const auto& ref : iter.selected) {
      if (!iter.keys.contains(ref)) pool.erase(ref);
    }
    result.iterations.push_back(std::move(iter));
  }
  return result;
}

namespace {

json refs_to_json(const ColumnSet& refs) {
  json out = json::array();
  for (const auto& r : refs) out.push_back(r.qualified());
  return out;
}

}  // namespace

json SchemaFilterReport::to_json(std::size_t top_k_columns) const {
  json top = json::object();
  std::map<std::string, std::size_t> taken;
  for (const auto& s : scored) {
    if (taken[s.keyword]++ >= top_k_columns) continue;
    top[s.keyword].push_back({{"column", s.ref.qualified()}, {"score", s.score}});
  }
  json vals = json::array();
  for (const auto& v : values) {
    vals.push_back({{"keyword", v.keyword},
                    {"column", v.column.qualified()},
                    {"value", v.value_text},
                    {"edit_distance", v.edit_distance},
                    {"cosine", v.cosine}});
  }
  json subsets = json::array();
  for (std::size_t i = 0; i < selection.subsets.size(); ++i) {
    const auto& it = selection.iterations[i];
    subsets.push_back({{"index", selection.subsets[i].iteration_index()},
                       {"selected", refs_to_json(it.selected)},
                       {"keys", refs_to_json(it.keys)},
                       {"unparseable", it.unparseable},
                       {"columns", refs_to_json(selection.subsets[i].columns())}});
  }
  return {{"question", keywords.source_question},
          {"evidence", keywords.source_evidence},
          {"keywords", keywords.keywords},
          {"keyword_fallback", keywords.used_fallback},
          {"top_columns", std::move(top)},
          {"values", std::move(vals)},
          {"retrieved", refs_to_json(retrieved)},
          {"retrieved_fallback_to_full", retrieved_fallback_to_full},
          {"subsets", std::move(subsets)}};
}

}  // namespace multisql
