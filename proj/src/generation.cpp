#include "multisql/generation.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>

#include "multisql/error.hpp"
#include "multisql/jsonl.hpp"
#include "multisql/sql_lexer.hpp"
#include "multisql/text.hpp"

namespace multisql {

using nlohmann::json;

DemonstrationPool::DemonstrationPool(std::vector<Demo> demos, std::shared_ptr<EmbeddingBackend> embedder)
    : demos_(std::move(demos)), embedder_(std::move(embedder)) {
  if (!embedder_) throw Error(ErrorCode::kConfigInvalid, "demonstration pool needs an embedder");
  if (demos_.empty()) return;
  std::vector<std::string> questions;
  for (const auto& d : demos_) questions.push_back(d.question.empty() ? d.sql : d.question);
  vectors_ = embedder_->embed(questions);
}

std::vector<DemonstrationPool::Demo> DemonstrationPool::nearest(const std::string& question, std::size_t shots) const {
  if (demos_.empty() || shots == 0 || question.empty()) return {};
  const auto probe = embedder_->embed({question}).front();
  std::vector<std::pair<double, std::size_t>> ranked;
  for (std::size_t i = 0; i < demos_.size(); ++i) ranked.emplace_back(cosine(probe, vectors_[i]), i);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<Demo> out;
  for (std::size_t i = 0; i < ranked.size() && out.size() < shots; ++i) {
    // A demo identical to the asked question would leak the answer.
    if (demos_[ranked[i].second].question == question) continue;
    out.push_back(demos_[ranked[i].second]);
  }
  return out;
}

std::string DemonstrationPool::render(const std::string& question, std::size_t shots) const {
  std::string out;
  int n = 0;
  for (const auto& d : nearest(question, shots)) {
    out += "Example " + std::to_string(++n) + "\nQuestion: " + d.question + "\n";
    if (!d.evidence.empty()) out += "Evidence: " + d.evidence + "\n";
    out += "```sql\n" + d.sql + "\n```\n";
  }
  return out;
}

void validate_bindings(const std::vector<GeneratorBinding>& bindings) {
  if (bindings.empty()) throw Error(ErrorCode::kConfigInvalid, "no generators configured");
  std::set<int> ranks;
  std::set<std::string> ids;
  for (const auto& b : bindings) {
    if (b.generator_id.empty() || !ids.insert(b.generator_id).second) {
      throw Error(ErrorCode::kConfigInvalid, "generator ids must be unique and non-empty");
    }
    ranks.insert(b.rank);
  }
  if (ranks.size() != bindings.size() || *ranks.begin() != 1 ||
      *ranks.rbegin() != static_cast<int>(bindings.size())) {
    throw Error(ErrorCode::kConfigInvalid, "generator ranks must be a permutation of 1..p_m");
  }
}

std::string_view generation_failure_name(GenerationFailure failure) {
  switch (failure) {
    case GenerationFailure::kNone: return "none";
    case GenerationFailure::kBackend: return "backend";
    case GenerationFailure::kExtraction: return "extraction";
  }
  return "none";
}

json CandidateSql::to_json(bool with_timing) const {
  json rows = json::array();
  for (const auto& row : outcome.rows) {
    json r = json::array();
    for (const auto& cell : row) r.push_back(cell_to_json(cell));
    rows.push_back(std::move(r));
  }
  json out = {{"sql", sql},
              {"generator_id", generator_id},
              {"schema_index", schema_index},
              {"refined", refined},
              {"backend_calls", backend_calls},
              {"failure", generation_failure_name(failure)},
              {"initial_sql", initial_sql},
              {"outcome",
               {{"status", exec_status_name(outcome.status)},
                {"message", outcome.message},
                {"columns", outcome.column_names},
                {"rows", std::move(rows)}}}};
  if (with_timing) out["outcome"]["elapsed_ms"] = outcome.elapsed_ms;
  return out;
}

CandidateSql CandidateSql::from_json(const json& j) {
  CandidateSql c;
  c.sql = j.at("sql").get<std::string>();
  c.generator_id = j.at("generator_id").get<std::string>();
  c.schema_index = j.value("schema_index", 1);
  c.refined = j.value("refined", false);
  c.backend_calls = j.value("backend_calls", 0);
  c.initial_sql = j.value("initial_sql", std::string());
  const std::string failure = j.value("failure", std::string("none"));
  c.failure = failure == "backend"      ? GenerationFailure::kBackend
              : failure == "extraction" ? GenerationFailure::kExtraction
                                        : GenerationFailure::kNone;
  const auto& o = j.at("outcome");
  c.outcome.status = parse_exec_status(o.at("status").get<std::string>());
  c.outcome.message = o.value("message", std::string());
  c.outcome.column_names = o.value("columns", std::vector<std::string>{});
  for (const auto& r : o.value("rows", json::array())) {
    Row row;
    for (const auto& cell : r) row.push_back(cell_from_json(cell));
    c.outcome.rows.push_back(std::move(row));
  }
  c.outcome.elapsed_ms = o.value("elapsed_ms", 0);
  return c;
}

namespace {

// Text up to the first semicolon outside quotes and comments.
std::string first_statement(std::string_view s) {
  std::string out;
  for (const auto& token : sql::tokenize(s)) {
    if (token.kind == sql::TokenKind::kPunct && token.text == ";") break;
    out += token.text;
  }
  return std::string(text::trim(out));
}

std::optional<std::string> last_fenced_block(const std::string& reply) {
  std::optional<std::string> found;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = reply.find("```", pos);
    if (open == std::string::npos) break;
    const std::size_t close = reply.find("```", open + 3);
    if (close == std::string::npos) break;
    std::string body = reply.substr(open + 3, close - open - 3);
    // Drop a language tag line such as "sql".
    const std::size_t eol = body.find('\n');
    if (eol != std::string::npos) {
      const auto tag = text::trim(std::string_view(body).substr(0, eol));
      if (tag.find_first_of(" \t") == std::string_view::npos && !sql::is_keyword(tag)) body.erase(0, eol + 1);
    }
    found = std::move(body);
    pos = close + 3;
  }
  return found;
}

std::optional<std::string> first_select_statement(const std::string& reply) {
  const auto tokens = sql::tokenize(reply);
  std::size_t offset = 0;
  for (const auto& token : tokens) {
    if (token.is_word("SELECT") || token.is_word("WITH")) {
      std::string rest = reply.substr(offset);
      // Prose after a blank line is not part of the query.
      if (auto gap = rest.find("\n\n"); gap != std::string::npos) rest.resize(gap);
      return rest;
    }
    offset += token.text.size();
  }
  return std::nullopt;
}

}  // namespace

std::string extract_sql(const std::string& reply) {
  std::string source;
  if (auto fenced = last_fenced_block(reply)) {
    source = *fenced;
  } else if (auto stmt = first_select_statement(reply)) {
    source = *stmt;
  } else {
    source = reply;
  }
  std::string sql = first_statement(source);
  if (sql.empty()) throw Error(ErrorCode::kExtractionFailure, "no SQL found in model reply");
  return sql;
}

namespace {

struct Attempt {
  std::string sql;
  ExecutionOutcome outcome;
  GenerationFailure failure = GenerationFailure::kNone;
};

Attempt attempt(const GenerationContext& ctx, const ChatRequest& request) {
  Attempt a;
  std::string reply;
  try {
    reply = ctx.backends->chat(request);
  } catch (const Error& e) {
    if (!is_backend_error(e.code())) throw;
    a.failure = GenerationFailure::kBackend;
    a.outcome = ExecutionOutcome::failure(ExecStatus::kRuntimeError, std::string("backend failure: ") + e.what());
    return a;
  }
  try {
    a.sql = extract_sql(reply);
  } catch (const Error& e) {
    a.failure = GenerationFailure::kExtraction;
    a.outcome = ExecutionOutcome::failure(ExecStatus::kRuntimeError, e.what());
    return a;
  }
  a.outcome = execute(a.sql, ctx.db_file, ctx.timeout_ms);
  return a;
}

}  // namespace

CandidateSql generate_one(const GenerationContext& ctx, const GeneratorBinding& binding, const std::string& question,
                          const std::string& evidence, const SchemaSubset& schema) {
  if (ctx.backends == nullptr || ctx.prompts == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "generation context is incomplete");
  }
  std::map<std::string, std::string> values = {
      {"schema", render_schema(schema)}, {"question", question}, {"evidence", evidence}};
  if (binding.demonstrations) values["examples"] = binding.demonstrations->render(question, binding.shots);

  CandidateSql candidate;
  candidate.generator_id = binding.generator_id;
  candidate.schema_index = schema.iteration_index();

  auto first = attempt(ctx, build_request(ctx.prompts->get(binding.prompt_template_id), values, binding.backend_role,
                                           binding.temperature));
  candidate.backend_calls = 1;
  if (first.outcome.ok()) {
    candidate.sql = std::move(first.sql);
    candidate.outcome = std::move(first.outcome);
    return candidate;
  }

  // Exactly one self-refine retry, fed with the failed SQL and its outcome.
  values["prev_sql"] = first.sql;
  values["exec_feedback"] = describe_outcome(first.outcome);
  auto second = attempt(ctx, build_request(ctx.prompts->get(binding.refine_template_id), values,
                                            binding.backend_role, binding.temperature));
  candidate.backend_calls = 2;
  candidate.refined = true;
  candidate.initial_sql = std::move(first.sql);
  candidate.sql = std::move(second.sql);
  candidate.outcome = std::move(second.outcome);
  candidate.failure = second.failure;
  return candidate;
}

std::vector<CandidateSql> generate_all(const GenerationContext& ctx, std::vector<GeneratorBinding> bindings,
                                       const std::string& question, const std::string& evidence,
                                       const std::vector<SchemaSubset>& schemas, std::size_t workers) {
  validate_bindings(bindings);
  if (schemas.empty()) throw Error(ErrorCode::kInvalidArgument, "no schema subsets to generate from");
  std::stable_sort(bindings.begin(), bindings.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });

  const std::size_t total = schemas.size() * bindings.size();
  std::vector<CandidateSql> out(total);

  // Group task indices by backend so scripted backends see a fixed call order.
  std::vector<std::vector<std::size_t>> groups;
  std::map<const ChatBackend*, std::size_t> group_of;
  std::vector<std::size_t> unbound;
  for (std::size_t t = 0; t < total; ++t) {
    const auto& binding = bindings[t % bindings.size()];
    std::shared_ptr<ChatBackend> backend;
    try {
      backend = ctx.backends->shared_backend_for(binding.backend_role);
    } catch (const Error&) {
      unbound.push_back(t);
      continue;
    }
    if (!backend->is_scripted()) {
      groups.push_back({t});
      continue;
    }
    auto [it, inserted] = group_of.emplace(backend.get(), groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(t);
  }

  auto run_task = [&](std::size_t t) {
    const auto& schema = schemas[t / bindings.size()];
    out[t] = generate_one(ctx, bindings[t % bindings.size()], question, evidence, schema);
  };
  for (std::size_t t : unbound) {
    const auto& binding = bindings[t % bindings.size()];
    CandidateSql c;
    c.generator_id = binding.generator_id;
    c.schema_index = schemas[t / bindings.size()].iteration_index();
    c.failure = GenerationFailure::kBackend;
    c.outcome = ExecutionOutcome::failure(ExecStatus::kRuntimeError,
                                          "backend failure: no backend bound to role " + binding.backend_role);
    out[t] = std::move(c);
  }

  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(groups.size(), 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t g = next++; g < groups.size(); g = next++) {
      try {
        for (std::size_t t : groups[g]) run_task(t);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace multisql
