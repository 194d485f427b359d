#include "multisql/prompts.hpp"

#include <fstream>
#include <sstream>

#include "multisql/error.hpp"
#include "multisql/text.hpp"

namespace multisql {

namespace {

constexpr std::string_view kSqlRules =
    "Write one SQLite query that answers the question. Use only tables and columns from the "
    "schema. Return the query in a ```sql fenced block.";

struct BuiltIn {
  std::string_view id;
  std::string_view raw;
};

// clang-format off
const BuiltIn kBuiltIns[] = {
    {prompt_ids::kKeywords,
     "You extract search keywords for a database question.\n"
     "---\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "List the entities, attribute names and literal values mentioned above that could match "
     "database columns or cell values. Answer with a single comma-separated line."},
    {prompt_ids::kColumnSelect,
     "You are a database expert who picks the columns needed to answer a question.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "List every column needed to write the SQL, one per line, as table.column."},
    {prompt_ids::kText2Sql,
     "You are a text-to-SQL generator.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"},
    {prompt_ids::kComplexPattern,
     "You are a text-to-SQL generator that prefers structured queries: common table "
     "expressions, subqueries and window functions where they clarify intent.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"},
    {prompt_ids::kStandardized,
     "You are a text-to-SQL generator with a strict house style: explicit JOIN ... ON, table "
     "aliases T1, T2, ..., upper-case keywords.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"},
    {prompt_ids::kMixed,
     "You are a text-to-SQL generator trained on a mixture of writing styles.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"},
    {prompt_ids::kIcl,
     "You are a text-to-SQL generator. Study the solved examples first.\n"
     "---\n"
     "{examples}\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"},
    {prompt_ids::kSelfRefine,
     "You are a text-to-SQL generator repairing your previous answer.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "Previous SQL:\n```sql\n{prev_sql}\n```\n"
     "Execution result:\n{exec_feedback}\n"
     "The previous SQL failed or returned an anomalous result. Write a corrected query in a "
     "```sql fenced block."},
    {prompt_ids::kSelector,
     "You choose the correct SQL query among candidates.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "Candidates:\n{candidates}\n"
     "Answer with the number of the best candidate only."},
    {prompt_ids::kReformatComplex,
     "You rewrite SQL queries without changing their results.\n"
     "---\n"
     "{schema}\n"
     "Rewrite the query below using common table expressions or subqueries to structure the "
     "computation. The rewritten query must return exactly the same rows.\n"
     "```sql\n{sql}\n```"},
    {prompt_ids::kReformatStandard,
     "You rewrite SQL queries without changing their results.\n"
     "---\n"
     "{schema}\n"
     "Rewrite the query below in a standardized style: explicit JOIN ... ON, table aliases "
     "T1, T2, ..., upper-case keywords. The rewritten query must return exactly the same rows.\n"
     "```sql\n{sql}\n```"},
    {prompt_ids::kTaskQuestionInference,
     "Given a database schema and a SQL query, write the question the query answers.\n"
     "---\n"
     "{schema}\n"
     "Evidence: {evidence}\n"
     "SQL:\n```sql\n{sql}\n```\n"
     "Question:"},
    {prompt_ids::kTaskEvidenceInference,
     "Given a database schema, a question and its SQL, pick the evidence that the SQL relies on.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "SQL:\n```sql\n{sql}\n```\n"
     "Candidate evidence:\n{evidence_pool}\n"
     "Evidence:"},
    {prompt_ids::kTaskSelfRefine,
     "Repair a SQL query using its execution result.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "Previous SQL:\n```sql\n{prev_sql}\n```\n"
     "Execution result:\n{exec_feedback}\n"
     "Corrected SQL:"},
    {prompt_ids::kTaskSelection,
     "You choose the correct SQL query among candidates.\n"
     "---\n"
     "{schema}\n"
     "Question: {question}\n"
     "Evidence: {evidence}\n"
     "Candidates:\n{candidates}\n"
     "Answer with the number of the best candidate only."},
};
// clang-format on

}  // namespace

PromptTemplate PromptLibrary::parse(std::string_view raw) {
  // The separator is the first line consisting of exactly "---".
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t end = raw.find('\n', pos);
    std::string_view line = raw.substr(pos, end == std::string_view::npos ? raw.size() - pos : end - pos);
    if (line == "---") {
      std::string system(raw.substr(0, pos == 0 ? 0 : pos - 1));
      std::string user(end == std::string_view::npos ? "" : raw.substr(end + 1));
      return {std::move(system), std::move(user)};
    }
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return {"", std::string(raw)};
}

PromptLibrary::PromptLibrary() {
  for (const auto& b : kBuiltIns) templates_.emplace(std::string(b.id), parse(b.raw));
  // The user text of every generator prompt ends with the same instructions.
  for (auto id : {prompt_ids::kText2Sql, prompt_ids::kComplexPattern, prompt_ids::kStandardized,
                  prompt_ids::kMixed, prompt_ids::kIcl}) {
    templates_.find(id)->second.user += kSqlRules;
  }
}

void PromptLibrary::load(std::string id, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kConfigInvalid, "cannot read prompt template " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  set(std::move(id), buffer.str());
}

void PromptLibrary::set(std::string id, std::string_view raw) { templates_[std::move(id)] = parse(raw); }

bool PromptLibrary::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

const PromptTemplate& PromptLibrary::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::kConfigInvalid, "unknown prompt template " + std::string(id));
  return it->second;
}

std::vector<std::string> PromptLibrary::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : templates_) out.push_back(id);
  return out;
}

ChatRequest build_request(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values,
                          std::string role_id, double temperature) {
  ChatRequest request;
  request.role_id = std::move(role_id);
  request.temperature = temperature;
  if (!tmpl.system.empty()) request.messages.push_back({Speaker::kSystem, text::fill_template(tmpl.system, values)});
  request.messages.push_back({Speaker::kUser, text::fill_template(tmpl.user, values)});
  return request;
}

}  // namespace multisql
