#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "multisql/backend.hpp"

namespace multisql {

// Template ids shipped with the library. Each template is a system text and
// a user text separated by a line containing only "---".
namespace prompt_ids {
inline constexpr std::string_view kKeywords = "keywords.v1";
inline constexpr std::string_view kColumnSelect = "column_select.v1";
inline constexpr std::string_view kText2Sql = "text2sql.v1";
inline constexpr std::string_view kComplexPattern = "text2sql_complex.v1";
inline constexpr std::string_view kStandardized = "text2sql_standard.v1";
inline constexpr std::string_view kMixed = "text2sql_mixed.v1";
inline constexpr std::string_view kIcl = "text2sql_icl.v1";
inline constexpr std::string_view kSelfRefine = "self_refine.v1";
inline constexpr std::string_view kSelector = "selector.v1";
inline constexpr std::string_view kReformatComplex = "reformat_complex.v1";
inline constexpr std::string_view kReformatStandard = "reformat_standard.v1";
inline constexpr std::string_view kTaskQuestionInference = "task_question_inference.v1";
inline constexpr std::string_view kTaskEvidenceInference = "task_evidence_inference.v1";
inline constexpr std::string_view kTaskSelfRefine = "task_self_refine.v1";
inline constexpr std::string_view kTaskSelection = "task_selection.v1";
}  // namespace prompt_ids

struct PromptTemplate {
  std::string system;
  std::string user;
};

class PromptLibrary {
 public:
  // Starts with the built-in templates.
  PromptLibrary();

  // Registers or replaces a template from a file on disk.
  void load(std::string id, const std::filesystem::path& file);
  void set(std::string id, std::string_view raw);

  bool contains(std::string_view id) const;
  // Throws Error(kConfigInvalid) for unknown ids.
  const PromptTemplate& get(std::string_view id) const;
  std::vector<std::string> ids() const;

  static PromptTemplate parse(std::string_view raw);

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// Fills the template placeholders and wraps the result as a chat request.
ChatRequest build_request(const PromptTemplate& tmpl, const std::map<std::string, std::string>& values,
                          std::string role_id, double temperature);

}  // namespace multisql
