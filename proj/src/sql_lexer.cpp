#include "multisql/sql_lexer.hpp"

#include <cctype>
#include <set>

#include "multisql/text.hpp"

namespace multisql::sql {

namespace {

bool word_start(unsigned char c) { return std::isalpha(c) || c == '_' || c >= 0x80; }
bool word_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$' || c >= 0x80; }

// Index one past the closing `close`; doubled closers are escapes.
std::size_t scan_quoted(std::string_view s, std::size_t i, char close) {
  ++i;
  while (i < s.size()) {
    if (s[i] == close) {
      if (i + 1 < s.size() && s[i + 1] == close && close != ']') {
        i += 2;
        continue;
      }
      return i + 1;
    }
    ++i;
  }
  return s.size();
}

}  // namespace

bool Token::is_word(std::string_view upper) const {
  return kind == TokenKind::kWord && text::iequals(text, upper);
}

std::string Token::identifier() const {
  if (kind != TokenKind::kQuotedIdent || text.size() < 2) return text;
  std::string inner = text.substr(1, text.size() - 2);
  const char q = text.front();
  if (q == '[') return inner;
  std::string out;
  for (std::size_t i = 0; i < inner.size(); ++i) {
    out += inner[i];
    if (inner[i] == q && i + 1 < inner.size() && inner[i + 1] == q) ++i;
  }
  return out;
}

std::vector<Token> tokenize(std::string_view s) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto emit = [&](TokenKind kind, std::size_t end) {
    out.push_back({kind, std::string(s.substr(i, end - i))});
    i = end;
  };
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (std::isspace(c)) {
      std::size_t j = i;
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      emit(TokenKind::kSpace, j);
    } else if (c == '-' && i + 1 < s.size() && s[i + 1] == '-') {
      std::size_t j = s.find('\n', i);
      emit(TokenKind::kComment, j == std::string_view::npos ? s.size() : j);
    } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      std::size_t j = s.find("*/", i + 2);
      emit(TokenKind::kComment, j == std::string_view::npos ? s.size() : j + 2);
    } else if (c == '\'') {
      emit(TokenKind::kString, scan_quoted(s, i, '\''));
    } else if (c == '"' || c == '`') {
      emit(TokenKind::kQuotedIdent, scan_quoted(s, i, static_cast<char>(c)));
    } else if (c == '[') {
      emit(TokenKind::kQuotedIdent, scan_quoted(s, i, ']'));
    } else if (std::isdigit(c) || (c == '.' && i + 1 < s.size() && std::isdigit(static_cast<unsigned char>(s[i + 1])))) {
      std::size_t j = i;
      while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '.')) ++j;
      if (j < s.size() && (s[j] == 'e' || s[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < s.size() && (s[k] == '+' || s[k] == '-')) ++k;
        if (k < s.size() && std::isdigit(static_cast<unsigned char>(s[k]))) {
          j = k;
          while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
        }
      }
      // 1abc is an identifier in most dialects
      if (j < s.size() && word_char(static_cast<unsigned char>(s[j]))) {
        while (j < s.size() && word_char(static_cast<unsigned char>(s[j]))) ++j;
        emit(TokenKind::kWord, j);
      } else {
        emit(TokenKind::kNumber, j);
      }
    } else if (word_start(c)) {
      std::size_t j = i;
      while (j < s.size() && word_char(static_cast<unsigned char>(s[j]))) ++j;
      emit(TokenKind::kWord, j);
    } else {
      static constexpr std::string_view kTwoChar[] = {"<=", ">=", "<>", "!=", "==", "||"};
      std::size_t len = 1;
      for (auto op : kTwoChar) {
        if (s.substr(i, 2) == op) len = 2;
      }
      emit(TokenKind::kPunct, i + len);
    }
  }
  return out;
}

std::string join(const std::vector<Token>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += t.text;
  return out;
}

bool is_keyword(std::string_view word) {
  static const std::set<std::string, std::less<>> kKeywords = {
      "ALL",      "AND",     "AS",        "ASC",      "AVG",     "BETWEEN", "BY",       "CASE",
      "CAST",     "COALESCE", "COUNT",    "CROSS",    "DESC",    "DISTINCT", "ELSE",    "END",
      "EXCEPT",   "EXISTS",  "FALSE",     "FROM",     "FULL",    "GLOB",    "GROUP",    "HAVING",
      "IFNULL",   "IIF",     "IN",        "INNER",    "INTERSECT", "IS",    "JOIN",     "LEFT",
      "LIKE",     "LIMIT",   "MAX",       "MIN",      "NATURAL", "NOT",     "NULL",     "NULLIF",
      "NULLS",    "OFFSET",  "ON",        "OR",       "ORDER",   "OUTER",   "OVER",     "PARTITION",
      "RECURSIVE", "RIGHT",  "SELECT",    "SUM",      "THEN",    "TOTAL",   "TRUE",     "UNION",
      "USING",    "VALUES",  "WHEN",      "WHERE",    "WITH",    "WINDOW",  "ROUND",    "ABS",
      "LENGTH",   "LOWER",   "UPPER",     "SUBSTR",   "STRFTIME", "REAL",   "INTEGER",  "FIRST",
      "LAST",     "ROWS",    "RANGE",     "ROW_NUMBER", "RANK",  "DENSE_RANK", "INSTR", "REPLACE",
      "TRIM",     "DATE",    "DATETIME",  "JULIANDAY"};
  return kKeywords.contains(text::to_upper(word));
}

std::vector<Token> significant(const std::vector<Token>& tokens) {
  std::vector<Token> out;
  for (const auto& t : tokens) {
    if (t.kind != TokenKind::kSpace && t.kind != TokenKind::kComment) out.push_back(t);
  }
  return out;
}

}  // namespace multisql::sql
