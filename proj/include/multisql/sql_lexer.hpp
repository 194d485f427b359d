#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace multisql::sql {

enum class TokenKind {
  kWord,         // bare identifier or keyword
  kQuotedIdent,  // "x", `x`, [x]
  kString,       // 'x'
  kNumber,
  kPunct,
  kComment,
  kSpace,
};

struct Token {
  TokenKind kind;
  std::string text;

  bool is_word(std::string_view upper) const;
  // Identifier text without quoting.
  std::string identifier() const;
};

// Lossless: concatenating the token texts reproduces the input. Unterminated
// quotes and comments run to end of input.
std::vector<Token> tokenize(std::string_view sql);

std::string join(const std::vector<Token>& tokens);

bool is_keyword(std::string_view word);

// Drops comments and whitespace.
std::vector<Token> significant(const std::vector<Token>& tokens);

}  // namespace multisql::sql
