#include "multisql/sql_refs.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "multisql/text.hpp"

namespace multisql {

namespace {

using sql::Token;
using sql::TokenKind;

bool is_identifier(const Token& t) {
  return t.kind == TokenKind::kQuotedIdent || (t.kind == TokenKind::kWord && !t.text.empty());
}

bool is_punct(const Token& t, std::string_view p) { return t.kind == TokenKind::kPunct && t.text == p; }

bool is_comparison(const Token& t) {
  if (t.kind == TokenKind::kPunct) {
    return t.text == "=" || t.text == "==" || t.text == "<>" || t.text == "!=" || t.text == "<" ||
           t.text == ">" || t.text == "<=" || t.text == ">=";
  }
  return t.is_word("LIKE") || t.is_word("GLOB");
}

// Words that end a FROM item list.
bool ends_table_list(const Token& t) {
  for (auto kw : {"WHERE", "GROUP", "ORDER", "LIMIT", "HAVING", "UNION", "INTERSECT", "EXCEPT", "ON", "USING",
                  "JOIN", "INNER", "LEFT", "RIGHT", "CROSS", "NATURAL", "FULL", "OUTER", "WINDOW"}) {
    if (t.is_word(kw)) return true;
  }
  return false;
}

}  // namespace

std::string unquote_string(std::string_view literal) {
  if (literal.size() < 2 || literal.front() != '\'') return std::string(literal);
  std::string_view body = literal.substr(1, literal.back() == '\'' ? literal.size() - 2 : literal.size() - 1);
  std::string out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    out += body[i];
    if (body[i] == '\'' && i + 1 < body.size() && body[i + 1] == '\'') ++i;
  }
  return out;
}

ColumnSet SqlReferences::column_set() const {
  ColumnSet out;
  for (const auto& c : columns) out.insert(c.ref);
  return out;
}

SqlReferences scan_references(std::string_view sql_text, const SchemaDoc& doc) {
  return scan_references(sql::tokenize(sql_text), doc);
}

SqlReferences scan_references(const std::vector<Token>& tokens, const SchemaDoc& doc) {
  SqlReferences out;
  std::vector<std::size_t> sig;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind != TokenKind::kSpace && tokens[i].kind != TokenKind::kComment) sig.push_back(i);
  }
  auto at = [&](std::size_t p) -> const Token& { return tokens[sig[p]]; };
  std::set<std::size_t> table_positions;  // positions in `sig` naming tables or aliases

  auto add_table = [&](const TableMeta* t) {
    if (std::find(out.tables.begin(), out.tables.end(), t) == out.tables.end()) out.tables.push_back(t);
  };

  // Pass 1: tables and aliases after FROM / JOIN.
  for (std::size_t p = 0; p < sig.size(); ++p) {
    if (!at(p).is_word("FROM") && !at(p).is_word("JOIN")) continue;
    const bool from_clause = at(p).is_word("FROM");
    std::size_t q = p + 1;
    while (q < sig.size() && is_identifier(at(q))) {
      const TableMeta* table = doc.resolve_table(at(q).identifier());
      if (table == nullptr) break;
      add_table(table);
      table_positions.insert(q);
      out.aliases[text::to_lower(table->name)] = table;
      ++q;
      if (q < sig.size() && at(q).is_word("AS")) ++q;
      if (q < sig.size() && is_identifier(at(q)) && !ends_table_list(at(q)) &&
          !(at(q).kind == TokenKind::kWord && sql::is_keyword(at(q).text))) {
        out.aliases[text::to_lower(at(q).identifier())] = table;
        table_positions.insert(q);
        ++q;
      }
      if (from_clause && q < sig.size() && is_punct(at(q), ",")) {
        ++q;
        continue;
      }
      break;
    }
  }

  auto resolve_in = [&](const TableMeta* table, const std::string& name) -> std::optional<ColumnRef> {
    return doc.resolve(table->name, name);
  };

  // Pass 2: column references, indexed by position for the value scan.
  std::map<std::size_t, ColumnRef> column_at;
  for (std::size_t p = 0; p < sig.size(); ++p) {
    if (!is_identifier(at(p)) || table_positions.contains(p)) continue;
    if (p > 0 && (is_punct(at(p - 1), ".") || at(p - 1).is_word("AS"))) continue;
    if (p + 1 < sig.size() && is_punct(at(p + 1), "(")) continue;
    if (p + 2 < sig.size() && is_punct(at(p + 1), ".") && is_identifier(at(p + 2))) {
      auto it = out.aliases.find(text::to_lower(at(p).identifier()));
      if (it == out.aliases.end()) continue;
      if (auto ref = resolve_in(it->second, at(p + 2).identifier())) {
        out.columns.push_back({sig[p + 2], *ref});
        column_at[p + 2] = *ref;
      }
      continue;
    }
    for (const TableMeta* table : out.tables) {
      if (auto ref = resolve_in(table, at(p).identifier())) {
        out.columns.push_back({sig[p], *ref});
        column_at[p] = *ref;
        break;
      }
    }
  }

  // Pass 3: string literals compared against a column, including IN lists.
  for (std::size_t p = 0; p < sig.size(); ++p) {
    if (at(p).kind != TokenKind::kString) continue;
    std::optional<ColumnRef> ref;
    if (p >= 2 && is_comparison(at(p - 1)) && column_at.contains(p - 2)) {
      ref = column_at[p - 2];
    } else if (p + 2 < sig.size() && is_comparison(at(p + 1)) && column_at.contains(p + 2)) {
      ref = column_at[p + 2];
    } else {
      // Walk back over an IN (...) list.
      std::size_t q = p;
      while (q > 0 && (at(q - 1).kind == TokenKind::kString || is_punct(at(q - 1), ","))) --q;
      if (q >= 3 && is_punct(at(q - 1), "(") && at(q - 2).is_word("IN")) {
        std::size_t c = q - 3;
        if (at(c).is_word("NOT") && c > 0) --c;
        if (column_at.contains(c)) ref = column_at[c];
      }
    }
    if (ref) out.values.push_back({*ref, unquote_string(at(p).text)});
  }
  return out;
}

}  // namespace multisql
