#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace multisql {

// Greedy longest-match subword tokenizer over a fixed vocabulary. Text the
// vocabulary does not cover falls back to character 3-grams, so an empty
// vocabulary yields pure 3-gram shingles.
class SubwordTokenizer {
 public:
  SubwordTokenizer() = default;
  explicit SubwordTokenizer(std::set<std::string> vocabulary);

  // One vocabulary entry per non-empty line.
  static SubwordTokenizer from_file(const std::string& path);

  // Unique tokens of the lowercased words of `s`.
  std::set<std::string> tokenize(std::string_view s) const;

 private:
  void tokenize_word(const std::string& word, std::set<std::string>& out) const;

  std::set<std::string> vocabulary_;
  std::size_t longest_ = 0;
};

struct LshShape {
  std::size_t bands = 16;
  std::size_t rows = 4;
  std::size_t permutations() const { return bands * rows; }
};

// MinHash signatures with banded collision test.
class MinHashLsh {
 public:
  explicit MinHashLsh(LshShape shape = {}, std::uint64_t seed = 0x5eed);

  std::vector<std::uint64_t> signature(const std::set<std::string>& tokens) const;
  // True if any band of the two signatures is identical.
  bool collide(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) const;

  const LshShape& shape() const { return shape_; }

 private:
  LshShape shape_;
  std::vector<std::uint64_t> seeds_;
};

}  // namespace multisql
