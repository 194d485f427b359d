#include "multisql/lsh.hpp"

#include <fstream>
#include <limits>
#include <random>

#include "multisql/error.hpp"
#include "multisql/text.hpp"

namespace multisql {

SubwordTokenizer::SubwordTokenizer(std::set<std::string> vocabulary) : vocabulary_(std::move(vocabulary)) {
  for (const auto& v : vocabulary_) longest_ = std::max(longest_, v.size());
}

SubwordTokenizer SubwordTokenizer::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigInvalid, "cannot read vocabulary " + path);
  std::set<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (!t.empty()) vocab.insert(text::to_lower(t));
  }
  return SubwordTokenizer(std::move(vocab));
}

void SubwordTokenizer::tokenize_word(const std::string& word, std::set<std::string>& out) const {
  std::string unmatched;
  auto flush = [&] {
    if (unmatched.empty()) return;
    if (unmatched.size() <= 3) {
      out.insert(unmatched);
    } else {
      for (std::size_t i = 0; i + 3 <= unmatched.size(); ++i) out.insert(unmatched.substr(i, 3));
    }
    unmatched.clear();
  };
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t matched = 0;
    for (std::size_t len = std::min(longest_, word.size() - i); len >= 2; --len) {
      if (vocabulary_.contains(word.substr(i, len))) {
        matched = len;
        break;
      }
    }
    if (matched == 0) {
      unmatched += word[i++];
      continue;
    }
    flush();
    out.insert(word.substr(i, matched));
    i += matched;
  }
  flush();
}

std::set<std::string> SubwordTokenizer::tokenize(std::string_view s) const {
  std::set<std::string> out;
  for (const auto& w : text::words(s)) tokenize_word(w, out);
  return out;
}

MinHashLsh::MinHashLsh(LshShape shape, std::uint64_t seed) : shape_(shape) {
  if (shape_.bands == 0 || shape_.rows == 0) throw Error(ErrorCode::kConfigInvalid, "LSH shape must be positive");
  std::mt19937_64 rng(seed);
  seeds_.resize(shape_.permutations());
  for (auto& s : seeds_) s = rng();
}

std::vector<std::uint64_t> MinHashLsh::signature(const std::set<std::string>& tokens) const {
  // splitmix64 finalizer over (token hash ^ seed) gives one hash per
  // permutation.
  auto mix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::vector<std::uint64_t> sig(seeds_.size(), std::numeric_limits<std::uint64_t>::max());
  for (const auto& token : tokens) {
    const std::uint64_t base = text::fnv1a64(token);
    for (std::size_t p = 0; p < seeds_.size(); ++p) {
      sig[p] = std::min(sig[p], mix(base ^ seeds_[p]));
    }
  }
  return sig;
}

bool MinHashLsh::collide(const std::vector<std::uint64_t>& a, const std::vector<std::uint64_t>& b) const {
  for (std::size_t band = 0; band < shape_.bands; ++band) {
    bool same = true;
    for (std::size_t r = 0; r < shape_.rows && same; ++r) {
      const std::size_t i = band * shape_.rows + r;
      same = a[i] == b[i];
    }
    if (same) return true;
  }
  return false;
}

}  // namespace multisql
