#include "aspectlens/text.hpp"

#include <cctype>
#include <map>
#include <stdexcept>

namespace aspectlens::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Bytes >= 0x80 belong to multi-byte UTF-8 sequences and stay inside words.
bool is_word(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || c == '_' || u >= 0x80;
}

bool starts_with_at(std::string_view s, std::size_t i, std::string_view prefix) {
  return s.substr(i, prefix.size()) == prefix;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view input) {
  std::string s(input);
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const std::size_t n = s.size();
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < n) {
    const char c = s[i];
    if (is_space(c)) {
      ++i;
      continue;
    }
    if (starts_with_at(s, i, "http://") || starts_with_at(s, i, "https://") ||
        starts_with_at(s, i, "www.")) {
      while (i < n && !is_space(s[i])) ++i;
      out.emplace_back(kUrl);
      continue;
    }
    if (c == '@' && i + 1 < n && is_word(s[i + 1])) {
      ++i;
      while (i < n && is_word(s[i])) ++i;
      out.emplace_back(kUser);
      continue;
    }
    if (c == '#' && i + 1 < n && is_word(s[i + 1])) {
      ++i;
      continue;
    }
    if (is_word(c)) {
      std::size_t j = i;
      while (j < n && (is_digit(s[j]) || (j > i && (s[j] == '.' || s[j] == ',') &&
                                          j + 1 < n && is_digit(s[j + 1])))) {
        ++j;
      }
      if (j > i && (j == n || !is_word(s[j]))) {
        out.emplace_back(kNumber);
        i = j;
        continue;
      }
      j = i;
      while (j < n && is_word(s[j])) ++j;
      out.emplace_back(s.substr(i, j - i));
      i = j;
      continue;
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

Vocabulary::Vocabulary() { add(kUnk); }

Vocabulary::Vocabulary(std::vector<std::string> words) {
  if (words.empty() || words.front() != kUnk) {
    throw std::invalid_argument("vocabulary must start with the unknown-word token");
  }
  for (const auto& w : words) {
    if (index_.count(w) != 0) throw std::invalid_argument("duplicate vocabulary entry \"" + w + "\"");
    add(w);
  }
}

std::uint32_t Vocabulary::add(std::string_view word) {
  auto [it, inserted] = index_.try_emplace(std::string(word),
                                           static_cast<std::uint32_t>(words_.size()));
  if (inserted) words_.emplace_back(word);
  return it->second;
}

std::uint32_t Vocabulary::index_of(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnkIndex : it->second;
}

Vocabulary build_vocabulary(std::span<const std::string> texts, std::size_t min_count) {
  std::vector<std::string> order;
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts) {
    for (auto& tok : tokenize(t)) {
      if (counts[tok]++ == 0) order.push_back(tok);
    }
  }
  Vocabulary vocab;
  for (const auto& w : order) {
    if (counts[w] >= min_count) vocab.add(w);
  }
  return vocab;
}

TokenSequence preprocess(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.raw = std::string(text);
  for (const auto& tok : tokenize(text)) seq.tokens.push_back(vocab.index_of(tok));
  if (seq.tokens.empty()) seq.tokens.push_back(Vocabulary::kUnkIndex);
  return seq;
}

}  // namespace aspectlens::text
