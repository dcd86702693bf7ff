#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace aspectlens::text {

inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kUrl = "<url>";
inline constexpr std::string_view kUser = "<user>";
inline constexpr std::string_view kNumber = "<number>";

// Lowercases, normalizes URLs, user mentions and numbers to placeholder
// tokens, strips '#' from hashtags and splits on whitespace and
// punctuation. Punctuation characters are kept as single tokens.
std::vector<std::string> tokenize(std::string_view text);

// Word <-> index map. Index 0 is always the unknown-word token.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);  // words[0] must be <unk>

  static constexpr std::uint32_t kUnkIndex = 0;

  std::uint32_t add(std::string_view word);
  std::uint32_t index_of(std::string_view word) const;
  const std::string& word(std::uint32_t index) const { return words_.at(index); }
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Vocabulary of every token seen at least `min_count` times, in order of
// first appearance.
Vocabulary build_vocabulary(std::span<const std::string> texts, std::size_t min_count = 1);

struct TokenSequence {
  std::vector<std::uint32_t> tokens;
  std::string raw;

  bool operator==(const TokenSequence&) const = default;
};

// Never empty: text without tokens maps to a single unknown token.
TokenSequence preprocess(std::string_view text, const Vocabulary& vocab);

}  // namespace aspectlens::text
