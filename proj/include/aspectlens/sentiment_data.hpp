#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspectlens/sentiment.hpp"

namespace aspectlens::sentiment {

// One training row: id<TAB>[topic<TAB>]label<TAB>text.
struct LabeledText {
  std::string id;
  std::optional<std::string> topic;
  Label label = Label::neutral;
  std::string text;
};

// Five-point labels are collapsed on load. A row has a topic column when
// its second field is not a label.
std::vector<LabeledText> parse_training_tsv(std::string_view content);
std::vector<LabeledText> load_training_tsv(const std::filesystem::path& path);

// Vocabulary over texts and topics, then tokenized examples for `head`.
text::Vocabulary vocabulary_for(std::span<const LabeledText> rows);
std::vector<Example> make_examples(std::span<const LabeledText> rows, Head head,
                                   const text::Vocabulary& vocab);

// Annotated evaluation post.
struct FixturePost {
  std::string text;
  Label gold = Label::neutral;
  std::optional<std::string> aspect;
  bool edited = false;      // shortened, edited or written by hand
  bool multi_span = false;  // aspect string looks like several spans
};

std::vector<FixturePost> load_fixture(const std::filesystem::path& path);

// Aspects used when a corpus carries no annotations.
inline const std::vector<std::string>& default_aspects() {
  static const std::vector<std::string> aspects{"\"Elbphilharmonie\"",
                                                "Elbphilharmonie in Hamburg"};
  return aspects;
}

}  // namespace aspectlens::sentiment
