#include "aspectlens/sentiment_data.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "aspectlens/error.hpp"

namespace aspectlens::sentiment {

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

std::optional<Label> try_label(std::string_view s) {
  try {
    return parse_label(s);
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

std::string join_from(const std::vector<std::string_view>& fields, std::size_t first) {
  std::string out;
  for (std::size_t i = first; i < fields.size(); ++i) {
    if (i > first) out += ' ';
    out += fields[i];
  }
  return out;
}

}  // namespace

std::vector<LabeledText> parse_training_tsv(std::string_view content) {
  std::vector<LabeledText> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const auto fields = split_tabs(line);
    LabeledText row;
    if (fields.size() >= 3) {
      if (auto l = try_label(fields[1])) {
        row = {std::string(fields[0]), std::nullopt, *l, join_from(fields, 2)};
      } else if (fields.size() >= 4) {
        if (auto l2 = try_label(fields[2])) {
          row = {std::string(fields[0]), std::string(fields[1]), *l2, join_from(fields, 3)};
        } else {
          throw FormatError("training line " + std::to_string(line_no) + ": no valid label");
        }
      } else {
        throw FormatError("training line " + std::to_string(line_no) + ": no valid label");
      }
    } else {
      throw FormatError("training line " + std::to_string(line_no) +
                        ": expected id<TAB>[topic<TAB>]label<TAB>text");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<LabeledText> load_training_tsv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read training data " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_training_tsv(buf.str());
}

text::Vocabulary vocabulary_for(std::span<const LabeledText> rows) {
  std::vector<std::string> texts;
  for (const auto& r : rows) {
    texts.push_back(r.text);
    if (r.topic) texts.push_back(*r.topic);
  }
  return text::build_vocabulary(texts);
}

std::vector<Example> make_examples(std::span<const LabeledText> rows, Head head,
                                   const text::Vocabulary& vocab) {
  std::vector<Example> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    Example ex;
    ex.tokens = text::preprocess(r.text, vocab);
    ex.label = r.label;
    if (head == Head::target) {
      if (!r.topic) {
        throw std::invalid_argument("row \"" + r.id + "\" has no topic for target-head training");
      }
      ex.aspect = text::preprocess(*r.topic, vocab);
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<FixturePost> load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read fixture " + path.string());
  std::vector<FixturePost> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      FixturePost p;
      p.text = obj.at("text").get<std::string>();
      p.gold = parse_label(obj.at("label").get<std::string>());
      if (obj.contains("aspect") && !obj.at("aspect").is_null()) {
        p.aspect = obj.at("aspect").get<std::string>();
      }
      p.edited = obj.value("edited", false);
      p.multi_span = obj.value("multi_span", false);
      out.push_back(std::move(p));
    } catch (const std::exception& e) {
      throw FormatError(path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace aspectlens::sentiment
