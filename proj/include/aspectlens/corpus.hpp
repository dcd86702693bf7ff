#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aspectlens/error.hpp"

namespace aspectlens::corpus {

// One upload: a single image plus its text body.
struct Post {
  std::string post_id;
  std::string author_id;
  std::int64_t timestamp = 0;  // UTC seconds
  std::string title;
  std::string description;
  std::vector<std::string> hashtags;  // without leading '#'
  std::string image_id;

  bool operator==(const Post&) const = default;
};

// Uploads that share author, timestamp and all texts, merged into one record.
struct GalleryPost {
  std::string gallery_id;
  std::string author_id;
  std::int64_t timestamp = 0;
  std::string title;
  std::string description;
  std::vector<std::string> hashtags;
  std::vector<std::string> image_ids;

  bool operator==(const GalleryPost&) const = default;
};

struct MentionReport {
  std::size_t total = 0;
  std::size_t any_mention = 0;
  std::size_t in_hashtags = 0;
  std::size_t in_description = 0;
  std::size_t in_title = 0;
  double coverage = 0.0;

  // Posts a text-only search would have missed.
  std::size_t text_missed() const { return total - any_mention; }

  bool operator==(const MentionReport&) const = default;
};

struct YearRange {
  int first = 2016;
  int last = 2019;

  bool contains(int year) const { return year >= first && year <= last; }
};

inline const std::vector<std::string>& default_terms() {
  static const std::vector<std::string> terms{"elbphilharmonie", "elphi",
                                              "philharmonie"};
  return terms;
}

class CorpusError : public Error {
 public:
  using Error::Error;
};

// Calendar year of a UTC timestamp.
int utc_year(std::int64_t timestamp);

// Parses "2016:2019" (or a single year).
YearRange parse_year_range(std::string_view text);

// Reads a JSON-lines corpus, keeping posts whose UTC year lies in `years`.
// Duplicate post ids are rejected across the whole file, filtered or not.
std::vector<Post> load_corpus(const std::filesystem::path& path, YearRange years);

// Same, over already-open text (one record per line).
std::vector<Post> parse_corpus(std::string_view text, YearRange years);

std::vector<GalleryPost> merge_galleries(std::span<const Post> posts);
std::vector<GalleryPost> merge_galleries(std::span<const GalleryPost> posts);

GalleryPost as_gallery(const Post& post);

// Case-insensitive (ASCII) substring test against any term.
bool contains_any(std::string_view text, std::span<const std::string> terms);

MentionReport search_mentions(std::span<const GalleryPost> posts,
                              std::span<const std::string> terms);

void write_galleries(const std::filesystem::path& path,
                     std::span<const GalleryPost> galleries);
std::vector<GalleryPost> load_galleries(const std::filesystem::path& path);

}  // namespace aspectlens::corpus
