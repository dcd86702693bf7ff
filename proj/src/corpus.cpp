#include "aspectlens/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace aspectlens::corpus {

using nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool has_whitespace(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) {
    return std::isspace(static_cast<unsigned char>(c)) != 0;
  });
}

template <typename T>
T required(const json& obj, const char* key, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw CorpusError("line " + std::to_string(line) + ": missing field \"" + key + "\"");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw CorpusError("line " + std::to_string(line) + ": field \"" + key +
                      "\" has the wrong type");
  }
}

Post parse_post(std::string_view line_text, std::size_t line) {
  json obj;
  try {
    obj = json::parse(line_text);
  } catch (const json::parse_error& e) {
    throw CorpusError("line " + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  if (!obj.is_object()) {
    throw CorpusError("line " + std::to_string(line) + ": record is not an object");
  }
  Post p;
  p.post_id = required<std::string>(obj, "post_id", line);
  p.author_id = required<std::string>(obj, "author_id", line);
  p.timestamp = required<std::int64_t>(obj, "timestamp", line);
  p.title = required<std::string>(obj, "title", line);
  p.description = required<std::string>(obj, "description", line);
  p.hashtags = required<std::vector<std::string>>(obj, "hashtags", line);
  p.image_id = required<std::string>(obj, "image_id", line);
  if (p.post_id.empty()) {
    throw CorpusError("line " + std::to_string(line) + ": empty post_id");
  }
  for (const auto& tag : p.hashtags) {
    if (tag.empty() || has_whitespace(tag)) {
      throw CorpusError("line " + std::to_string(line) + ": invalid hashtag \"" + tag + "\"");
    }
  }
  return p;
}

json to_json(const GalleryPost& g) {
  return json{{"gallery_id", g.gallery_id},   {"author_id", g.author_id},
              {"timestamp", g.timestamp},     {"title", g.title},
              {"description", g.description}, {"hashtags", g.hashtags},
              {"image_ids", g.image_ids}};
}

}  // namespace

int utc_year(std::int64_t timestamp) {
  using namespace std::chrono;
  const sys_seconds t{seconds{timestamp}};
  const year_month_day ymd{floor<days>(t)};
  return static_cast<int>(ymd.year());
}

YearRange parse_year_range(std::string_view text) {
  auto parse_int = [&](std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
      throw std::invalid_argument("bad year range: " + std::string(text));
    }
    return v;
  };
  const auto colon = text.find(':');
  YearRange r;
  if (colon == std::string_view::npos) {
    r.first = r.last = parse_int(text);
  } else {
    r.first = parse_int(text.substr(0, colon));
    r.last = parse_int(text.substr(colon + 1));
  }
  if (r.first > r.last) throw std::invalid_argument("empty year range: " + std::string(text));
  return r;
}

std::vector<Post> parse_corpus(std::string_view text, YearRange years) {
  std::vector<Post> posts;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](char c) { return std::isspace(static_cast<unsigned char>(c)); })) {
      continue;
    }
    Post p = parse_post(line, line_no);
    if (!seen.insert(p.post_id).second) {
      throw CorpusError("line " + std::to_string(line_no) + ": duplicate post_id \"" +
                        p.post_id + "\"");
    }
    if (years.contains(utc_year(p.timestamp))) posts.push_back(std::move(p));
  }
  return posts;
}

std::vector<Post> load_corpus(const std::filesystem::path& path, YearRange years) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str(), years);
}

GalleryPost as_gallery(const Post& post) {
  return GalleryPost{post.post_id, post.author_id, post.timestamp, post.title,
                     post.description, post.hashtags, {post.image_id}};
}

std::vector<GalleryPost> merge_galleries(std::span<const GalleryPost> posts) {
  using Key = std::tuple<std::string, std::int64_t, std::string, std::string,
                         std::vector<std::string>>;
  std::map<Key, std::size_t> group_of;
  std::vector<GalleryPost> out;
  for (const auto& p : posts) {
    Key key{p.author_id, p.timestamp, p.title, p.description, p.hashtags};
    auto [it, inserted] = group_of.try_emplace(std::move(key), out.size());
    if (inserted) {
      out.push_back(p);
      out.back().image_ids.clear();
    }
    auto& ids = out[it->second].image_ids;
    for (const auto& id : p.image_ids) {
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  }
  return out;
}

std::vector<GalleryPost> merge_galleries(std::span<const Post> posts) {
  std::vector<GalleryPost> singles;
  singles.reserve(posts.size());
  for (const auto& p : posts) singles.push_back(as_gallery(p));
  return merge_galleries(std::span<const GalleryPost>(singles));
}

bool contains_any(std::string_view text, std::span<const std::string> terms) {
  const auto hay = lower_ascii(text);
  return std::any_of(terms.begin(), terms.end(), [&](const std::string& t) {
    return hay.find(lower_ascii(t)) != std::string::npos;
  });
}

MentionReport search_mentions(std::span<const GalleryPost> posts,
                              std::span<const std::string> terms) {
  if (terms.empty()) throw std::invalid_argument("mention search needs at least one term");
  MentionReport r;
  r.total = posts.size();
  for (const auto& p : posts) {
    const bool title = contains_any(p.title, terms);
    const bool description = contains_any(p.description, terms);
    const bool hashtag = std::any_of(p.hashtags.begin(), p.hashtags.end(),
                                     [&](const std::string& h) { return contains_any(h, terms); });
    r.in_title += title;
    r.in_description += description;
    r.in_hashtags += hashtag;
    r.any_mention += (title || description || hashtag);
  }
  r.coverage = r.total == 0 ? 0.0
                            : static_cast<double>(r.any_mention) / static_cast<double>(r.total);
  return r;
}

void write_galleries(const std::filesystem::path& path,
                     std::span<const GalleryPost> galleries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& g : galleries) out << to_json(g).dump() << '\n';
  if (!out) throw CorpusError("write failed: " + path.string());
}

std::vector<GalleryPost> load_galleries(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read galleries file " + path.string());
  std::vector<GalleryPost> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = json::parse(line);
      GalleryPost g;
      g.gallery_id = obj.at("gallery_id").get<std::string>();
      g.author_id = obj.at("author_id").get<std::string>();
      g.timestamp = obj.at("timestamp").get<std::int64_t>();
      g.title = obj.at("title").get<std::string>();
      g.description = obj.at("description").get<std::string>();
      g.hashtags = obj.at("hashtags").get<std::vector<std::string>>();
      g.image_ids = obj.at("image_ids").get<std::vector<std::string>>();
      if (g.image_ids.empty()) throw CorpusError("empty image_ids");
      out.push_back(std::move(g));
    } catch (const json::exception& e) {
      throw CorpusError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace aspectlens::corpus
