#include "aspectlens/features_io.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "aspectlens/binary_io.hpp"

namespace aspectlens {

namespace {

constexpr std::string_view kEmbeddingMagic = "EMB1";
constexpr std::string_view kLocalMagic = "LOC1";

std::string record_label(std::size_t index) { return "record " + std::to_string(index); }

}  // namespace

std::vector<EmbeddingRecord> read_embeddings(std::istream& in) {
  binio::expect_magic(in, kEmbeddingMagic);
  const auto dim = binio::read_le<std::uint32_t>(in, "dimension");
  const auto count = binio::read_le<std::uint32_t>(in, "record count");
  if (dim == 0) throw FormatError("embedding dimension must be positive");
  std::vector<EmbeddingRecord> out;
  out.reserve(count);
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto label = record_label(i);
    EmbeddingRecord rec;
    rec.image_id = binio::read_string16(in, label + " id");
    if (!seen.insert(rec.image_id).second) {
      throw FormatError(label + ": duplicate image_id \"" + rec.image_id + "\"");
    }
    rec.vector.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      try {
        rec.vector[j] = binio::read_f32(in, label);
      } catch (const FormatError&) {
        throw FormatError(label + " (\"" + rec.image_id + "\"): dimension mismatch, expected " +
                          std::to_string(dim) + " values, found " + std::to_string(j));
      }
      if (!std::isfinite(rec.vector[j])) {
        throw FormatError(label + " (\"" + rec.image_id + "\"): non-finite value");
      }
    }
    out.push_back(std::move(rec));
  }
  if (!binio::at_eof(in)) {
    throw FormatError("trailing bytes after " + std::to_string(count) +
                      " records (dimension mismatch?)");
  }
  return out;
}

std::vector<EmbeddingRecord> import_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read embeddings " + path.string());
  try {
    return read_embeddings(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records) {
  const std::size_t dim = records.empty() ? 0 : records.front().vector.size();
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.vector.size() != dim) {
      throw FormatError(record_label(i) + " (\"" + r.image_id + "\"): dimension " +
                        std::to_string(r.vector.size()) + " differs from " +
                        std::to_string(dim));
    }
    if (!seen.insert(r.image_id).second) {
      throw FormatError(record_label(i) + ": duplicate image_id \"" + r.image_id + "\"");
    }
    for (float v : r.vector) {
      if (!std::isfinite(v)) throw FormatError(record_label(i) + ": non-finite value");
    }
  }
  binio::write_magic(out, kEmbeddingMagic);
  binio::write_le(out, static_cast<std::uint32_t>(dim == 0 ? 1 : dim));
  binio::write_le(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    binio::write_string16(out, r.image_id);
    for (float v : r.vector) binio::write_f32(out, v);
  }
}

void write_embeddings(const std::filesystem::path& path,
                      std::span<const EmbeddingRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write embeddings " + path.string());
  write_embeddings(out, records);
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<ImageDescriptors> read_local_descriptors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read descriptors " + path.string());
  binio::expect_magic(in, kLocalMagic);
  const auto dim = binio::read_le<std::uint32_t>(in, "descriptor size");
  if (dim != imagefeat::kDescriptorSize) {
    throw FormatError(path.string() + ": descriptor size must be 128");
  }
  const auto images = binio::read_le<std::uint32_t>(in, "image count");
  std::vector<ImageDescriptors> out(images);
  for (auto& img : out) {
    img.image_id = binio::read_string16(in, "image id");
    const auto n = binio::read_le<std::uint32_t>(in, "descriptor count");
    img.descriptors.resize(n);
    for (auto& d : img.descriptors) {
      d.keypoint.x = binio::read_f32(in, "keypoint");
      d.keypoint.y = binio::read_f32(in, "keypoint");
      d.keypoint.scale = binio::read_f32(in, "keypoint");
      d.keypoint.orientation = binio::read_f32(in, "keypoint");
      d.keypoint.response = binio::read_f32(in, "keypoint");
      for (auto& v : d.vector) v = binio::read_f32(in, "descriptor");
    }
  }
  return out;
}

void write_local_descriptors(const std::filesystem::path& path,
                             std::span<const ImageDescriptors> images) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write descriptors " + path.string());
  binio::write_magic(out, kLocalMagic);
  binio::write_le(out, static_cast<std::uint32_t>(imagefeat::kDescriptorSize));
  binio::write_le(out, static_cast<std::uint32_t>(images.size()));
  for (const auto& img : images) {
    binio::write_string16(out, img.image_id);
    binio::write_le(out, static_cast<std::uint32_t>(img.descriptors.size()));
    for (const auto& d : img.descriptors) {
      const auto& k = d.keypoint;
      for (double v : {k.x, k.y, k.scale, k.orientation, k.response}) {
        binio::write_f32(out, static_cast<float>(v));
      }
      for (float v : d.vector) binio::write_f32(out, v);
    }
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace aspectlens
