#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aspectlens/imagefeat.hpp"

namespace aspectlens {

// One fixed-length vector per image.
struct EmbeddingRecord {
  std::string image_id;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

// Embedding file ("EMB1"): u32 dimension, u32 count, then per record a u16
// id length, the UTF-8 id and `dimension` float32 values, all little-endian.
std::vector<EmbeddingRecord> read_embeddings(std::istream& in);
std::vector<EmbeddingRecord> import_embeddings(const std::filesystem::path& path);

void write_embeddings(std::ostream& out, std::span<const EmbeddingRecord> records);
void write_embeddings(const std::filesystem::path& path,
                      std::span<const EmbeddingRecord> records);

// Local descriptors of one image.
struct ImageDescriptors {
  std::string image_id;
  std::vector<imagefeat::LocalDescriptor> descriptors;

  bool operator==(const ImageDescriptors&) const = default;
};

// Local descriptor file ("LOC1"): u32 descriptor size (128), u32 image
// count, then per image a u16 id length, id, u32 descriptor count and per
// descriptor five float32 keypoint fields (x, y, scale, orientation,
// response) followed by 128 float32 values.
std::vector<ImageDescriptors> read_local_descriptors(const std::filesystem::path& path);
void write_local_descriptors(const std::filesystem::path& path,
                             std::span<const ImageDescriptors> images);

}  // namespace aspectlens
