#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "aspectlens/image.hpp"

namespace aspectlens::imagefeat {

inline constexpr std::size_t kDescriptorSize = 128;
inline constexpr std::size_t kDefaultTop = 64;

struct Keypoint {
  double x = 0.0;  // original image coordinates
  double y = 0.0;
  double scale = 0.0;        // Gaussian sigma in original image units
  double orientation = 0.0;  // radians in [0, 2pi)
  double response = 0.0;     // |DoG|

  bool operator==(const Keypoint&) const = default;
};

struct LocalDescriptor {
  Keypoint keypoint;
  std::array<float, kDescriptorSize> vector{};

  bool operator==(const LocalDescriptor&) const = default;
};

// Difference-of-Gaussians detector settings. The input is upsampled by two
// before the first octave.
struct DetectorConfig {
  int octaves = 3;
  int scales_per_octave = 3;
  double sigma0 = 1.6;
  double input_sigma = 0.5;
  double contrast_threshold = 0.03;
  double edge_ratio = 10.0;
  bool upsample = true;
};

inline constexpr std::size_t kMinImageSide = 16;

// Detects scale-space extrema and computes 128-d gradient-histogram
// descriptors. Output is sorted by response, strongest first; equal
// responses keep scan order (octave, level, row, column).
std::vector<LocalDescriptor> detect_and_describe(const GrayImage& image,
                                                 const DetectorConfig& config = {});

// The `m` strongest descriptors, stable with respect to input order.
std::vector<LocalDescriptor> select_top(std::span<const LocalDescriptor> descriptors,
                                        std::size_t m = kDefaultTop);

// Separable Gaussian blur with edge clamping, also used by tests.
GrayImage gaussian_blur(const GrayImage& image, double sigma);

}  // namespace aspectlens::imagefeat
