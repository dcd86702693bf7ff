#include "aspectlens/imagefeat.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aspectlens::imagefeat {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kOrientationBins = 36;
constexpr int kDescriptorCells = 4;
constexpr int kDescriptorBins = 8;
constexpr double kDescriptorClamp = 0.2;

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

GrayImage upsample2(const GrayImage& in) {
  GrayImage out(in.width * 2, in.height * 2);
  auto sample = [&](std::size_t x, std::size_t y) {
    return in.at(std::min(x, in.width - 1), std::min(y, in.height - 1));
  };
  for (std::size_t y = 0; y < out.height; ++y) {
    const std::size_t sy = y / 2;
    const bool hy = (y % 2) != 0;
    for (std::size_t x = 0; x < out.width; ++x) {
      const std::size_t sx = x / 2;
      const bool hx = (x % 2) != 0;
      double v = sample(sx, sy);
      if (hx && hy) {
        v = 0.25 * (v + sample(sx + 1, sy) + sample(sx, sy + 1) + sample(sx + 1, sy + 1));
      } else if (hx) {
        v = 0.5 * (v + sample(sx + 1, sy));
      } else if (hy) {
        v = 0.5 * (v + sample(sx, sy + 1));
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

GrayImage downsample2(const GrayImage& in) {
  GrayImage out(in.width / 2, in.height / 2);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) out.at(x, y) = in.at(2 * x, 2 * y);
  }
  return out;
}

GrayImage subtract(const GrayImage& a, const GrayImage& b) {
  GrayImage out(a.width, a.height);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] = a.pixels[i] - b.pixels[i];
  return out;
}

struct Octave {
  std::vector<GrayImage> gauss;
  std::vector<GrayImage> dog;
};

std::vector<Octave> build_pyramid(GrayImage base, const DetectorConfig& cfg) {
  const int s = cfg.scales_per_octave;
  std::vector<Octave> pyramid;
  for (int o = 0; o < cfg.octaves; ++o) {
    if (base.width < 3 || base.height < 3) break;
    Octave oct;
    oct.gauss.push_back(base);
    for (int i = 1; i < s + 3; ++i) {
      const double prev = cfg.sigma0 * std::pow(2.0, (i - 1) / static_cast<double>(s));
      const double cur = cfg.sigma0 * std::pow(2.0, i / static_cast<double>(s));
      oct.gauss.push_back(gaussian_blur(oct.gauss.back(), std::sqrt(cur * cur - prev * prev)));
    }
    for (int i = 0; i + 1 < static_cast<int>(oct.gauss.size()); ++i) {
      oct.dog.push_back(subtract(oct.gauss[i + 1], oct.gauss[i]));
    }
    base = downsample2(oct.gauss[s]);
    pyramid.push_back(std::move(oct));
  }
  return pyramid;
}

bool is_extremum(const Octave& oct, int level, std::size_t x, std::size_t y) {
  const double v = oct.dog[level].at(x, y);
  const bool is_max = v > 0.0;
  for (int dl = -1; dl <= 1; ++dl) {
    const auto& img = oct.dog[level + dl];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dl == 0 && dy == 0 && dx == 0) continue;
        const double n = img.at(x + dx, y + dy);
        if (is_max ? !(v > n) : !(v < n)) return false;
      }
    }
  }
  return true;
}

bool passes_edge_test(const GrayImage& d, std::size_t x, std::size_t y, double r) {
  const double v = d.at(x, y);
  const double dxx = d.at(x + 1, y) + d.at(x - 1, y) - 2.0 * v;
  const double dyy = d.at(x, y + 1) + d.at(x, y - 1) - 2.0 * v;
  const double dxy = (d.at(x + 1, y + 1) - d.at(x - 1, y + 1) - d.at(x + 1, y - 1) +
                      d.at(x - 1, y - 1)) * 0.25;
  const double tr = dxx + dyy;
  const double det = dxx * dyy - dxy * dxy;
  if (det <= 0.0) return false;
  return tr * tr * r < (r + 1.0) * (r + 1.0) * det;
}

// Central-difference gradient; false at the image border.
bool gradient(const GrayImage& img, long x, long y, double& mag, double& ori) {
  if (x <= 0 || y <= 0 || x >= static_cast<long>(img.width) - 1 ||
      y >= static_cast<long>(img.height) - 1) {
    return false;
  }
  const double gx = img.at(x + 1, y) - img.at(x - 1, y);
  const double gy = img.at(x, y + 1) - img.at(x, y - 1);
  mag = std::sqrt(gx * gx + gy * gy);
  ori = std::atan2(gy, gx);
  if (ori < 0.0) ori += kTwoPi;
  return true;
}

double dominant_orientation(const GrayImage& img, long cx, long cy, double sigma) {
  const double weight_sigma = 1.5 * sigma;
  const long radius = std::lround(3.0 * weight_sigma);
  std::array<double, kOrientationBins> hist{};
  for (long dy = -radius; dy <= radius; ++dy) {
    for (long dx = -radius; dx <= radius; ++dx) {
      double mag = 0.0;
      double ori = 0.0;
      if (!gradient(img, cx + dx, cy + dy, mag, ori)) continue;
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * weight_sigma * weight_sigma));
      int bin = static_cast<int>(std::floor(ori * kOrientationBins / kTwoPi));
      bin = std::clamp(bin, 0, kOrientationBins - 1);
      hist[bin] += w * mag;
    }
  }
  std::array<double, kOrientationBins> smooth{};
  for (int i = 0; i < kOrientationBins; ++i) {
    auto at = [&](int k) { return hist[(k + kOrientationBins) % kOrientationBins]; };
    smooth[i] = (at(i - 2) + at(i + 2)) / 16.0 + (at(i - 1) + at(i + 1)) * 4.0 / 16.0 +
                at(i) * 6.0 / 16.0;
  }
  const auto peak = static_cast<int>(std::max_element(smooth.begin(), smooth.end()) - smooth.begin());
  if (smooth[peak] <= 0.0) return 0.0;
  const double left = smooth[(peak + kOrientationBins - 1) % kOrientationBins];
  const double right = smooth[(peak + 1) % kOrientationBins];
  const double denom = left - 2.0 * smooth[peak] + right;
  const double offset = denom == 0.0 ? 0.0 : 0.5 * (left - right) / denom;
  double theta = (peak + 0.5 + offset) * kTwoPi / kOrientationBins;
  theta = std::fmod(theta, kTwoPi);
  if (theta < 0.0) theta += kTwoPi;
  if (theta >= kTwoPi) theta = 0.0;
  return theta;
}

std::array<float, kDescriptorSize> describe(const GrayImage& img, long cx, long cy,
                                            double sigma, double theta) {
  constexpr int n = kDescriptorCells;
  constexpr int nb = kDescriptorBins;
  const double cell_width = 3.0 * sigma;
  const long radius = std::lround(cell_width * std::numbers::sqrt2 * (n + 1) * 0.5);
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  // (n + 2)^2 cells so trilinear spill over the edge needs no branches.
  std::vector<double> hist((n + 2) * (n + 2) * nb, 0.0);
  auto bin_at = [&](int r, int c, int o) -> double& { return hist[((r + 1) * (n + 2) + (c + 1)) * nb + o]; };

  for (long dy = -radius; dy <= radius; ++dy) {
    for (long dx = -radius; dx <= radius; ++dx) {
      const double rx = (cos_t * dx + sin_t * dy) / cell_width;
      const double ry = (-sin_t * dx + cos_t * dy) / cell_width;
      const double rbin = ry + n / 2.0 - 0.5;
      const double cbin = rx + n / 2.0 - 0.5;
      if (rbin <= -1.0 || rbin >= n || cbin <= -1.0 || cbin >= n) continue;
      double mag = 0.0;
      double ori = 0.0;
      if (!gradient(img, cx + dx, cy + dy, mag, ori)) continue;
      const double w = std::exp(-(rx * rx + ry * ry) / (2.0 * (n / 2.0) * (n / 2.0)));
      double rel = ori - theta;
      while (rel < 0.0) rel += kTwoPi;
      while (rel >= kTwoPi) rel -= kTwoPi;
      const double obin = rel * nb / kTwoPi;
      const int r0 = static_cast<int>(std::floor(rbin));
      const int c0 = static_cast<int>(std::floor(cbin));
      const int o0 = static_cast<int>(std::floor(obin));
      const double fr = rbin - r0;
      const double fc = cbin - c0;
      const double fo = obin - o0;
      const double v = w * mag;
      for (int ir = 0; ir < 2; ++ir) {
        const double wr = ir ? fr : 1.0 - fr;
        for (int ic = 0; ic < 2; ++ic) {
          const double wc = ic ? fc : 1.0 - fc;
          for (int io = 0; io < 2; ++io) {
            const double wo = io ? fo : 1.0 - fo;
            bin_at(r0 + ir, c0 + ic, (o0 + io) % nb) += v * wr * wc * wo;
          }
        }
      }
    }
  }

  std::array<double, kDescriptorSize> desc{};
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int o = 0; o < nb; ++o) desc[(r * n + c) * nb + o] = bin_at(r, c, o);
    }
  }
  auto normalize = [&]() {
    double norm = 0.0;
    for (double v : desc) norm += v * v;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& v : desc) v /= norm;
    }
    return norm > 0.0;
  };
  std::array<float, kDescriptorSize> out{};
  if (!normalize()) return out;
  for (auto& v : desc) v = std::min(v, kDescriptorClamp);
  normalize();
  for (std::size_t i = 0; i < kDescriptorSize; ++i) out[i] = static_cast<float>(desc[i]);
  return out;
}

}  // namespace

GrayImage gaussian_blur(const GrayImage& image, double sigma) {
  if (sigma <= 0.0) return image;
  const auto k = gaussian_kernel(sigma);
  const long radius = static_cast<long>(k.size() / 2);
  const long w = static_cast<long>(image.width);
  const long h = static_cast<long>(image.height);
  GrayImage tmp(image.width, image.height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * image.at(std::clamp(x + i, 0L, w - 1), y);
      }
      tmp.at(x, y) = acc;
    }
  }
  GrayImage out(image.width, image.height);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double acc = 0.0;
      for (long i = -radius; i <= radius; ++i) {
        acc += k[i + radius] * tmp.at(x, std::clamp(y + i, 0L, h - 1));
      }
      out.at(x, y) = acc;
    }
  }
  return out;
}

std::vector<LocalDescriptor> detect_and_describe(const GrayImage& image,
                                                 const DetectorConfig& config) {
  if (image.width < kMinImageSide || image.height < kMinImageSide) {
    throw std::invalid_argument("image must be at least 16x16");
  }
  if (image.pixels.size() != image.width * image.height) {
    throw std::invalid_argument("image pixel buffer does not match its size");
  }
  if (!std::all_of(image.pixels.begin(), image.pixels.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw std::invalid_argument("image contains non-finite pixel values");
  }
  if (config.octaves < 1 || config.scales_per_octave < 1 || config.sigma0 <= config.input_sigma) {
    throw std::invalid_argument("invalid detector configuration");
  }

  GrayImage base = config.upsample ? upsample2(image) : image;
  const double input_sigma = config.upsample ? 2.0 * config.input_sigma : config.input_sigma;
  base = gaussian_blur(base, std::sqrt(config.sigma0 * config.sigma0 - input_sigma * input_sigma));
  const auto pyramid = build_pyramid(std::move(base), config);

  const int s = config.scales_per_octave;
  const double to_original = config.upsample ? 0.5 : 1.0;
  std::vector<LocalDescriptor> out;
  for (std::size_t o = 0; o < pyramid.size(); ++o) {
    const auto& oct = pyramid[o];
    const double octave_scale = std::ldexp(to_original, static_cast<int>(o));
    const std::size_t w = oct.dog[0].width;
    const std::size_t h = oct.dog[0].height;
    for (int level = 1; level <= s; ++level) {
      const auto& dog = oct.dog[level];
      for (std::size_t y = 1; y + 1 < h; ++y) {
        for (std::size_t x = 1; x + 1 < w; ++x) {
          const double v = dog.at(x, y);
          if (std::abs(v) < config.contrast_threshold) continue;
          if (!is_extremum(oct, level, x, y)) continue;
          if (!passes_edge_test(dog, x, y, config.edge_ratio)) continue;
          const double sigma_oct = config.sigma0 * std::pow(2.0, level / static_cast<double>(s));
          const auto& g = oct.gauss[level];
          const auto lx = static_cast<long>(x);
          const auto ly = static_cast<long>(y);
          LocalDescriptor d;
          d.keypoint.x = x * octave_scale;
          d.keypoint.y = y * octave_scale;
          d.keypoint.scale = sigma_oct * octave_scale;
          d.keypoint.response = std::abs(v);
          d.keypoint.orientation = dominant_orientation(g, lx, ly, sigma_oct);
          d.vector = describe(g, lx, ly, sigma_oct, d.keypoint.orientation);
          out.push_back(d);
        }
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const LocalDescriptor& a, const LocalDescriptor& b) {
    return a.keypoint.response > b.keypoint.response;
  });
  return out;
}

std::vector<LocalDescriptor> select_top(std::span<const LocalDescriptor> descriptors,
                                        std::size_t m) {
  if (m == 0) throw std::invalid_argument("select_top needs m >= 1");
  std::vector<LocalDescriptor> out(descriptors.begin(), descriptors.end());
  std::stable_sort(out.begin(), out.end(), [](const LocalDescriptor& a, const LocalDescriptor& b) {
    return a.keypoint.response > b.keypoint.response;
  });
  if (out.size() > m) out.resize(m);
  return out;
}

}  // namespace aspectlens::imagefeat
