#include "aspectlens/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "aspectlens/error.hpp"

namespace aspectlens {

namespace {

// Reads the next header integer, skipping whitespace and '#' comments.
long next_header_int(std::istream& in, const std::string& name) {
  int c = in.peek();
  while (c != EOF) {
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      break;
    }
    c = in.peek();
  }
  long v = -1;
  if (!(in >> v) || v < 0) throw FormatError(name + ": bad PGM header");
  return v;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read image " + path.string());
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || magic[1] != '5') {
    throw FormatError(path.string() + ": not a binary PGM (P5)");
  }
  const auto name = path.string();
  const long width = next_header_int(in, name);
  const long height = next_header_int(in, name);
  const long maxval = next_header_int(in, name);
  if (width == 0 || height == 0 || maxval == 0 || maxval > 255) {
    throw FormatError(name + ": unsupported PGM dimensions or maxval");
  }
  in.get();  // single whitespace before raster
  GrayImage img(static_cast<std::size_t>(width), static_cast<std::size_t>(height));
  std::vector<unsigned char> raw(img.pixels.size());
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()))) {
    throw FormatError(name + ": truncated raster");
  }
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < raw.size(); ++i) img.pixels[i] = raw[i] * scale;
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write image " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.pixels) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0))));
  }
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace aspectlens
