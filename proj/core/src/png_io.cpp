#include "srnam/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>

#include "srnam/errors.hpp"

namespace srnam {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ByteImage read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) {
    throw DatasetError("cannot open image " + path.string());
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_stdio(&image, file.get()) == 0) {
    throw DatasetError("cannot decode " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> interleaved(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, interleaved.data(), 0, nullptr) == 0) {
    png_image_free(&image);
    throw DatasetError("cannot decode " + path.string() + ": " + image.message);
  }
  ByteImage out;
  out.channels = 3;
  out.height = image.height;
  out.width = image.width;
  out.pixels.resize(interleaved.size());
  const size_t plane = static_cast<size_t>(out.height * out.width);
  for (size_t p = 0; p < plane; ++p) {
    for (size_t c = 0; c < 3; ++c) {
      out.pixels[c * plane + p] = interleaved[p * 3 + c];
    }
  }
  return out;
}

std::pair<int64_t, int64_t> png_size(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw DatasetError("cannot read image header of " + path.string() + ": " + image.message);
  }
  const std::pair<int64_t, int64_t> size{image.height, image.width};
  png_image_free(&image);
  return size;
}

void write_png(const std::filesystem::path& path, const ByteImage& image) {
  if (image.channels != 3) {
    throw ShapeError("write_png expects 3 channels");
  }
  const size_t plane = static_cast<size_t>(image.height * image.width);
  std::vector<uint8_t> interleaved(plane * 3);
  for (size_t p = 0; p < plane; ++p) {
    for (size_t c = 0; c < 3; ++c) {
      interleaved[p * 3 + c] = image.pixels[c * plane + p];
    }
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&png, path.c_str(), 0, interleaved.data(), 0, nullptr) == 0) {
    throw DatasetError("cannot write " + path.string() + ": " + png.message);
  }
}

ByteImage tile_grid(const std::vector<ByteImage>& tiles, int64_t cols) {
  if (tiles.empty() || cols <= 0) {
    throw ValueError("tile_grid needs at least one tile and a positive column count");
  }
  const int64_t th = tiles.front().height;
  const int64_t tw = tiles.front().width;
  const int64_t n = static_cast<int64_t>(tiles.size());
  const int64_t rows = (n + cols - 1) / cols;
  ByteImage out;
  out.channels = 3;
  out.height = rows * th;
  out.width = cols * tw;
  out.pixels.assign(static_cast<size_t>(3 * out.height * out.width), 0);
  for (int64_t i = 0; i < n; ++i) {
    const auto& t = tiles[static_cast<size_t>(i)];
    if (t.height != th || t.width != tw || t.channels != 3) {
      throw ShapeError("tile_grid tiles must share one shape");
    }
    const int64_t oy = (i / cols) * th;
    const int64_t ox = (i % cols) * tw;
    for (int64_t c = 0; c < 3; ++c) {
      for (int64_t y = 0; y < th; ++y) {
        for (int64_t x = 0; x < tw; ++x) {
          out.pixels[static_cast<size_t>((c * out.height + oy + y) * out.width + ox + x)] = t.at(c, y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace srnam
