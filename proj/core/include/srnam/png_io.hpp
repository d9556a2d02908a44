#pragma once

#include <filesystem>
#include <utility>

#include "srnam/image_tensor.hpp"

namespace srnam {

/// Reads an 8-bit PNG and converts it to 3-channel RGB (gray is replicated,
/// alpha is dropped). Throws DatasetError on I/O or decode failure.
ByteImage read_png(const std::filesystem::path& path);

/// (height, width) from the PNG header without decoding pixels.
std::pair<int64_t, int64_t> png_size(const std::filesystem::path& path);

/// Writes a 3-channel 8-bit RGB PNG. Output bytes depend only on the pixels.
void write_png(const std::filesystem::path& path, const ByteImage& image);

/// Tiles equally sized (3, S, S) images into a rows x cols grid.
ByteImage tile_grid(const std::vector<ByteImage>& tiles, int64_t cols);

}  // namespace srnam
