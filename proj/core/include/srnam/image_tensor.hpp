#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

namespace srnam {

inline constexpr int64_t kImageChannels = 3;
inline constexpr int64_t kHrSide = 64;
inline constexpr int64_t kLrSide = 16;

/// True for the side lengths an ImageTensor may take: 4, 8, 16, 32, 64.
bool is_supported_side(int64_t side) noexcept;

/// A (3, S, S) image with intensities in [-1, 1].
///
/// Stored as float64. The wrapped tensor is detached and never modified after construction, so
/// instances can be copied and shared freely across threads.
class ImageTensor {
 public:
  /// Validates shape and range; throws ShapeError / ValueError.
  explicit ImageTensor(torch::Tensor data);

  /// Clamps into [-1, 1] before validating the shape. Use for network output
  /// that is in range up to rounding.
  static ImageTensor clamped(const torch::Tensor& data);

  const torch::Tensor& tensor() const noexcept { return data_; }
  int64_t side() const noexcept { return data_.size(1); }

  /// (1, 3, S, S) view in the requested dtype, ready to feed a network.
  torch::Tensor batched(torch::Dtype dtype = torch::kFloat) const;

  bool operator==(const ImageTensor& other) const;

 private:
  torch::Tensor data_;
};

/// 8-bit image in channel-major (C, H, W) order.
struct ByteImage {
  int64_t channels = 0;
  int64_t height = 0;
  int64_t width = 0;
  std::vector<uint8_t> pixels;

  uint8_t at(int64_t c, int64_t y, int64_t x) const {
    return pixels[static_cast<size_t>((c * height + y) * width + x)];
  }
  bool operator==(const ByteImage&) const = default;
};

/// v -> v / 127.5 - 1.
ImageTensor normalize(const ByteImage& image);

/// Real-valued variant of normalize for inputs already in [0, 255].
ImageTensor normalize(const torch::Tensor& values_0_255);

/// Inverse of normalize, rounding half away from zero and clamping to [0, 255].
ByteImage denormalize(const ImageTensor& image);

/// Same as denormalize but without the range invariant on the input, so
/// out-of-range values are clamped.
ByteImage denormalize_tensor(const torch::Tensor& chw);

}  // namespace srnam
