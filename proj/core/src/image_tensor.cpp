#include "srnam/image_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srnam/errors.hpp"

namespace srnam {

bool is_supported_side(int64_t side) noexcept {
  return side == 4 || side == 8 || side == 16 || side == 32 || side == 64;
}

namespace {

void check_shape(const torch::Tensor& t) {
  if (t.dim() != 3 || t.size(0) != kImageChannels) {
    throw ShapeError("image must have shape (3, S, S), got " + c10::str(t.sizes()));
  }
  if (t.size(1) != t.size(2)) {
    throw ShapeError("image must be square, got " + c10::str(t.sizes()));
  }
  if (!is_supported_side(t.size(1))) {
    throw ShapeError("unsupported image side " + std::to_string(t.size(1)));
  }
}

}  // namespace

ImageTensor::ImageTensor(torch::Tensor data)
    : data_(data.detach().to(torch::kDouble).contiguous().clone()) {
  check_shape(data_);
  if (!torch::isfinite(data_).all().item<bool>()) {
    throw ValueError("image contains non-finite values");
  }
  if (data_.numel() > 0 && (data_.min().item<double>() < -1.0 || data_.max().item<double>() > 1.0)) {
    throw ValueError("image intensities must lie in [-1, 1]");
  }
}

ImageTensor ImageTensor::clamped(const torch::Tensor& data) {
  return ImageTensor(data.detach().to(torch::kDouble).clamp(-1.0, 1.0));
}

torch::Tensor ImageTensor::batched(torch::Dtype dtype) const {
  return data_.to(dtype).unsqueeze(0);
}

bool ImageTensor::operator==(const ImageTensor& other) const {
  return data_.sizes() == other.data_.sizes() && torch::equal(data_, other.data_);
}

ImageTensor normalize(const ByteImage& image) {
  if (image.channels != kImageChannels) {
    throw ShapeError("expected 3 channels, got " + std::to_string(image.channels));
  }
  if (image.height != image.width) {
    throw ShapeError("image must be square, got " + std::to_string(image.height) + "x" +
                     std::to_string(image.width));
  }
  if (image.pixels.size() != static_cast<size_t>(image.channels * image.height * image.width)) {
    throw ShapeError("pixel buffer size does not match the declared shape");
  }
  auto values = torch::empty({image.channels, image.height, image.width}, torch::kDouble);
  auto* out = values.data_ptr<double>();
  for (size_t i = 0; i < image.pixels.size(); ++i) {
    out[i] = static_cast<double>(image.pixels[i]) / 127.5 - 1.0;
  }
  return ImageTensor(values);
}

ImageTensor normalize(const torch::Tensor& values_0_255) {
  check_shape(values_0_255);
  return ImageTensor(values_0_255.to(torch::kDouble) / 127.5 - 1.0);
}

ByteImage denormalize_tensor(const torch::Tensor& chw) {
  if (chw.dim() != 3) {
    throw ShapeError("expected a (C, H, W) tensor");
  }
  auto values = chw.detach().to(torch::kDouble).contiguous();
  ByteImage out;
  out.channels = values.size(0);
  out.height = values.size(1);
  out.width = values.size(2);
  out.pixels.resize(static_cast<size_t>(values.numel()));
  const auto* in = values.data_ptr<double>();
  for (size_t i = 0; i < out.pixels.size(); ++i) {
    // std::round rounds half away from zero.
    const double v = std::round((in[i] + 1.0) * 127.5);
    out.pixels[i] = static_cast<uint8_t>(std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 255.0));
  }
  return out;
}

ByteImage denormalize(const ImageTensor& image) { return denormalize_tensor(image.tensor()); }

}  // namespace srnam
