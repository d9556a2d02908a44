#include "srnam/percept.hpp"

#include <algorithm>
#include <array>
#include <fstream>

#include "srnam/errors.hpp"
#include "srnam/rng.hpp"

namespace srnam::percept {

namespace F = torch::nn::functional;

RandomFeatureExtractor::RandomFeatureExtractor(const RandomFeatureOptions& options)
    : dtype_(options.dtype) {
  if (options.stages < 1 || options.base_width < 1) {
    throw ValueError("random feature extractor needs at least one stage and positive width");
  }
  int64_t in = kImageChannels;
  int64_t width = options.base_width;
  for (int64_t s = 0; s < options.stages; ++s) {
    torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, width, 3).stride(2).padding(1));
    init_parameters(*conv, mix_seed(options.seed, static_cast<uint64_t>(s)));
    {
      // Non-zero biases so that taps are not purely odd functions of the input.
      torch::NoGradGuard no_grad;
      auto gen = make_generator(mix_seed(options.seed, 1000 + static_cast<uint64_t>(s)));
      conv->bias.copy_(0.1 * torch::randn(conv->bias.sizes(), gen, torch::kDouble));
    }
    conv->to(dtype_);
    for (auto& p : conv->parameters()) p.set_requires_grad(false);
    stages_.push_back(conv);
    in = width;
    width *= 2;
  }
}

std::vector<torch::Tensor> RandomFeatureExtractor::extract(const torch::Tensor& batch) const {
  std::vector<torch::Tensor> taps;
  taps.reserve(stages_.size());
  auto h = batch.to(dtype_);
  for (const auto& conv : stages_) {
    h = F::leaky_relu(conv.ptr()->forward(h), F::LeakyReLUFuncOptions().negative_slope(0.2));
    taps.push_back(h);
  }
  return taps;
}

namespace {

// torchvision vgg19 "features": numbers are conv widths, 0 is a 2x2 max pool.
constexpr std::array<int64_t, 21> kVgg19 = {64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0,
                                            512, 512, 512, 512, 0, 512, 512, 512, 512, 0};

}  // namespace

VggFeatureExtractor::VggFeatureExtractor(const VggOptions& options)
    : taps_(options.taps), dtype_(options.dtype) {
  if (taps_.empty()) {
    throw ValueError("VGG extractor needs at least one tap");
  }
  for (auto t : taps_) {
    if (t < 0 || t > 4) throw ValueError("VGG tap must name a pooling stage in [0, 4]");
  }
  int64_t in = kImageChannels;
  int64_t index = 0;
  for (int64_t width : kVgg19) {
    if (width == 0) {
      layers_.push_back({index, nullptr});
      index += 1;
    } else {
      torch::nn::Conv2d conv(torch::nn::Conv2dOptions(in, width, 3).padding(1));
      init_parameters(*conv, mix_seed(options.seed, static_cast<uint64_t>(index)));
      layers_.push_back({index, conv});
      in = width;
      index += 2;  // conv + ReLU
    }
  }
  if (!options.weights.empty()) {
    std::ifstream file(options.weights, std::ios::binary);
    if (!file) {
      throw CheckpointError("cannot open VGG weights " + options.weights.string());
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
    c10::impl::GenericDict dict = torch::pickle_load(bytes).toGenericDict();
    torch::NoGradGuard no_grad;
    for (auto& layer : layers_) {
      if (!layer.conv) continue;
      for (const char* name : {"weight", "bias"}) {
        const std::string key = "features." + std::to_string(layer.index) + "." + name;
        if (!dict.contains(key)) {
          throw CheckpointError("VGG weights lack '" + key + "'");
        }
        auto src = dict.at(key).toTensor();
        auto& dst = std::string(name) == "weight" ? layer.conv->weight : layer.conv->bias;
        if (src.sizes() != dst.sizes()) {
          throw CheckpointError("VGG weight '" + key + "' has shape " + c10::str(src.sizes()));
        }
        dst.copy_(src);
      }
    }
  }
  for (auto& layer : layers_) {
    if (!layer.conv) continue;
    layer.conv->to(dtype_);
    for (auto& p : layer.conv->parameters()) p.set_requires_grad(false);
  }
}

std::vector<torch::Tensor> VggFeatureExtractor::extract(const torch::Tensor& batch) const {
  auto opts = torch::TensorOptions().dtype(dtype_);
  const auto mean = torch::tensor({0.485, 0.456, 0.406}, opts).view({1, 3, 1, 1});
  const auto stdev = torch::tensor({0.229, 0.224, 0.225}, opts).view({1, 3, 1, 1});
  auto h = ((batch.to(dtype_) + 1.0) * 0.5 - mean) / stdev;
  const int64_t last_tap = *std::max_element(taps_.begin(), taps_.end());
  std::vector<torch::Tensor> pooled;
  for (const auto& layer : layers_) {
    if (layer.conv) {
      h = torch::relu(layer.conv.ptr()->forward(h));
    } else {
      h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2));
      pooled.push_back(h);
      if (static_cast<int64_t>(pooled.size()) > last_tap) break;
    }
  }
  std::vector<torch::Tensor> taps;
  taps.reserve(taps_.size());
  for (auto t : taps_) taps.push_back(pooled[static_cast<size_t>(t)]);
  return taps;
}

std::shared_ptr<const FeatureExtractor> make_feature_extractor(const PerceptConfig& config) {
  if (config.backend == "random") {
    return std::make_shared<RandomFeatureExtractor>(
        RandomFeatureOptions{config.seed, config.stages, config.width, config.dtype});
  }
  if (config.backend == "pretrained") {
    VggOptions options;
    options.weights = config.weights;
    options.seed = config.seed;
    options.dtype = config.dtype;
    return std::make_shared<VggFeatureExtractor>(options);
  }
  throw ValueError("unknown percept.backend '" + config.backend + "' (expected random or pretrained)");
}

torch::Tensor perceptual_distance(const FeatureExtractor& fx, const torch::Tensor& a,
                                  const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw ShapeError("perceptual_distance inputs differ in shape: " + c10::str(a.sizes()) + " vs " +
                     c10::str(b.sizes()));
  }
  const auto fa = fx.extract(a);
  const auto fb = fx.extract(b);
  auto total = torch::zeros({}, torch::TensorOptions().dtype(fx.dtype()));
  for (size_t i = 0; i < fa.size(); ++i) {
    total = total + (fa[i] - fb[i]).abs().mean();
  }
  return total;
}

namespace {

void require_hr(const ImageTensor& x) {
  if (x.side() != kHrSide) {
    throw ShapeError("feature extraction expects a 64x64 image, got " + std::to_string(x.side()));
  }
}

}  // namespace

std::vector<torch::Tensor> features(const FeatureExtractor& fx, const ImageTensor& x) {
  require_hr(x);
  torch::NoGradGuard no_grad;
  auto maps = fx.extract(x.batched(fx.dtype()));
  for (auto& m : maps) m = m.squeeze(0);
  return maps;
}

double perceptual_distance(const FeatureExtractor& fx, const ImageTensor& a, const ImageTensor& b) {
  require_hr(a);
  require_hr(b);
  torch::NoGradGuard no_grad;
  return perceptual_distance(fx, a.batched(fx.dtype()), b.batched(fx.dtype())).item<double>();
}

}  // namespace srnam::percept
