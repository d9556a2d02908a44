#include "srnam/degrader.hpp"

#include "srnam/errors.hpp"
#include "srnam/rng.hpp"

namespace srnam::degrader {

namespace F = torch::nn::functional;

namespace {

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(0.2));
}

torch::nn::Conv2d conv3x3(int64_t in, int64_t out) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).padding(1));
}

torch::Dtype module_dtype(torch::nn::Module& m) {
  const auto params = m.parameters();
  return params.empty() ? torch::kFloat : params.front().scalar_type();
}

}  // namespace

NoiseVector::NoiseVector(torch::Tensor values) : values_(values.detach().to(torch::kDouble).contiguous()) {
  if (values_.dim() != 1 || values_.size(0) != kNoiseDim) {
    throw ShapeError("noise vector must have exactly 100 entries, got shape " + c10::str(values_.sizes()));
  }
}

NoiseVector NoiseVector::sample(uint64_t seed) {
  auto gen = make_generator(seed);
  return NoiseVector(torch::randn({kNoiseDim}, gen, torch::kDouble));
}

torch::Tensor pixel_shuffle(const torch::Tensor& x, int64_t r) {
  if (r < 1) {
    throw ValueError("pixel shuffle factor must be positive");
  }
  if (x.dim() == 3) {
    return degrader::pixel_shuffle(x.unsqueeze(0), r).squeeze(0);
  }
  if (x.dim() != 4) {
    throw ShapeError("pixel_shuffle expects (C, H, W) or (B, C, H, W)");
  }
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  if (c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(c) + " channels not divisible by " +
                     std::to_string(r * r));
  }
  const int64_t oc = c / (r * r);
  return x.reshape({b, oc, r, r, h, w}).permute({0, 1, 4, 2, 5, 3}).reshape({b, oc, h * r, w * r});
}

torch::Tensor pixel_unshuffle(const torch::Tensor& x, int64_t r) {
  if (r < 1) {
    throw ValueError("pixel unshuffle factor must be positive");
  }
  if (x.dim() == 3) {
    return degrader::pixel_unshuffle(x.unsqueeze(0), r).squeeze(0);
  }
  if (x.dim() != 4) {
    throw ShapeError("pixel_unshuffle expects (C, H, W) or (B, C, H, W)");
  }
  const int64_t b = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
  if (h % r != 0 || w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial size not divisible by " + std::to_string(r));
  }
  return x.reshape({b, c, h / r, r, w / r, r}).permute({0, 1, 3, 5, 2, 4}).reshape({b, c * r * r, h / r, w / r});
}

ResidualBlockImpl::ResidualBlockImpl(int64_t in_channels, int64_t out_channels) {
  conv1 = register_module("conv1", conv3x3(in_channels, out_channels));
  conv2 = register_module("conv2", conv3x3(out_channels, out_channels));
  if (in_channels != out_channels) {
    skip = register_module("skip", torch::nn::Conv2d(torch::nn::Conv2dOptions(in_channels, out_channels, 1)));
  }
}

torch::Tensor ResidualBlockImpl::forward(const torch::Tensor& x) {
  auto h = conv2(lrelu(conv1(lrelu(x))));
  return (skip ? skip(x) : x) + h;
}

DegraderGeneratorImpl::DegraderGeneratorImpl(const GeneratorArch& a) : arch(a) {
  if (arch.width < 1 || arch.noise_dim < 1 || arch.hr_side < 16 || arch.hr_side % 16 != 0) {
    throw ValueError("invalid degradation generator architecture");
  }
  noise_proj = register_module("noise_proj", torch::nn::Linear(arch.noise_dim, arch.hr_side * arch.hr_side));
  stem = register_module("stem", conv3x3(kImageChannels + 1, arch.width));
  groups = register_module("groups", torch::nn::ModuleList());
  for (int g = 0; g < 6; ++g) {
    groups->push_back(torch::nn::Sequential(ResidualBlock(arch.width, arch.width),
                                            ResidualBlock(arch.width, arch.width)));
  }
  up_convs = register_module("up_convs", torch::nn::ModuleList());
  for (int u = 0; u < 2; ++u) up_convs->push_back(conv3x3(arch.width, 4 * arch.width));
  head = register_module("head", conv3x3(arch.width, kImageChannels));
}

torch::Tensor DegraderGeneratorImpl::project_noise(const torch::Tensor& z) {
  if (z.dim() != 2 || z.size(1) != arch.noise_dim) {
    throw ShapeError("noise batch must be (B, " + std::to_string(arch.noise_dim) + ")");
  }
  return noise_proj(z).view({z.size(0), 1, arch.hr_side, arch.hr_side});
}

torch::Tensor DegraderGeneratorImpl::forward(const torch::Tensor& hr, const torch::Tensor& z) {
  if (hr.dim() != 4 || hr.size(1) != kImageChannels || hr.size(2) != arch.hr_side || hr.size(3) != arch.hr_side) {
    throw ShapeError("degradation generator expects (B, 3, " + std::to_string(arch.hr_side) + ", " +
                     std::to_string(arch.hr_side) + "), got " + c10::str(hr.sizes()));
  }
  if (z.size(0) != hr.size(0)) {
    throw ShapeError("noise and image batch sizes differ");
  }
  auto h = stem(torch::cat({hr, project_noise(z)}, 1));
  for (size_t g = 0; g < 4; ++g) {
    h = groups[g]->as<torch::nn::SequentialImpl>()->forward(h);
    h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
  }
  for (size_t g = 4; g < 6; ++g) {
    h = degrader::pixel_shuffle(up_convs[g - 4]->as<torch::nn::Conv2dImpl>()->forward(h), 2);
    h = groups[g]->as<torch::nn::SequentialImpl>()->forward(h);
  }
  return torch::tanh(head(lrelu(h)));
}

DegraderDiscriminatorImpl::DegraderDiscriminatorImpl(const DiscriminatorArch& a) : arch(a) {
  if (arch.width < 1 || arch.lr_side < 4 || arch.lr_side % 4 != 0) {
    throw ValueError("invalid degradation discriminator architecture");
  }
  stem = register_module("stem", conv3x3(kImageChannels, arch.width));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int b = 0; b < 6; ++b) blocks->push_back(ResidualBlock(arch.width, arch.width));
  const int64_t side = arch.lr_side / 4;
  fc = register_module("fc", torch::nn::Linear(arch.width * side * side, 1));
}

torch::Tensor DegraderDiscriminatorImpl::forward(const torch::Tensor& lr) {
  if (lr.dim() != 4 || lr.size(1) != kImageChannels || lr.size(2) != arch.lr_side || lr.size(3) != arch.lr_side) {
    throw ShapeError("degradation discriminator expects (B, 3, " + std::to_string(arch.lr_side) + ", " +
                     std::to_string(arch.lr_side) + "), got " + c10::str(lr.sizes()));
  }
  auto h = stem(lr);
  for (size_t b = 0; b < blocks->size(); ++b) {
    h = blocks[b]->as<ResidualBlockImpl>()->forward(h);
    if (b >= 4) h = F::max_pool2d(h, F::MaxPool2dFuncOptions(2));
  }
  return fc(lrelu(h).flatten(1)).squeeze(1);
}

torch::Tensor project_noise(DegraderGenerator& g, const NoiseVector& z) {
  torch::NoGradGuard no_grad;
  return g->project_noise(z.values().to(module_dtype(*g)).unsqueeze(0)).squeeze(0).to(torch::kDouble);
}

ImageTensor degrade(DegraderGenerator& g, const ImageTensor& hr, const NoiseVector& z) {
  if (hr.side() != g->arch.hr_side) {
    throw ShapeError("degrade expects a " + std::to_string(g->arch.hr_side) + "px HR image, got " +
                     std::to_string(hr.side()));
  }
  torch::NoGradGuard no_grad;
  const auto dtype = module_dtype(*g);
  auto out = g->forward(hr.batched(dtype), z.values().to(dtype).unsqueeze(0));
  return ImageTensor::clamped(out.squeeze(0));
}

double disc_score(DegraderDiscriminator& d, const ImageTensor& lr) {
  if (lr.side() != d->arch.lr_side) {
    throw ShapeError("disc_score expects a " + std::to_string(d->arch.lr_side) + "px LR image, got " +
                     std::to_string(lr.side()));
  }
  torch::NoGradGuard no_grad;
  return d->forward(lr.batched(module_dtype(*d))).item<double>();
}

DegraderModel make_model(const GeneratorArch& g, const DiscriminatorArch& d, uint64_t seed,
                         torch::Dtype dtype) {
  DegraderModel model{g, d, DegraderGenerator(g), DegraderDiscriminator(d)};
  init_parameters(*model.generator, mix_seed(seed, 0));
  init_parameters(*model.discriminator, mix_seed(seed, 1));
  {
    // Damp the residual branches so twelve unnormalized blocks start close to identity.
    torch::NoGradGuard no_grad;
    for (auto* net : {static_cast<torch::nn::Module*>(model.generator.get()),
                      static_cast<torch::nn::Module*>(model.discriminator.get())}) {
      for (auto& item : net->named_parameters()) {
        if (item.key().ends_with("conv2.weight")) item.value().mul_(0.1);
      }
    }
  }
  model.generator->to(dtype);
  model.discriminator->to(dtype);
  return model;
}

}  // namespace srnam::degrader
