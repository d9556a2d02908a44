#include "srnam/hrgen.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "srnam/checkpoint.hpp"
#include "srnam/errors.hpp"
#include "srnam/losses.hpp"
#include "srnam/png_io.hpp"
#include "srnam/rng.hpp"

namespace srnam::hrgen {

namespace F = torch::nn::functional;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

torch::nn::LeakyReLU lrelu_layer() {
  return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(0.2));
}

torch::nn::Conv2d conv(int64_t in, int64_t out, int64_t k) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k).padding(k / 2));
}

torch::Dtype module_dtype(const torch::nn::Module& m) {
  const auto params = m.parameters();
  return params.empty() ? torch::kFloat : params.front().scalar_type();
}

template <typename M>
void init_fresh(M& module, uint64_t seed, torch::Dtype dtype) {
  init_parameters(*module, seed);
  module->to(dtype);
}

}  // namespace

LatentCode::LatentCode(torch::Tensor values) : values_(values.detach().to(torch::kDouble).contiguous()) {
  if (values_.dim() != 1 || values_.size(0) != kLatentDim) {
    throw ShapeError("latent code must have exactly 512 entries, got shape " + c10::str(values_.sizes()));
  }
  if (!torch::isfinite(values_).all().item<bool>()) {
    throw ValueError("latent code must be finite");
  }
}

LatentCode LatentCode::sample(uint64_t seed) {
  auto gen = make_generator(seed);
  return LatentCode(torch::randn({kLatentDim}, gen, torch::kDouble));
}

void GrowthSchedule::validate() const {
  if (resolutions.empty()) throw ValueError("growth schedule has no stages");
  if (epochs.size() != resolutions.size() || batch_sizes.size() != resolutions.size()) {
    throw ValueError("growth schedule lists (resolutions, epochs, batch sizes) differ in length");
  }
  if (resolutions.front() != 4) throw ValueError("growth schedule must start at 4x4");
  for (size_t i = 1; i < resolutions.size(); ++i) {
    if (resolutions[i] != 2 * resolutions[i - 1]) {
      throw ValueError("growth schedule resolutions must double at every stage");
    }
  }
  if (resolutions.back() > stage_resolution(kMaxStage)) {
    throw ValueError("growth schedule exceeds 64x64");
  }
  for (size_t i = 0; i < resolutions.size(); ++i) {
    if (epochs[i] < 1 || batch_sizes[i] < 1) {
      throw ValueError("growth schedule epochs and batch sizes must be positive");
    }
  }
  if (!(fade_fraction >= 0.0 && fade_fraction <= 1.0)) {
    throw ValueError("fade_fraction must lie in [0, 1]");
  }
}

void ProgressiveArch::validate() const {
  if (latent_dim < 1) throw ValueError("latent_dim must be positive");
  if (widths.empty() || static_cast<int64_t>(widths.size()) > kMaxStage + 1) {
    throw ValueError("progressive widths must list 1 to 5 stages");
  }
  for (auto w : widths) {
    if (w < 1) throw ValueError("progressive widths must be positive");
  }
}

torch::Tensor fade_blend(const torch::Tensor& low, const torch::Tensor& high, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValueError("fade alpha must lie in [0, 1]");
  }
  if (low.sizes() != high.sizes()) {
    throw ShapeError("fade_blend shape mismatch: " + c10::str(low.sizes()) + " vs " + c10::str(high.sizes()));
  }
  return (1.0 - alpha) * low + alpha * high;
}

ImageTensor fade_blend(const ImageTensor& low, const ImageTensor& high, double alpha) {
  return ImageTensor::clamped(fade_blend(low.tensor(), high.tensor(), alpha));
}

torch::Tensor upsample2x(const torch::Tensor& x) {
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .scale_factor(std::vector<double>{2.0, 2.0})
                               .mode(torch::kNearest));
}

// ---------------------------------------------------------------------------
// Generator

ProgressiveGeneratorImpl::ProgressiveGeneratorImpl(const ProgressiveArch& a, int64_t stage)
    : arch(a), stage_(0) {
  arch.validate();
  if (stage < 0 || stage >= static_cast<int64_t>(arch.widths.size())) {
    throw ValueError("initial stage outside the configured widths");
  }
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  to_rgb_ = register_module("to_rgb", torch::nn::ModuleList());
  const int64_t w0 = arch.widths[0];
  torch::nn::Sequential first(torch::nn::Linear(arch.latent_dim, w0 * 16),
                              torch::nn::Unflatten(torch::nn::UnflattenOptions(1, {w0, 4, 4})),
                              lrelu_layer(), conv(w0, w0, 3), lrelu_layer());
  torch::nn::Conv2d rgb = conv(w0, kImageChannels, 1);
  init_fresh(first, mix_seed(arch.seed, 0), torch::kFloat);
  init_fresh(rgb, mix_seed(arch.seed, 100), torch::kFloat);
  blocks_->push_back(first);
  to_rgb_->push_back(rgb);
  while (stage_ < stage) grow();
}

void ProgressiveGeneratorImpl::grow() {
  if (stage_ >= kMaxStage) {
    throw ValueError("generator is already at the maximum stage");
  }
  const int64_t next = stage_ + 1;
  if (next >= static_cast<int64_t>(arch.widths.size())) {
    throw ValueError("no width configured for stage " + std::to_string(next));
  }
  const auto dtype = module_dtype(*this);
  const int64_t in = arch.widths[static_cast<size_t>(stage_)];
  const int64_t out = arch.widths[static_cast<size_t>(next)];
  torch::nn::Sequential block(conv(in, out, 3), lrelu_layer(), conv(out, out, 3), lrelu_layer());
  torch::nn::Conv2d rgb = conv(out, kImageChannels, 1);
  init_fresh(block, mix_seed(arch.seed, static_cast<uint64_t>(next)), dtype);
  init_fresh(rgb, mix_seed(arch.seed, 100 + static_cast<uint64_t>(next)), dtype);
  blocks_->push_back(block);
  to_rgb_->push_back(rgb);
  stage_ = next;
}

torch::Tensor ProgressiveGeneratorImpl::features(const torch::Tensor& z, int64_t stage) {
  auto x = z;
  if (arch.normalize_latent) {
    x = z * std::sqrt(static_cast<double>(arch.latent_dim)) /
        (z.pow(2).sum(1, /*keepdim=*/true) + 1e-12).sqrt();
  }
  auto h = blocks_[0]->as<torch::nn::SequentialImpl>()->forward(x);
  for (int64_t s = 1; s <= stage; ++s) {
    h = blocks_[static_cast<size_t>(s)]->as<torch::nn::SequentialImpl>()->forward(upsample2x(h));
  }
  return h;
}

torch::Tensor ProgressiveGeneratorImpl::to_rgb(const torch::Tensor& h, int64_t stage) {
  return torch::tanh(to_rgb_[static_cast<size_t>(stage)]->as<torch::nn::Conv2dImpl>()->forward(h));
}

GeneratorBranches ProgressiveGeneratorImpl::branches(const torch::Tensor& z, int64_t stage) {
  if (stage < 0 || stage > stage_) {
    throw ValueError("stage " + std::to_string(stage) + " not available (current stage " +
                     std::to_string(stage_) + ")");
  }
  if (z.dim() != 2 || z.size(1) != arch.latent_dim) {
    throw ShapeError("latent batch must be (B, " + std::to_string(arch.latent_dim) + ")");
  }
  GeneratorBranches out;
  if (stage == 0) {
    out.high = to_rgb(features(z, 0), 0);
    return out;
  }
  const auto prev = features(z, stage - 1);
  out.low = upsample2x(to_rgb(prev, stage - 1));
  const auto cur = blocks_[static_cast<size_t>(stage)]->as<torch::nn::SequentialImpl>()->forward(upsample2x(prev));
  out.high = to_rgb(cur, stage);
  return out;
}

torch::Tensor ProgressiveGeneratorImpl::forward(const torch::Tensor& z, int64_t stage, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValueError("fade alpha must lie in [0, 1]");
  }
  if (stage == 0 || alpha == 1.0) {
    if (stage < 0 || stage > stage_) {
      throw ValueError("stage " + std::to_string(stage) + " not available (current stage " +
                       std::to_string(stage_) + ")");
    }
    if (z.dim() != 2 || z.size(1) != arch.latent_dim) {
      throw ShapeError("latent batch must be (B, " + std::to_string(arch.latent_dim) + ")");
    }
    return to_rgb(features(z, stage), stage);
  }
  auto b = branches(z, stage);
  return fade_blend(b.low, b.high, alpha);
}

// ---------------------------------------------------------------------------
// Discriminator

ProgressiveDiscriminatorImpl::ProgressiveDiscriminatorImpl(const ProgressiveArch& a, int64_t stage)
    : arch(a), stage_(0) {
  arch.validate();
  if (stage < 0 || stage >= static_cast<int64_t>(arch.widths.size())) {
    throw ValueError("initial stage outside the configured widths");
  }
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  from_rgb_ = register_module("from_rgb", torch::nn::ModuleList());
  const int64_t w0 = arch.widths[0];
  torch::nn::Sequential last(conv(w0, w0, 3), lrelu_layer(), torch::nn::Flatten());
  torch::nn::Conv2d rgb = conv(kImageChannels, w0, 1);
  fc_ = torch::nn::Linear(w0 * 16, 1);
  init_fresh(last, mix_seed(arch.seed, 200), torch::kFloat);
  init_fresh(rgb, mix_seed(arch.seed, 300), torch::kFloat);
  init_fresh(fc_, mix_seed(arch.seed, 400), torch::kFloat);
  blocks_->push_back(last);
  from_rgb_->push_back(rgb);
  register_module("fc", fc_);
  while (stage_ < stage) grow();
}

void ProgressiveDiscriminatorImpl::grow() {
  if (stage_ >= kMaxStage) {
    throw ValueError("discriminator is already at the maximum stage");
  }
  const int64_t next = stage_ + 1;
  if (next >= static_cast<int64_t>(arch.widths.size())) {
    throw ValueError("no width configured for stage " + std::to_string(next));
  }
  const auto dtype = module_dtype(*this);
  const int64_t w = arch.widths[static_cast<size_t>(next)];
  const int64_t below = arch.widths[static_cast<size_t>(stage_)];
  torch::nn::Sequential block(conv(w, w, 3), lrelu_layer(), conv(w, below, 3), lrelu_layer(),
                              torch::nn::AvgPool2d(torch::nn::AvgPool2dOptions(2)));
  torch::nn::Conv2d rgb = conv(kImageChannels, w, 1);
  init_fresh(block, mix_seed(arch.seed, 200 + static_cast<uint64_t>(next)), dtype);
  init_fresh(rgb, mix_seed(arch.seed, 300 + static_cast<uint64_t>(next)), dtype);
  blocks_->push_back(block);
  from_rgb_->push_back(rgb);
  stage_ = next;
}

torch::nn::Conv2d ProgressiveDiscriminatorImpl::from_rgb(int64_t stage) const {
  return torch::nn::Conv2d(from_rgb_->ptr<torch::nn::Conv2dImpl>(static_cast<size_t>(stage)));
}

torch::nn::Sequential ProgressiveDiscriminatorImpl::block(int64_t stage) const {
  return torch::nn::Sequential(blocks_->ptr<torch::nn::SequentialImpl>(static_cast<size_t>(stage)));
}

torch::Tensor ProgressiveDiscriminatorImpl::forward(const torch::Tensor& x, int64_t stage, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw ValueError("fade alpha must lie in [0, 1]");
  }
  if (stage < 0 || stage > stage_) {
    throw ValueError("stage " + std::to_string(stage) + " not available (current stage " +
                     std::to_string(stage_) + ")");
  }
  const int64_t res = stage_resolution(stage);
  if (x.dim() != 4 || x.size(1) != kImageChannels || x.size(2) != res || x.size(3) != res) {
    throw ShapeError("stage " + std::to_string(stage) + " expects (B, 3, " + std::to_string(res) + ", " +
                     std::to_string(res) + "), got " + c10::str(x.sizes()));
  }
  auto lrelu = [](const torch::Tensor& t) {
    return F::leaky_relu(t, F::LeakyReLUFuncOptions().negative_slope(0.2));
  };
  auto run_block = [this](int64_t s, const torch::Tensor& t) {
    return blocks_[static_cast<size_t>(s)]->as<torch::nn::SequentialImpl>()->forward(t);
  };
  auto rgb = [this](int64_t s, const torch::Tensor& t) {
    return from_rgb_[static_cast<size_t>(s)]->as<torch::nn::Conv2dImpl>()->forward(t);
  };
  auto h = run_block(stage, lrelu(rgb(stage, x)));
  if (stage > 0 && alpha < 1.0) {
    const auto low = lrelu(rgb(stage - 1, F::avg_pool2d(x, F::AvgPool2dFuncOptions(2))));
    h = fade_blend(low, h, alpha);
  }
  for (int64_t s = stage - 1; s >= 0; --s) h = run_block(s, h);
  return fc_(h).squeeze(1);
}

ImageTensor gen_forward(ProgressiveGenerator& g, const LatentCode& z, int64_t stage, double alpha) {
  torch::NoGradGuard no_grad;
  auto out = g->forward(z.values().to(module_dtype(*g)).unsqueeze(0), stage, alpha);
  return ImageTensor::clamped(out.squeeze(0));
}

double disc_forward_prog(ProgressiveDiscriminator& d, const ImageTensor& x, int64_t stage, double alpha) {
  torch::NoGradGuard no_grad;
  return d->forward(x.batched(module_dtype(*d)), stage, alpha).item<double>();
}

namespace {

void copy_parameters(const torch::nn::Module& from, torch::nn::Module& to) {
  torch::NoGradGuard no_grad;
  auto dst = to.named_parameters();
  for (const auto& item : from.named_parameters()) {
    dst[item.key()].copy_(item.value());
  }
}

}  // namespace

ProgressiveGenerator grow(const ProgressiveGenerator& g) {
  ProgressiveGenerator copy(g->arch, 0);
  copy->to(module_dtype(*g));
  while (copy->stage() < g->stage()) copy->grow();
  copy_parameters(*g, *copy);
  copy->grow();
  return copy;
}

// ---------------------------------------------------------------------------
// Training

void ProgressiveTrainConfig::validate() const {
  schedule.validate();
  arch.validate();
  adam.validate();
  if (static_cast<int64_t>(arch.widths.size()) < schedule.stages()) {
    throw ValueError("hrgen.widths must list a width for every scheduled stage");
  }
  if (!(gp_lambda >= 0.0)) throw ValueError("hrgen.gp_lambda must be >= 0");
  if (d_steps_per_g_step < 1) throw ValueError("hrgen.d_steps must be >= 1");
}

torch::Tensor sample_latents(int64_t latent_dim, uint64_t sample_seed) {
  auto gen = make_generator(sample_seed);
  return torch::randn({64, latent_dim}, gen, torch::kDouble);
}

namespace {

struct Container : torch::nn::Module {
  Container(ProgressiveGenerator g, ProgressiveDiscriminator d) {
    register_module("generator", std::move(g));
    register_module("discriminator", std::move(d));
  }
};

std::string stage_dir_name(int64_t resolution) { return "stage_" + std::to_string(resolution); }

void set_trainable(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

void save_stage(const ProgressiveTrainConfig& config, ProgressiveGenerator& g, ProgressiveDiscriminator& d,
                int64_t stage, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& a = config.arch;
  json manifest = {
      {"kind", "hrgen_stage"},
      {"format_version", checkpoint::kFormatVersion},
      {"dtype", checkpoint::dtype_name(config.dtype)},
      {"stage", stage},
      {"resolution", stage_resolution(stage)},
      {"arch", {{"latent_dim", a.latent_dim}, {"widths", a.widths}, {"normalize_latent", a.normalize_latent}, {"seed", a.seed}}},
      {"sample_seed", config.sample_seed},
      {"data_seed", config.data_seed},
      {"weights", checkpoint::kWeightsFile},
      {"samples", "samples.pt"},
      {"sample_grid", "samples.png"},
  };
  std::ofstream(dir / checkpoint::kManifestFile) << manifest.dump(2) << '\n';
  Container container(g, d);
  checkpoint::save_module(container, dir / checkpoint::kWeightsFile);

  torch::NoGradGuard no_grad;
  g->eval();
  const auto samples = g->forward(sample_latents(a.latent_dim, config.sample_seed).to(config.dtype), stage, 1.0)
                           .to(torch::kDouble)
                           .contiguous();
  g->train();
  torch::save(samples, (dir / "samples.pt").string());
  std::vector<ByteImage> tiles;
  tiles.reserve(static_cast<size_t>(samples.size(0)));
  for (int64_t i = 0; i < samples.size(0); ++i) tiles.push_back(denormalize_tensor(samples[i]));
  write_png(dir / "samples.png", tile_grid(tiles, 8));
}

}  // namespace

std::vector<StageLossRecord> train_progressive(const ProgressiveTrainConfig& config, const imagedata::Dataset& hr,
                                               const fs::path& out_dir) {
  config.validate();
  if (hr.role() != imagedata::Role::HR) throw DatasetError("progressive training needs an HR dataset");
  if (hr.empty()) throw DatasetError("progressive training needs a non-empty dataset");

  const auto dtype = config.dtype;
  ProgressiveGenerator g(config.arch, 0);
  ProgressiveDiscriminator d(config.arch, 0);
  g->to(dtype);
  d->to(dtype);
  g->train();
  d->train();
  auto gen = make_generator(mix_seed(config.data_seed, 7));
  const auto latent = [&](int64_t n) {
    return torch::randn({n, config.arch.latent_dim}, gen, torch::kDouble).to(dtype);
  };

  std::vector<StageLossRecord> history;
  fs::create_directories(out_dir);
  for (int64_t s = 0; s < config.schedule.stages(); ++s) {
    if (s > 0) {
      g->grow();
      d->grow();
    }
    const auto idx = static_cast<size_t>(s);
    const int64_t res = config.schedule.resolutions[idx];
    imagedata::BatchStream stream(hr, static_cast<size_t>(config.schedule.batch_sizes[idx]),
                                  mix_seed(config.data_seed, 100 + idx));
    const int64_t iters = config.schedule.epochs[idx] * static_cast<int64_t>(stream.batches_per_epoch());
    const int64_t fade_iters =
        s == 0 ? 0 : static_cast<int64_t>(std::llround(config.schedule.fade_fraction * static_cast<double>(iters)));
    torch::optim::Adam opt_g(g->parameters(), config.adam.options());
    torch::optim::Adam opt_d(d->parameters(), config.adam.options());

    for (int64_t it = 0; it < iters; ++it) {
      const double alpha =
          fade_iters == 0 ? 1.0 : std::min(1.0, static_cast<double>(it) / static_cast<double>(fade_iters));
      const losses::Critic critic = [&](const torch::Tensor& x) { return d->forward(x, s, alpha); };
      StageLossRecord rec{s, res, it, alpha, 0, 0, 0};

      set_trainable(*d, true);
      for (int64_t k = 0; k < config.d_steps_per_g_step; ++k) {
        auto real = stream.next_wrapping().images.to(dtype);
        real = F::avg_pool2d(real, F::AvgPool2dFuncOptions(kHrSide / res));
        if (s > 0 && alpha < 1.0) {
          // Real images fade in the same way as generated ones.
          real = fade_blend(upsample2x(F::avg_pool2d(real, F::AvgPool2dFuncOptions(2))), real, alpha);
        }
        torch::Tensor fake;
        {
          torch::NoGradGuard no_grad;
          fake = g->forward(latent(real.size(0)), s, alpha);
        }
        const auto hinge = losses::gan_loss_d(critic(real), critic(fake));
        const auto gp = losses::gradient_penalty(critic, real, fake, config.gp_lambda, gen);
        opt_d.zero_grad();
        (hinge + gp).backward();
        opt_d.step();
        rec.d_loss = hinge.item<double>();
        rec.gp = gp.item<double>();
      }

      set_trainable(*d, false);
      const auto fake = g->forward(latent(config.schedule.batch_sizes[idx]), s, alpha);
      const auto g_loss = losses::gan_loss_g(critic(fake));
      opt_g.zero_grad();
      g_loss.backward();
      opt_g.step();
      set_trainable(*d, true);
      rec.g_loss = g_loss.item<double>();

      if (!std::isfinite(rec.d_loss) || !std::isfinite(rec.gp) || !std::isfinite(rec.g_loss)) {
        throw DivergenceError("progressive training diverged at stage " + std::to_string(s) + " (" +
                              std::to_string(res) + "px), iteration " + std::to_string(it));
      }
      history.push_back(rec);
      if (config.on_iteration) config.on_iteration(rec);
    }
    save_stage(config, g, d, s, out_dir / stage_dir_name(res));
  }

  std::ofstream csv(out_dir / checkpoint::kLossHistoryFile);
  csv << "stage,resolution,iteration,alpha,d_loss,gp,g_loss\n";
  for (const auto& r : history) {
    csv << r.stage << ',' << r.resolution << ',' << r.iteration << ',' << checkpoint::format_real(r.alpha) << ','
        << checkpoint::format_real(r.d_loss) << ',' << checkpoint::format_real(r.gp) << ','
        << checkpoint::format_real(r.g_loss) << '\n';
  }
  return history;
}

StageCheckpoint load_stage(const fs::path& stage_dir) {
  const fs::path manifest_path = stage_dir / checkpoint::kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw CheckpointError("missing generator checkpoint manifest " + manifest_path.string());
  try {
    const json m = json::parse(in);
    if (m.at("kind").get<std::string>() != "hrgen_stage") {
      throw CheckpointError(manifest_path.string() + " is not a generator stage checkpoint");
    }
    if (m.at("format_version").get<int>() != checkpoint::kFormatVersion) {
      throw CheckpointError(manifest_path.string() + " has an unsupported format version");
    }
    StageCheckpoint ckpt;
    const auto& a = m.at("arch");
    ckpt.arch.latent_dim = a.at("latent_dim").get<int64_t>();
    ckpt.arch.widths = a.at("widths").get<std::vector<int64_t>>();
    ckpt.arch.normalize_latent = a.at("normalize_latent").get<bool>();
    ckpt.arch.seed = a.at("seed").get<uint64_t>();
    ckpt.stage = m.at("stage").get<int64_t>();
    ckpt.sample_seed = m.at("sample_seed").get<uint64_t>();
    if (m.at("resolution").get<int64_t>() != stage_resolution(ckpt.stage)) {
      throw CheckpointError(manifest_path.string() + ": resolution does not match stage");
    }
    const auto dtype = checkpoint::dtype_from_name(m.at("dtype").get<std::string>());
    ckpt.generator = ProgressiveGenerator(ckpt.arch, ckpt.stage);
    ckpt.discriminator = ProgressiveDiscriminator(ckpt.arch, ckpt.stage);
    ckpt.generator->to(dtype);
    ckpt.discriminator->to(dtype);
    Container container(ckpt.generator, ckpt.discriminator);
    checkpoint::load_module(container, stage_dir / m.at("weights").get<std::string>());
    checkpoint::freeze(*ckpt.generator);
    checkpoint::freeze(*ckpt.discriminator);
    return ckpt;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed generator manifest " + manifest_path.string() + ": " + e.what());
  } catch (const ValueError& e) {
    throw CheckpointError("generator manifest " + manifest_path.string() + " describes an invalid architecture: " +
                          e.what());
  }
}

fs::path latest_stage_dir(const fs::path& generator_dir) {
  if (!fs::is_directory(generator_dir)) {
    throw CheckpointError("generator checkpoint directory " + generator_dir.string() + " does not exist");
  }
  int64_t best = -1;
  fs::path best_dir;
  for (const auto& entry : fs::directory_iterator(generator_dir)) {
    const auto name = entry.path().filename().string();
    if (!entry.is_directory() || !name.starts_with("stage_")) continue;
    try {
      const int64_t r = std::stoll(name.substr(6));
      if (r > best && fs::exists(entry.path() / checkpoint::kManifestFile)) {
        best = r;
        best_dir = entry.path();
      }
    } catch (const std::exception&) {
      continue;
    }
  }
  if (best < 0) {
    throw CheckpointError("no stage_<r> checkpoint under " + generator_dir.string());
  }
  return best_dir;
}

torch::Tensor regenerate_samples(StageCheckpoint& ckpt) {
  torch::NoGradGuard no_grad;
  const auto dtype = module_dtype(*ckpt.generator);
  return ckpt.generator->forward(sample_latents(ckpt.arch.latent_dim, ckpt.sample_seed).to(dtype), ckpt.stage, 1.0)
      .to(torch::kDouble);
}

}  // namespace srnam::hrgen
