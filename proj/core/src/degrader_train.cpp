#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "srnam/checkpoint.hpp"
#include "srnam/degrader.hpp"
#include "srnam/errors.hpp"
#include "srnam/rng.hpp"

namespace srnam::degrader {

namespace fs = std::filesystem;
using json = nlohmann::json;

GeneratorLoss generator_loss(const torch::Tensor& hr, const torch::Tensor& lr_fake,
                             const torch::Tensor& fake_scores, const losses::LossWeights& weights,
                             const percept::FeatureExtractor* fx, int64_t upscale_factor) {
  const auto pixel = losses::pixel_loss(hr, lr_fake, weights, fx, upscale_factor);
  GeneratorLoss out;
  out.l1 = pixel.l1;
  out.perceptual = pixel.perceptual;
  out.pixel = pixel.pixel;
  out.gan = losses::gan_loss_g(fake_scores);
  out.total = losses::total_loss(out.pixel, out.gan, weights);
  return out;
}

DiscriminatorLoss discriminator_loss(const losses::Critic& critic, const torch::Tensor& real,
                                     const torch::Tensor& fake, double gp_lambda,
                                     torch::Generator& gen) {
  DiscriminatorLoss out;
  const auto fake_d = fake.detach();
  out.hinge = losses::gan_loss_d(critic(real), critic(fake_d));
  // The penalty interpolates pairwise, so trim to the common batch size.
  const int64_t n = std::min(real.size(0), fake_d.size(0));
  out.gp = losses::gradient_penalty(critic, real.narrow(0, 0, n), fake_d.narrow(0, 0, n), gp_lambda, gen);
  out.total = out.hinge + out.gp;
  return out;
}

void DegraderTrainConfig::validate() const {
  if (iterations < 1) throw ValueError("degrader.iterations must be >= 1");
  if (d_steps_per_g_step < 1) throw ValueError("degrader.d_steps must be >= 1");
  if (!(gp_lambda >= 0.0)) throw ValueError("degrader.gp_lambda must be >= 0");
  if (batch_size < 1) throw ValueError("degrader.batch_size must be >= 1");
  if (upscale_factor != generator.hr_side / discriminator.lr_side) {
    throw ValueError("degrader.upscale_factor must equal HR side / LR side");
  }
  if (generator.hr_side / 4 != discriminator.lr_side) {
    throw ValueError("generator output side must match the discriminator input side");
  }
  weights.validate();
  adam.validate();
}

namespace {

void set_trainable(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.set_requires_grad(on);
}

bool finite(const LossRecord& r) {
  for (double v : {r.d_loss, r.gp, r.g_gan, r.g_l1, r.g_vgg, r.total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

DegraderCheckpoint train_degrader(const DegraderTrainConfig& config, const imagedata::Dataset& hr,
                                  const imagedata::Dataset& lr) {
  config.validate();
  if (hr.role() != imagedata::Role::HR) throw DatasetError("degrader training needs an HR dataset");
  if (lr.role() != imagedata::Role::LR) throw DatasetError("degrader training needs an LR dataset");
  if (hr.empty() || lr.empty()) throw DatasetError("degrader training needs non-empty datasets");

  const auto dtype = config.dtype;
  DegraderCheckpoint ckpt{config, make_model(config.generator, config.discriminator, config.seed, dtype), {}};
  auto& g = ckpt.model.generator;
  auto& d = ckpt.model.discriminator;
  g->train();
  d->train();

  std::shared_ptr<const percept::FeatureExtractor> fx;
  if (config.weights.delta != 0.0) {
    auto pc = config.percept;
    pc.dtype = dtype;
    fx = percept::make_feature_extractor(pc);
  }

  torch::optim::Adam opt_g(g->parameters(), config.adam.options());
  torch::optim::Adam opt_d(d->parameters(), config.adam.options());
  const auto batch = static_cast<size_t>(config.batch_size);
  imagedata::BatchStream hr_stream(hr, batch, mix_seed(config.data_seed, 1));
  imagedata::BatchStream lr_stream(lr, batch, mix_seed(config.data_seed, 2));
  auto gen = make_generator(mix_seed(config.data_seed, 3));
  auto noise = [&](int64_t n) {
    return torch::randn({n, config.generator.noise_dim}, gen, torch::kDouble).to(dtype);
  };
  const losses::Critic critic = [&d](const torch::Tensor& x) { return d->forward(x); };

  ckpt.history.reserve(static_cast<size_t>(config.iterations));
  for (int64_t it = 0; it < config.iterations; ++it) {
    LossRecord rec;
    rec.iteration = it;

    set_trainable(*d, true);
    for (int64_t step = 0; step < config.d_steps_per_g_step; ++step) {
      const auto real = lr_stream.next_wrapping().images.to(dtype);
      const auto hr_batch = hr_stream.next_wrapping().images.to(dtype);
      torch::Tensor fake;
      {
        torch::NoGradGuard no_grad;
        fake = g->forward(hr_batch, noise(hr_batch.size(0)));
      }
      auto loss = discriminator_loss(critic, real, fake, config.gp_lambda, gen);
      opt_d.zero_grad();
      loss.total.backward();
      opt_d.step();
      rec.d_loss = loss.hinge.item<double>();
      rec.gp = loss.gp.item<double>();
    }

    set_trainable(*d, false);
    const auto hr_batch = hr_stream.next_wrapping().images.to(dtype);
    const auto fake = g->forward(hr_batch, noise(hr_batch.size(0)));
    auto loss = generator_loss(hr_batch, fake, d->forward(fake), config.weights, fx.get(),
                               config.upscale_factor);
    opt_g.zero_grad();
    loss.total.backward();
    opt_g.step();
    rec.g_gan = loss.gan.item<double>();
    rec.g_l1 = loss.l1.item<double>();
    rec.g_vgg = loss.perceptual.item<double>();
    rec.total = loss.total.item<double>();

    if (!finite(rec)) {
      throw DivergenceError("degrader training diverged at iteration " + std::to_string(it) +
                            ": d_loss=" + checkpoint::format_real(rec.d_loss) +
                            " gp=" + checkpoint::format_real(rec.gp) +
                            " total=" + checkpoint::format_real(rec.total));
    }
    ckpt.history.push_back(rec);
    if (config.on_iteration) config.on_iteration(rec);
  }
  set_trainable(*d, true);
  checkpoint::freeze(*g);
  checkpoint::freeze(*d);
  return ckpt;
}

namespace {

struct Container : torch::nn::Module {
  Container(DegraderGenerator g, DegraderDiscriminator d) {
    register_module("generator", std::move(g));
    register_module("discriminator", std::move(d));
  }
};

}  // namespace

void write_loss_history(const std::vector<LossRecord>& history, const fs::path& path) {
  std::ofstream out(path);
  out << "iteration,d_loss,gp,g_gan,g_l1,g_vgg,total\n";
  using checkpoint::format_real;
  for (const auto& r : history) {
    out << r.iteration << ',' << format_real(r.d_loss) << ',' << format_real(r.gp) << ','
        << format_real(r.g_gan) << ',' << format_real(r.g_l1) << ',' << format_real(r.g_vgg) << ','
        << format_real(r.total) << '\n';
  }
  if (!out) throw CheckpointError("cannot write " + path.string());
}

void save_checkpoint(const DegraderCheckpoint& ckpt, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& c = ckpt.config;
  json manifest = {
      {"kind", "degrader"},
      {"format_version", checkpoint::kFormatVersion},
      {"dtype", checkpoint::dtype_name(c.dtype)},
      {"generator", {{"width", c.generator.width}, {"noise_dim", c.generator.noise_dim}, {"hr_side", c.generator.hr_side}}},
      {"discriminator", {{"width", c.discriminator.width}, {"lr_side", c.discriminator.lr_side}}},
      {"seeds", {{"init", c.seed}, {"data", c.data_seed}, {"percept", c.percept.seed}}},
      {"iterations", c.iterations},
      {"training",
       {{"d_steps_per_g_step", c.d_steps_per_g_step},
        {"gp_lambda", c.gp_lambda},
        {"batch_size", c.batch_size},
        {"upscale_factor", c.upscale_factor},
        {"loss_weights", {{"alpha", c.weights.alpha}, {"beta", c.weights.beta}, {"gamma", c.weights.gamma}, {"delta", c.weights.delta}}},
        {"adam", {{"learning_rate", c.adam.learning_rate}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"epsilon", c.adam.epsilon}}},
        {"percept_backend", c.percept.backend}}},
      {"weights", checkpoint::kWeightsFile},
      {"loss_history", checkpoint::kLossHistoryFile},
  };
  std::ofstream(dir / checkpoint::kManifestFile) << manifest.dump(2) << '\n';
  Container container(ckpt.model.generator, ckpt.model.discriminator);
  checkpoint::save_module(container, dir / checkpoint::kWeightsFile);
  write_loss_history(ckpt.history, dir / checkpoint::kLossHistoryFile);
}

DegraderModel load_model(const fs::path& dir) {
  const fs::path manifest_path = dir / checkpoint::kManifestFile;
  std::ifstream in(manifest_path);
  if (!in) throw CheckpointError("missing degrader checkpoint manifest " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
    if (m.at("kind").get<std::string>() != "degrader") {
      throw CheckpointError(manifest_path.string() + " is not a degrader checkpoint");
    }
    if (m.at("format_version").get<int>() != checkpoint::kFormatVersion) {
      throw CheckpointError(manifest_path.string() + " has an unsupported format version");
    }
    GeneratorArch ga{m.at("generator").at("width").get<int64_t>(), m.at("generator").at("noise_dim").get<int64_t>(),
                     m.at("generator").at("hr_side").get<int64_t>()};
    DiscriminatorArch da{m.at("discriminator").at("width").get<int64_t>(),
                         m.at("discriminator").at("lr_side").get<int64_t>()};
    const auto dtype = checkpoint::dtype_from_name(m.at("dtype").get<std::string>());
    auto model = make_model(ga, da, 0, dtype);
    Container container(model.generator, model.discriminator);
    checkpoint::load_module(container, dir / m.at("weights").get<std::string>());
    checkpoint::freeze(*model.generator);
    checkpoint::freeze(*model.discriminator);
    return model;
  } catch (const json::exception& e) {
    throw CheckpointError("malformed degrader manifest " + manifest_path.string() + ": " + e.what());
  } catch (const ValueError& e) {
    throw CheckpointError("degrader manifest " + manifest_path.string() + " describes an invalid architecture: " + e.what());
  }
}

}  // namespace srnam::degrader
