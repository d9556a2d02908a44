#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "srnam/checkpoint.hpp"
#include "srnam/degrader.hpp"
#include "srnam/errors.hpp"
#include "srnam/rng.hpp"
#include "testing.hpp"

using namespace srnam;
using namespace srnam::degrader;
using srnam::testing::random_image;
using srnam::testing::TempDir;
using srnam::testing::uniform;

namespace {

DegraderModel small_model(torch::Dtype dtype = torch::kDouble, uint64_t seed = 1) {
  return make_model(GeneratorArch{8}, DiscriminatorArch{8}, seed, dtype);
}

DegraderTrainConfig smoke_config() {
  DegraderTrainConfig c;
  c.iterations = 50;
  c.batch_size = 4;
  c.generator.width = 8;
  c.discriminator.width = 8;
  c.percept.width = 4;
  c.adam.learning_rate = 2e-4;
  c.adam.beta1 = 0.5;
  c.seed = 3;
  c.data_seed = 4;
  return c;
}

// 64-parameter toy generator on 4x4 images: the 1-d noise is projected to a
// 4x4 channel (16 weights), concatenated to RGB and reduced by a stride-2
// 2x2 conv (48 weights) to a 2x2 LR image.
struct ToyGenerator : torch::nn::Module {
  ToyGenerator() {
    proj = register_module("proj", torch::nn::Linear(torch::nn::LinearOptions(1, 16).bias(false)));
    conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(4, 3, 2).stride(2).bias(false)));
    to(torch::kDouble);
    torch::NoGradGuard no_grad;
    proj->weight.copy_(uniform({16, 1}, 11, -0.5, 0.5));
    conv->weight.copy_(uniform({3, 4, 2, 2}, 12, -0.5, 0.5));
  }
  torch::Tensor forward(const torch::Tensor& hr, const torch::Tensor& z) {
    auto n = proj(z).view({hr.size(0), 1, 4, 4});
    return torch::tanh(conv(torch::cat({hr, n}, 1)));
  }
  torch::nn::Linear proj{nullptr};
  torch::nn::Conv2d conv{nullptr};
};

}  // namespace

class TrainedDegrader : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    hr_ = new imagedata::Dataset(imagedata::synth_dataset(32, 64, 21));
    lr_ = new imagedata::Dataset(imagedata::synth_dataset(32, 16, 22));
    ckpt_ = new DegraderCheckpoint(train_degrader(smoke_config(), *hr_, *lr_));
  }
  static void TearDownTestSuite() {
    delete ckpt_;
    delete hr_;
    delete lr_;
  }
  static imagedata::Dataset* hr_;
  static imagedata::Dataset* lr_;
  static DegraderCheckpoint* ckpt_;
};

imagedata::Dataset* TrainedDegrader::hr_ = nullptr;
imagedata::Dataset* TrainedDegrader::lr_ = nullptr;
DegraderCheckpoint* TrainedDegrader::ckpt_ = nullptr;

TEST(Noise, DimensionIsExactlyHundred) {
  EXPECT_EQ(NoiseVector::sample(1).values().size(0), 100);
  EXPECT_THROW(NoiseVector(torch::zeros({99})), ShapeError);
  EXPECT_THROW(NoiseVector(torch::zeros({1, 100})), ShapeError);
  EXPECT_TRUE(torch::equal(NoiseVector::sample(5).values(), NoiseVector::sample(5).values()));
}

TEST(ProjectNoise, ZeroVectorGivesZeroChannel) {
  auto m = small_model();
  const auto out = project_noise(m.generator, NoiseVector(torch::zeros({100}, torch::kDouble)));
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{1, 64, 64}));
  EXPECT_EQ(out.abs().max().item<double>(), 0.0);
}

TEST(ProjectNoise, LinearWithZeroBias) {
  auto m = small_model();
  const auto a = NoiseVector::sample(1);
  const auto b = NoiseVector::sample(2);
  const auto sum = project_noise(m.generator, NoiseVector(a.values() + b.values()));
  const auto parts = project_noise(m.generator, a) + project_noise(m.generator, b);
  EXPECT_TRUE(torch::allclose(sum, parts, 1e-12, 1e-12));
}

TEST(ProjectNoise, RowMajorReshapeOfTheAffineMap) {
  auto m = small_model();
  const auto z = NoiseVector::sample(3);
  const auto flat = torch::matmul(m.generator->noise_proj->weight, z.values()) + m.generator->noise_proj->bias;
  EXPECT_TRUE(torch::allclose(project_noise(m.generator, z).flatten(), flat, 1e-12, 1e-12));
}

TEST(PixelShuffle, HandExample) {
  const auto x = torch::tensor({1.0, 2.0, 3.0, 4.0}, torch::kDouble).view({4, 1, 1});
  const auto y = degrader::pixel_shuffle(x, 2);
  EXPECT_TRUE(torch::equal(y, torch::tensor({1.0, 2.0, 3.0, 4.0}, torch::kDouble).view({1, 2, 2})));
}

TEST(PixelShuffle, ShapeArithmetic) {
  EXPECT_EQ(degrader::pixel_shuffle(torch::zeros({12, 2, 2}), 2).sizes(), (std::vector<int64_t>{3, 4, 4}));
  EXPECT_EQ(degrader::pixel_shuffle(torch::zeros({5, 18, 3, 7}), 3).sizes(), (std::vector<int64_t>{5, 2, 9, 21}));
  EXPECT_THROW(degrader::pixel_shuffle(torch::zeros({6, 2, 2}), 2), ShapeError);
}

TEST(PixelShuffle, FollowsTheIndexFormula) {
  const int64_t r = 3, c = 2, h = 2, w = 3;
  const auto x = uniform({c * r * r, h, w}, 4);
  const auto y = degrader::pixel_shuffle(x, r);
  for (int64_t ch = 0; ch < c; ++ch)
    for (int64_t i = 0; i < h; ++i)
      for (int64_t j = 0; j < w; ++j)
        for (int64_t dy = 0; dy < r; ++dy)
          for (int64_t dx = 0; dx < r; ++dx)
            ASSERT_EQ(y[ch][r * i + dy][r * j + dx].item<double>(), x[ch * r * r + dy * r + dx][i][j].item<double>());
}

TEST(PixelShuffle, PreservesMultisetAndInvertsExactly) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t r = 1 + static_cast<int64_t>(rng() % 3);
    const int64_t c = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t h = 1 + static_cast<int64_t>(rng() % 5);
    const int64_t w = 1 + static_cast<int64_t>(rng() % 5);
    const int64_t b = 1 + static_cast<int64_t>(rng() % 3);
    const auto x = uniform({b, c * r * r, h, w}, 1000 + static_cast<uint64_t>(trial), -10, 10);
    const auto y = degrader::pixel_shuffle(x, r);
    EXPECT_TRUE(torch::equal(std::get<0>(y.flatten().sort()), std::get<0>(x.flatten().sort())));
    EXPECT_TRUE(torch::equal(degrader::pixel_unshuffle(y, r), x));
  }
}

TEST(Generator, ArchitectureMatchesTheDescription) {
  auto m = small_model();
  EXPECT_EQ(m.generator->stem->options.in_channels(), 4);
  int64_t blocks = 0;
  for (const auto& child : m.generator->modules(false)) {
    if (dynamic_cast<ResidualBlockImpl*>(child.get())) ++blocks;
  }
  EXPECT_EQ(blocks, 12);
  EXPECT_EQ(m.generator->groups->size(), 6u);
}

TEST(Generator, OutputShapeAndRange) {
  auto m = small_model(torch::kFloat);
  auto hr = uniform({3, 3, 64, 64}, 1).to(torch::kFloat);
  auto z = torch::randn({3, 100}).to(torch::kFloat);
  const auto out = m.generator->forward(hr, z);
  EXPECT_EQ(out.sizes(), (std::vector<int64_t>{3, 3, 16, 16}));
  EXPECT_LE(out.abs().max().item<double>(), 1.0);
  EXPECT_THROW(m.generator->forward(uniform({1, 3, 32, 32}, 1).to(torch::kFloat), z.narrow(0, 0, 1)), ShapeError);
}

TEST(Discriminator, NoNormalizationAndSixBlocks) {
  auto m = small_model();
  int64_t blocks = 0;
  for (const auto& child : m.discriminator->modules(false)) {
    if (dynamic_cast<ResidualBlockImpl*>(child.get())) ++blocks;
    EXPECT_EQ(dynamic_cast<torch::nn::BatchNorm2dImpl*>(child.get()), nullptr);
    EXPECT_EQ(dynamic_cast<torch::nn::InstanceNorm2dImpl*>(child.get()), nullptr);
    EXPECT_EQ(dynamic_cast<torch::nn::LayerNormImpl*>(child.get()), nullptr);
    EXPECT_EQ(dynamic_cast<torch::nn::GroupNormImpl*>(child.get()), nullptr);
  }
  EXPECT_EQ(blocks, 6);
}

TEST(Discriminator, ScoresAreFiniteAndDeterministic) {
  auto m = small_model();
  for (uint64_t s = 0; s < 3; ++s) {
    const auto x = random_image(16, s);
    const double a = disc_score(m.discriminator, x);
    EXPECT_TRUE(std::isfinite(a));
    EXPECT_EQ(a, disc_score(m.discriminator, x));
  }
  EXPECT_THROW(disc_score(m.discriminator, random_image(64, 1)), ShapeError);
}

TEST(Discriminator, BatchedEqualsPerImage) {
  auto m = small_model();
  std::vector<ImageTensor> images;
  std::vector<torch::Tensor> stack;
  for (uint64_t s = 0; s < 4; ++s) {
    images.push_back(random_image(16, 40 + s));
    stack.push_back(images.back().tensor());
  }
  torch::NoGradGuard no_grad;
  const auto batched = m.discriminator->forward(torch::stack(stack));
  for (size_t i = 0; i < images.size(); ++i) {
    EXPECT_NEAR(batched[static_cast<int64_t>(i)].item<double>(), disc_score(m.discriminator, images[i]), 1e-12);
  }
}

TEST(Degrade, DeterministicShapeAndRange) {
  auto m = small_model(torch::kFloat);
  const auto hr = random_image(64, 5);
  const auto z = NoiseVector::sample(6);
  const auto a = degrade(m.generator, hr, z);
  EXPECT_EQ(a.side(), 16);
  EXPECT_TRUE(a == degrade(m.generator, hr, z));
  EXPECT_THROW(degrade(m.generator, random_image(32, 1), z), ShapeError);
}

TEST(GeneratorObjective, GradientMatchesFiniteDifferences) {
  ToyGenerator g;
  int64_t count = 0;
  for (const auto& p : g.parameters()) count += p.numel();
  ASSERT_EQ(count, 64);

  percept::RandomFeatureOptions po;
  po.seed = 2;
  po.base_width = 2;
  po.dtype = torch::kDouble;
  percept::RandomFeatureExtractor fx(po);
  const auto critic_w = uniform({3, 2, 2}, 13);
  const losses::LossWeights weights{1.0, 0.3, 1.0, 0.5};
  const auto hr = uniform({2, 3, 4, 4}, 14);
  const auto z = uniform({2, 1}, 15);

  auto loss = [&] {
    const auto lr = g.forward(hr, z);
    const auto scores = (lr * critic_w).flatten(1).sum(1);
    return generator_loss(hr, lr, scores, weights, &fx, 2).total;
  };

  g.zero_grad();
  loss().backward();
  for (auto& p : g.parameters()) {
    const auto analytic = p.grad().clone();
    const auto numeric = srnam::testing::numeric_gradient(
        [&](const torch::Tensor& v) {
          torch::NoGradGuard no_grad;
          const auto keep = p.detach().clone();
          p.detach().copy_(v);
          const double out = loss().item<double>();
          p.detach().copy_(keep);
          return out;
        },
        p.detach());
    EXPECT_EQ(srnam::testing::gradient_mismatches(analytic, numeric), 0) << analytic << numeric;
  }
}

TEST(DiscriminatorObjective, GradientMatchesFiniteDifferences) {
  auto d = DegraderDiscriminator(DiscriminatorArch{2, 4});
  init_parameters(*d, 7);
  d->to(torch::kDouble);
  const auto real = uniform({3, 3, 4, 4}, 16);
  const auto fake = uniform({3, 3, 4, 4}, 17);
  const losses::Critic critic = [&](const torch::Tensor& x) { return d->forward(x); };
  auto loss = [&] {
    auto gen = make_generator(18);  // same interpolates for every evaluation
    return discriminator_loss(critic, real, fake, 10.0, gen).total;
  };
  d->zero_grad();
  loss().backward();
  for (auto& p : d->parameters()) {
    const auto analytic = p.grad().clone();
    const auto numeric = srnam::testing::numeric_gradient(
        [&](const torch::Tensor& v) {
          const auto keep = p.detach().clone();
          p.detach().copy_(v);
          const double out = loss().item<double>();
          p.detach().copy_(keep);
          return out;
        },
        p.detach());
    EXPECT_EQ(srnam::testing::gradient_mismatches(analytic, numeric), 0);
  }
}

TEST(TrainConfig, Validation) {
  auto c = smoke_config();
  EXPECT_NO_THROW(c.validate());
  c.d_steps_per_g_step = 0;
  EXPECT_THROW(c.validate(), ValueError);
  c = smoke_config();
  c.gp_lambda = -1;
  EXPECT_THROW(c.validate(), ValueError);
  c = smoke_config();
  c.iterations = 0;
  EXPECT_THROW(c.validate(), ValueError);
  DegraderTrainConfig defaults;
  EXPECT_EQ(defaults.d_steps_per_g_step, 5);
  EXPECT_EQ(defaults.gp_lambda, 10.0);
  EXPECT_EQ(defaults.batch_size, 64);
  EXPECT_EQ(defaults.adam.learning_rate, 1e-3);
  EXPECT_EQ(defaults.adam.beta1, 0.9);
  EXPECT_EQ(defaults.adam.beta2, 0.999);
  EXPECT_EQ(defaults.adam.epsilon, 1e-8);
  EXPECT_EQ(defaults.upscale_factor, 4);
}

TEST(Training, RejectsBadDatasets) {
  auto c = smoke_config();
  c.iterations = 1;
  const auto hr = imagedata::synth_dataset(4, 64, 1);
  const auto lr = imagedata::synth_dataset(4, 16, 2);
  EXPECT_THROW(train_degrader(c, lr, lr), DatasetError);
  EXPECT_THROW(train_degrader(c, hr, imagedata::synth_dataset(0, 16, 2)), DatasetError);
}

TEST(Training, NonFiniteLossAborts) {
  auto c = smoke_config();
  c.iterations = 3;
  c.gp_lambda = std::numeric_limits<double>::infinity();
  try {
    train_degrader(c, imagedata::synth_dataset(4, 64, 1), imagedata::synth_dataset(4, 16, 2));
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos);
  }
}

TEST_F(TrainedDegrader, AllLoggedLossesFinite) {
  ASSERT_EQ(ckpt_->history.size(), 50u);
  for (const auto& r : ckpt_->history) {
    for (double v : {r.d_loss, r.gp, r.g_gan, r.g_l1, r.g_vgg, r.total}) EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(r.d_loss, 0.0);
    EXPECT_GE(r.gp, 0.0);
  }
}

TEST_F(TrainedDegrader, L1TermDecreases) {
  EXPECT_LT(ckpt_->history.back().g_l1, ckpt_->history.front().g_l1);
}

TEST_F(TrainedDegrader, SameSeedsSameLossTrace) {
  const auto again = train_degrader(smoke_config(), *hr_, *lr_);
  ASSERT_EQ(again.history.size(), ckpt_->history.size());
  for (size_t i = 0; i < again.history.size(); ++i) {
    EXPECT_EQ(again.history[i].total, ckpt_->history[i].total);
    EXPECT_EQ(again.history[i].d_loss, ckpt_->history[i].d_loss);
  }
  EXPECT_EQ(weight_hash(*again.model.generator), weight_hash(*ckpt_->model.generator));
}

TEST_F(TrainedDegrader, DistinctNoiseDistinctOutputs) {
  const auto hr = hr_->image(0);
  const auto a = degrade(ckpt_->model.generator, hr, NoiseVector::sample(1));
  const auto b = degrade(ckpt_->model.generator, hr, NoiseVector::sample(2));
  EXPECT_GT(losses::l1_loss(a, b), 0.0);
}

TEST_F(TrainedDegrader, CheckpointRoundTrip) {
  TempDir dir;
  save_checkpoint(*ckpt_, dir.path());
  for (const char* f : {checkpoint::kManifestFile, checkpoint::kWeightsFile, checkpoint::kLossHistoryFile}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  const auto csv = srnam::testing::read_file(dir / checkpoint::kLossHistoryFile);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,d_loss,gp,g_gan,g_l1,g_vgg,total");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 51);

  auto loaded = load_model(dir.path());
  EXPECT_EQ(loaded.generator_arch, ckpt_->model.generator_arch);
  EXPECT_EQ(weight_hash(*loaded.generator), weight_hash(*ckpt_->model.generator));
  EXPECT_EQ(weight_hash(*loaded.discriminator), weight_hash(*ckpt_->model.discriminator));
  for (const auto& p : loaded.generator->parameters()) EXPECT_FALSE(p.requires_grad());
  const auto hr = hr_->image(1);
  const auto z = NoiseVector::sample(9);
  EXPECT_TRUE(degrade(loaded.generator, hr, z) == degrade(ckpt_->model.generator, hr, z));
}

TEST(Checkpoint, MissingOrCorrupt) {
  TempDir dir;
  EXPECT_THROW(load_model(dir.path()), CheckpointError);
  std::ofstream(dir / checkpoint::kManifestFile) << "{\"kind\": \"hrgen_stage\"}";
  EXPECT_THROW(load_model(dir.path()), CheckpointError);
}
