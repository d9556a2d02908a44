// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "srnam/degrader.hpp"
#include "srnam/hrgen.hpp"
#include "srnam/losses.hpp"
#include "srnam/metrics.hpp"
#include "srnam/naminvert.hpp"
#include "srnam/png_io.hpp"
#include "srnam/rng.hpp"
#include "testing.hpp"

namespace fs = std::filesystem;
using namespace srnam;
using srnam::testing::TempDir;
using srnam::testing::uniform;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed: " << what << "] ";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SRNAM_CLI_PATH) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::vector<double>> read_csv_numbers(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

bool all_finite(const std::vector<std::vector<double>>& rows) {
  for (const auto& r : rows) {
    for (double v : r) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

void loss_formulas(Outcome& o) {
  constexpr double tol = 1e-9;
  auto near = [&](double got, double want, const std::string& what) {
    o.check(std::abs(got - want) <= tol, what + " = " + std::to_string(got));
  };
  near(losses::gan_loss_d(std::vector<double>(4, 1.0), std::vector<double>(4, -1.0)), 0.0, "hinge D inactive");
  near(losses::gan_loss_d(std::vector<double>(3, 0.0), std::vector<double>(5, 0.0)), 2.0, "hinge D at zero");
  near(losses::gan_loss_d(std::vector<double>(2, 2.0), std::vector<double>(2, -3.0)), 0.0, "hinge D saturated");

  const auto w = uniform({3, 4, 4}, 1) / uniform({3, 4, 4}, 1).norm();
  const auto real = uniform({5, 3, 4, 4}, 2);
  const auto fake = uniform({5, 3, 4, 4}, 3);
  auto gen = make_generator(4);
  const losses::Critic unit = [&](const torch::Tensor& x) { return (x * w).flatten(1).sum(1); };
  const losses::Critic flat = [](const torch::Tensor& x) { return 0.0 * x.flatten(1).sum(1); };
  const losses::Critic tripled = [&](const torch::Tensor& x) { return 3.0 * (x * w).flatten(1).sum(1); };
  near(losses::gradient_penalty(unit, real, fake, 10.0, gen).item<double>(), 0.0, "GP unit critic");
  near(losses::gradient_penalty(flat, real, fake, 10.0, gen).item<double>(), 10.0, "GP flat critic");
  near(losses::gradient_penalty(tripled, real, fake, 10.0, gen).item<double>(), 40.0, "GP tripled critic");

  const losses::LossWeights lw{0.7, 0.2, 1.0, 1.0};
  near(losses::total_loss(1.3 + 0.4, 2.0, lw) - losses::total_loss(1.3, 2.0, lw), 0.7 * 0.4, "total linear in pixel");
  near(losses::total_loss(1.3, 2.0 + 5.5, lw) - losses::total_loss(1.3, 2.0, lw), 0.2 * 5.5, "total linear in gan");

  const metrics::HeatmapSet zero(torch::zeros({1, 2, 2}, torch::kDouble));
  const metrics::HeatmapSet one(torch::ones({1, 2, 2}, torch::kDouble));
  near(metrics::heatmap_metric(zero, zero), 0.0, "heatmap identical");
  near(metrics::heatmap_metric(one, zero), 4.0, "heatmap offset");
  o.detail << "hinge, penalty, total and heatmap hand cases within 1e-9";
}

// 64-parameter generator on 4x4 HR images producing 2x2 LR images.
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

void gradient_checks(Outcome& o) {
  const auto t0 = Clock::now();
  ToyGenerator g;
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
    return degrader::generator_loss(hr, lr, (lr * critic_w).flatten(1).sum(1), weights, &fx, 2).total;
  };
  g.zero_grad();
  loss().backward();
  int64_t bad = 0;
  int64_t checked = 0;
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
    bad += srnam::testing::gradient_mismatches(analytic, numeric);
    checked += p.numel();
  }
  o.check(checked == 64, "toy generator has 64 parameters");
  o.check(bad == 0, std::to_string(bad) + " degrader-objective gradient entries off");

  const auto wg = uniform({12, 5}, 41);
  const auto wd = uniform({4, 12}, 42);
  const naminvert::Mapping gm = [&](const torch::Tensor& v) { return torch::tanh(torch::matmul(v, wg.t())); };
  const naminvert::Mapping dm = [&](const torch::Tensor& h) { return torch::sin(torch::matmul(h, wd.t())); };
  const auto target = uniform({1, 4}, 43);
  int64_t bad_z = 0;
  for (uint64_t s = 0; s < 5; ++s) {
    auto zz = uniform({1, 5}, 50 + s).requires_grad_(true);
    naminvert::objective(zz, target, gm, dm).backward();
    const auto numeric = srnam::testing::numeric_gradient(
        [&](const torch::Tensor& x) { return naminvert::objective(x, target, gm, dm).item<double>(); }, zz.detach());
    bad_z += srnam::testing::gradient_mismatches(zz.grad(), numeric);
  }
  o.check(bad_z == 0, std::to_string(bad_z) + " inversion-objective gradient entries off");
  const double secs = seconds_since(t0);
  o.check(secs < 120, "runtime under 2 min");
  o.detail << checked << " generator parameters and 5 latent codes match central differences (rtol 1e-3)";
}

void pixel_shuffle_bijection(Outcome& o) {
  std::mt19937_64 rng(2024);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int64_t r = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t c = 1 + static_cast<int64_t>(rng() % 4);
    const int64_t h = 1 + static_cast<int64_t>(rng() % 6);
    const int64_t w = 1 + static_cast<int64_t>(rng() % 6);
    const int64_t b = 1 + static_cast<int64_t>(rng() % 3);
    const auto x = uniform({b, c * r * r, h, w}, 5000 + static_cast<uint64_t>(trial), -10, 10);
    if (!torch::equal(degrader::pixel_unshuffle(degrader::pixel_shuffle(x, r), r), x)) ++failures;
  }
  o.check(failures == 0, std::to_string(failures) + " shapes not restored exactly");
  o.detail << "100 random shapes restored exactly";
}

void fade_linearity(Outcome& o) {
  hrgen::ProgressiveArch arch;
  arch.widths = {32, 32, 16, 16, 8};
  arch.seed = 17;
  hrgen::ProgressiveGenerator g(arch, hrgen::kMaxStage);
  g->to(torch::kDouble);
  auto gen = make_generator(99);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = hrgen::LatentCode(torch::randn({hrgen::kLatentDim}, gen, torch::kDouble));
    const double alpha = torch::rand({1}, gen, torch::kDouble).item<double>();
    const int64_t stage = 1 + trial % hrgen::kMaxStage;
    const auto out = hrgen::gen_forward(g, z, stage, alpha).tensor();
    torch::NoGradGuard no_grad;
    const auto b = g->branches(z.values().unsqueeze(0), stage);
    const auto expected = ((1.0 - alpha) * b.low + alpha * b.high).squeeze(0);
    worst = std::max(worst, (out - expected).abs().max().item<double>());
  }
  o.check(worst <= 1e-6, "fade deviation " + std::to_string(worst));

  bool exact = true;
  for (int64_t s = 0; s < hrgen::kMaxStage; ++s) {
    hrgen::ProgressiveGenerator base(arch, s);
    const auto grown = hrgen::grow(base);
    const auto after = grown->named_parameters();
    for (const auto& item : base->named_parameters()) {
      exact = exact && after.contains(item.key()) && torch::equal(after[item.key()], item.value());
    }
    exact = exact && grown->stage() == s + 1;
  }
  o.check(exact, "grow changed an existing parameter");
  o.detail << "20 random (z, alpha): max deviation " << worst << "; grow bit-exact at every stage";
}

naminvert::InversionOptions scalar_options(uint64_t seed) {
  naminvert::InversionOptions opts;
  opts.latent_shape = {1};
  opts.dtype = torch::kDouble;
  opts.iterations = 2000;
  opts.init_scale = 1.5;
  opts.adam.learning_rate = 0.01;
  opts.seed = seed;
  return opts;
}

void bimodal_toy(Outcome& o) {
  const auto t0 = Clock::now();
  auto opts = scalar_options(2024);
  opts.num_solutions = 10;
  const naminvert::Mapping square = [](const torch::Tensor& z) { return z.pow(2); };
  const naminvert::Mapping identity = [](const torch::Tensor& x) { return x; };
  const auto results = naminvert::invert_multi(torch::full({1, 1}, 4.0, torch::kDouble), square, identity, opts);
  bool plus = false;
  bool minus = false;
  double worst = 0;
  int64_t positive = 0;
  for (const auto& r : results) {
    const double z = r.z_star.item<double>();
    plus = plus || std::abs(z - 2.0) <= 1e-2;
    minus = minus || std::abs(z + 2.0) <= 1e-2;
    worst = std::max(worst, r.best_objective);
    if (z > 0) ++positive;
  }
  const double secs = seconds_since(t0);
  o.check(plus && minus, "both preimages recovered");
  o.check(worst <= 1e-3, "worst objective " + std::to_string(worst));
  o.check(secs < 60, "runtime under 1 min");
  o.detail << positive << " of 10 inits reached +2, " << 10 - positive << " reached -2; worst objective " << worst;
}

void linear_toy(Outcome& o) {
  const auto wg = uniform({6, 3}, 31);
  const auto wd = uniform({8, 6}, 32);
  const naminvert::Mapping g = [&](const torch::Tensor& z) { return torch::matmul(z, wg.t()); };
  const naminvert::Mapping d = [&](const torch::Tensor& h) { return torch::matmul(h, wd.t()); };
  const auto y = d(g(uniform({1, 3}, 61, -2, 2)));
  naminvert::InversionOptions opts;
  opts.latent_shape = {3};
  opts.dtype = torch::kDouble;
  opts.iterations = 3000;
  opts.adam.learning_rate = 0.01;
  opts.seed = 7;
  const auto r = naminvert::invert(y, g, d, opts);
  // Normal equations: z = (A^T A)^{-1} A^T y.
  const auto a = torch::matmul(wd, wg);
  const auto z_ls = torch::linalg_solve(torch::matmul(a.t(), a), torch::matmul(a.t(), y.squeeze(0)));
  const double err = (r.lr_recon.squeeze(0) - torch::matmul(a, z_ls)).abs().max().item<double>();
  o.check(err <= 1e-3, "max deviation " + std::to_string(err));
  o.detail << "max deviation from least-squares image " << err;
}

// ---------------------------------------------------------------------------

struct SmokeRun {
  fs::path root;
  fs::path config;
  fs::path log;
  std::string base() const { return "--config " + config.string() + " --out " + (root / "run").string() + " "; }
};

void end_to_end(Outcome& o, const SmokeRun& run) {
  const auto t0 = Clock::now();
  const auto out = run.root / "run";
  o.check(cli(run.base() + "--set degrader.iterations=500 train-degrader", run.log) == 0, "train-degrader");
  o.check(cli(run.base() + "train-generator", run.log) == 0, "train-generator");
  o.check(cli(run.base() + "synth --role hr --count 200", run.log) == 0, "synth");
  // Degrade a training image, then super-resolve it.
  o.check(cli(run.base() + "degrade --count 1 --hr-image " + (out / "data/hr/hr00000.png").string(), run.log) == 0,
          "degrade");
  const auto lr_png = out / "degraded/hr00000_deg0.png";
  o.check(cli(run.base() + "invert --num-solutions 3 --grid --lr-image " + lr_png.string(), run.log) == 0, "invert");
  if (!o.pass) return;

  const auto deg_rows = read_csv_numbers(out / "degrader/loss_history.csv");
  const auto gen_rows = read_csv_numbers(out / "generator/loss_history.csv");
  o.check(deg_rows.size() == 500, "degrader history has 500 rows");
  o.check(all_finite(deg_rows) && all_finite(gen_rows), "finite losses");

  double worst_regen = 0;
  for (const auto& stage : {"stage_4", "stage_8", "stage_16"}) {
    auto ckpt = hrgen::load_stage(out / "generator" / stage);
    torch::Tensor saved;
    torch::load(saved, (out / "generator" / stage / "samples.pt").string());
    worst_regen = std::max(worst_regen, (hrgen::regenerate_samples(ckpt) - saved).abs().max().item<double>());
  }
  o.check(worst_regen <= 1e-6, "regenerated samples deviate by " + std::to_string(worst_regen));
  degrader::load_model(out / "degrader");

  std::vector<double> candidates;
  std::ifstream report(out / "invert/report.jsonl");
  for (std::string line; std::getline(report, line);) {
    candidates.push_back(nlohmann::json::parse(line).at("best_objective").get<double>());
  }
  o.check(candidates.size() == 3, "3 candidates reported");

  const auto models = naminvert::load_models(out / "generator", out / "degrader", 7);
  const auto target = normalize(read_png(lr_png)).batched(torch::kFloat);
  const auto gmap = models.generator_map();
  const auto dmap = models.degrader_map();
  auto gen = make_generator(31337);
  std::vector<double> baseline;
  {
    torch::NoGradGuard no_grad;
    for (int i = 0; i < 100; ++i) {
      const auto z = torch::randn({1, models.generator.arch.latent_dim}, gen, torch::kDouble);
      baseline.push_back(naminvert::objective(z, target, gmap, dmap).item<double>());
    }
  }
  std::sort(baseline.begin(), baseline.end());
  const double median = 0.5 * (baseline[49] + baseline[50]);
  for (double c : candidates) o.check(c < median, "candidate " + std::to_string(c) + " not below median");

  const double secs = seconds_since(t0);
  o.check(secs <= 1800, "runtime within 30 min");
  o.detail << "candidates";
  for (double c : candidates) o.detail << ' ' << c;
  o.detail << " vs random-z median " << median << "; sample regeneration max deviation " << worst_regen;
}

void determinism(Outcome& o, const SmokeRun& run) {
  std::vector<std::string> compared;
  auto both = [&](const std::string& args) {
    for (const char* out : {"a", "b"}) {
      const std::string prefix = "--config " + run.config.string() + " --out " + (run.root / out).string() + " ";
      std::string expanded = args;
      for (size_t at; (at = expanded.find("{out}")) != std::string::npos;) {
        expanded.replace(at, 5, (run.root / out).string());
      }
      o.check(cli(prefix + expanded, run.log) == 0, args + " in run " + out);
    }
  };
  both("train-degrader");
  both("train-generator");
  both("synth --role hr --count 3");
  both("synth --role lr --count 2");
  both("degrade --count 2 --hr-image {out}/data/hr/hr00000.png");
  both("invert --lr-image {out}/data/lr/lr00000.png --lr-image {out}/data/lr/lr00001.png");
  both("eval --solutions-dir {out}/invert --reference-dir {out}/refs");
  if (!o.pass) return;

  for (const auto& rel : {"degrader/loss_history.csv", "generator/loss_history.csv", "invert/report.jsonl",
                          "eval.csv", "degraded/hr00000_deg1.png", "invert/lr00001_sol2_hr.png",
                          "generator/stage_16/samples.png"}) {
    const auto a = srnam::testing::read_file(run.root / "a" / rel);
    const auto b = srnam::testing::read_file(run.root / "b" / rel);
    o.check(!a.empty() && a == b, std::string(rel) + " differs");
    compared.emplace_back(rel);
  }
  o.detail << compared.size() << " artifacts byte-identical across reruns";
}

void frozen_networks(Outcome& o, const SmokeRun& run) {
  const auto out = run.root / "run";
  const auto models = naminvert::load_models(out / "generator", out / "degrader", 7);
  auto hashes = [&] {
    return std::vector<uint64_t>{weight_hash(*models.generator.generator), weight_hash(*models.generator.discriminator),
                                 weight_hash(*models.degrader.generator),
                                 weight_hash(*models.degrader.discriminator)};
  };
  const auto before = hashes();
  naminvert::InversionOptions opts;
  opts.iterations = 50;
  opts.num_solutions = 2;
  opts.adam.learning_rate = 0.05;
  const auto lr = imagedata::synth_dataset(5, 16, 3);
  for (size_t i = 0; i < lr.size(); ++i) {
    opts.seed = i;
    naminvert::super_resolve(lr.image(i), models, opts);
  }
  o.check(hashes() == before, "weights changed by inversion");
  const auto fresh = naminvert::load_models(out / "generator", out / "degrader", 7);
  o.check(weight_hash(*fresh.generator.generator) == before[0] && weight_hash(*fresh.degrader.generator) == before[2],
          "in-memory weights differ from disk");
  o.detail << "4 network hashes unchanged after 10 inversions";
}

}  // namespace

int main() {
  torch::set_num_threads(1);
  TempDir dir;
  SmokeRun smoke{dir.path(), SRNAM_SMOKE_CONFIG, dir / "cli.log"};

  struct Criterion {
    const char* name;
    std::function<void(Outcome&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"loss formulas", loss_formulas},
      {"gradient checks", gradient_checks},
      {"pixel-shuffle bijection", pixel_shuffle_bijection},
      {"fade-in linearity and growth", fade_linearity},
      {"bimodal inversion toy", bimodal_toy},
      {"linear inversion toy", linear_toy},
      {"end-to-end smoke", [&](Outcome& o) { end_to_end(o, smoke); }},
      {"determinism", [&](Outcome& o) {
         fs::create_directories(dir / "a/refs");
         fs::create_directories(dir / "b/refs");
         // eval needs an HR reference per LR id.
         for (const char* out : {"a", "b"}) {
           for (const char* id : {"lr00000", "lr00001"}) {
             write_png(dir / out / "refs" / (std::string(id) + ".png"),
                       denormalize(imagedata::synth_dataset(1, 64, 40).image(0)));
           }
         }
         determinism(o, smoke);
       }},
      {"frozen networks", [&](Outcome& o) { frozen_networks(o, smoke); }},
  };

  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].run(o);
    } catch (const std::exception& e) {
      o.check(false, std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << criteria[i].name << ": " << o.detail.str()
              << " (" << seconds_since(t0) << " s)" << std::endl;
  }
  if (failed > 0) {
    std::cout << "CLI log:\n" << srnam::testing::read_file(smoke.log);
  }
  return failed == 0 ? 0 : 1;
}
