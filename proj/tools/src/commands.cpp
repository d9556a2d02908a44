#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <regex>
#include <set>

#include <nlohmann/json.hpp>

#include "srnam/checkpoint.hpp"
#include "srnam/degrader.hpp"
#include "srnam/errors.hpp"
#include "srnam/hrgen.hpp"
#include "srnam/metrics.hpp"
#include "srnam/naminvert.hpp"
#include "srnam/png_io.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace srnam::cli {
namespace {

ImageTensor load_image(const fs::path& path, int64_t side, const char* flag) {
  const auto [h, w] = png_size(path);
  if (h != side || w != side) {
    throw ShapeError(std::string(flag) + ": " + path.string() + " is " + std::to_string(w) + "x" +
                     std::to_string(h) + ", expected " + std::to_string(side) + "x" + std::to_string(side));
  }
  return normalize(read_png(path));
}

void save_image(const fs::path& path, const ImageTensor& image) { write_png(path, denormalize(image)); }

ByteImage upscale_nearest(const ImageTensor& image, int64_t side) {
  auto t = image.batched(torch::kDouble);
  while (t.size(-1) < side) t = hrgen::upsample2x(t);
  return denormalize_tensor(t.squeeze(0));
}

bool has_files(const fs::path& dir) { return fs::exists(dir) && !fs::is_empty(dir); }

void guard_checkpoint_dir(const fs::path& dir, bool force) {
  if (!has_files(dir)) return;
  if (!force) {
    throw CheckpointError(dir.string() + " already holds a checkpoint; pass --force to replace it");
  }
  fs::remove_all(dir);
}

}  // namespace

int cmd_train_degrader(const RunConfig& config, bool force) {
  const auto hr = resolve_dataset(config.hr, imagedata::Role::HR, "hr");
  const auto lr = resolve_dataset(config.lr, imagedata::Role::LR, "lr");
  const fs::path dir = config.degrader_dir();
  guard_checkpoint_dir(dir, force);

  auto cfg = config.degrader;
  if (config.log_every > 0) {
    cfg.on_iteration = [every = config.log_every](const degrader::LossRecord& r) {
      if ((r.iteration + 1) % every != 0) return;
      std::cerr << "degrader it " << r.iteration + 1 << " d " << r.d_loss << " gp " << r.gp << " g_gan " << r.g_gan
                << " l1 " << r.g_l1 << " vgg " << r.g_vgg << " total " << r.total << '\n';
    };
  }
  const auto ckpt = degrader::train_degrader(cfg, hr, lr);
  degrader::save_checkpoint(ckpt, dir);
  std::cout << "degrader checkpoint: " << dir.string() << '\n';
  return 0;
}

int cmd_train_generator(const RunConfig& config, bool force) {
  const auto hr = resolve_dataset(config.hr, imagedata::Role::HR, "hr");
  const fs::path dir = config.generator_dir();
  guard_checkpoint_dir(dir, force);

  auto cfg = config.hrgen;
  if (config.log_every > 0) {
    cfg.on_iteration = [every = config.log_every](const hrgen::StageLossRecord& r) {
      if ((r.iteration + 1) % every != 0) return;
      std::cerr << "hrgen " << r.resolution << "px it " << r.iteration + 1 << " alpha " << r.alpha << " d "
                << r.d_loss << " gp " << r.gp << " g " << r.g_loss << '\n';
    };
  }
  hrgen::train_progressive(cfg, hr, dir);
  for (const auto r : cfg.schedule.resolutions) {
    std::cout << "generator stage: " << (dir / ("stage_" + std::to_string(r))).string() << '\n';
  }
  return 0;
}

int cmd_degrade(const RunConfig& config, const DegradeArgs& args) {
  if (args.count < 1) throw ConfigError("--count: must be >= 1");
  const auto hr = load_image(args.hr_image, kHrSide, "--hr-image");
  auto model = degrader::load_model(config.degrader_dir());
  const uint64_t base = args.noise_seed.value_or(config.noise_seed);

  const fs::path dest = config.out / "degraded";
  fs::create_directories(dest);
  const std::string stem = args.hr_image.stem().string();
  for (int64_t k = 0; k < args.count; ++k) {
    const uint64_t seed = naminvert::solution_seed(base, k);
    const auto lr = degrader::degrade(model.generator, hr, degrader::NoiseVector::sample(seed));
    const fs::path file = dest / (stem + "_deg" + std::to_string(k) + ".png");
    save_image(file, lr);
    std::cout << file.string() << " noise_seed=" << seed << '\n';
  }
  return 0;
}

int cmd_invert(const RunConfig& config, const InvertArgs& args) {
  if (args.lr_images.empty()) throw ConfigError("--lr-image: at least one image is required");
  std::vector<std::pair<std::string, ImageTensor>> inputs;
  std::set<std::string> seen;
  for (const auto& p : args.lr_images) {
    auto id = p.stem().string();
    if (!seen.insert(id).second) throw ConfigError("--lr-image: duplicate image id '" + id + "'");
    inputs.emplace_back(std::move(id), load_image(p, kLrSide, "--lr-image"));
  }
  const auto models = naminvert::load_models(config.generator_dir(), config.degrader_dir(), config.noise_seed);

  const fs::path dest = config.out / "invert";
  fs::create_directories(dest);
  std::ofstream report(dest / "report.jsonl", std::ios::binary | std::ios::trunc);
  for (const auto& [id, lr] : inputs) {
    const auto candidates = naminvert::super_resolve(lr, models, config.invert);
    std::vector<ByteImage> top{upscale_nearest(lr, kHrSide)};
    std::vector<ByteImage> bottom{upscale_nearest(lr, kHrSide)};
    for (size_t k = 0; k < candidates.size(); ++k) {
      const auto& c = candidates[k];
      const std::string prefix = id + "_sol" + std::to_string(k);
      save_image(dest / (prefix + "_hr.png"), c.hr_image);
      save_image(dest / (prefix + "_lr.png"), c.lr_recon);
      report << json{{"id", id},
                     {"k", k},
                     {"seed", c.seed},
                     {"iterations", config.invert.iterations},
                     {"best_objective", c.best_objective}}
                    .dump()
             << '\n';
      top.push_back(denormalize(c.hr_image));
      bottom.push_back(upscale_nearest(c.lr_recon, kHrSide));
      std::cout << prefix << " objective=" << checkpoint::format_real(c.best_objective) << '\n';
    }
    if (args.grid) {
      top.insert(top.end(), bottom.begin(), bottom.end());
      write_png(dest / (id + "_grid.png"), tile_grid(top, static_cast<int64_t>(candidates.size()) + 1));
    }
  }
  if (!report) throw std::runtime_error("failed to write " + (dest / "report.jsonl").string());
  return 0;
}

int cmd_eval(const RunConfig& config, const EvalArgs& args) {
  if (!fs::is_directory(args.solutions_dir)) {
    throw ConfigError("--solutions-dir: not a directory: " + args.solutions_dir.string());
  }
  if (!fs::is_directory(args.reference_dir)) {
    throw ConfigError("--reference-dir: not a directory: " + args.reference_dir.string());
  }

  static const std::regex solution_name(R"((.+)_sol(\d+)_hr\.png)");
  std::map<std::string, std::map<int64_t, fs::path>> solutions;
  for (const auto& entry : fs::directory_iterator(args.solutions_dir)) {
    std::smatch m;
    const auto name = entry.path().filename().string();
    if (std::regex_match(name, m, solution_name)) solutions[m[1]][std::stoll(m[2])] = entry.path();
  }
  if (solutions.empty()) {
    throw ConfigError("--solutions-dir: no <id>_sol<k>_hr.png files in " + args.solutions_dir.string());
  }
  std::vector<std::string> missing;
  for (const auto& [id, _] : solutions) {
    if (!fs::exists(args.reference_dir / (id + ".png"))) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ConfigError("--reference-dir: no reference image for solution ids: " + list);
  }

  std::map<std::pair<std::string, int64_t>, double> objectives;
  if (std::ifstream report(args.solutions_dir / "report.jsonl"); report) {
    std::string line;
    while (std::getline(report, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      objectives[{j.at("id").get<std::string>(), j.at("k").get<int64_t>()}] = j.at("best_objective").get<double>();
    }
  }

  const auto backend = metrics::make_landmark_backend(config.landmark_backend, config.landmark_sigma);
  std::vector<metrics::EvalRow> rows;
  for (const auto& [id, files] : solutions) {
    const auto ref = backend->heatmaps(load_image(args.reference_dir / (id + ".png"), kHrSide, "--reference-dir"));
    std::vector<ImageTensor> images;
    for (const auto& [k, path] : files) images.push_back(load_image(path, kHrSide, "--solutions-dir"));
    std::optional<double> diversity;
    if (images.size() >= 2) diversity = metrics::solution_diversity(images);
    size_t i = 0;
    for (const auto& [k, path] : files) {
      metrics::EvalRow row{id, k, metrics::heatmap_metric(backend->heatmaps(images[i++]), ref), std::nullopt, diversity};
      if (const auto it = objectives.find({id, k}); it != objectives.end()) row.objective = it->second;
      rows.push_back(std::move(row));
    }
  }
  const fs::path csv = args.csv.value_or(config.out / "eval.csv");
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  metrics::write_eval_csv(rows, csv);
  std::cout << "eval: " << rows.size() << " rows for " << solutions.size() << " images -> " << csv.string() << '\n';
  return 0;
}

int cmd_synth(const RunConfig& config, const SynthArgs& args) {
  const auto role = args.role == "lr" ? imagedata::Role::LR : imagedata::Role::HR;
  if (args.count < 1) throw ConfigError("--count: must be >= 1");
  const auto& spec = role == imagedata::Role::HR ? config.hr : config.lr;
  const uint64_t seed = args.seed.value_or(spec.synthetic_seed);
  const auto dataset = imagedata::synth_dataset(static_cast<size_t>(args.count), imagedata::role_resolution(role), seed);
  const fs::path dest = args.dest.value_or(config.out / "data" / args.role);
  std::cout << imagedata::export_dataset(dataset, dest).string() << '\n';
  return 0;
}

}  // namespace srnam::cli
