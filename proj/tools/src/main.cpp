// srnam: train the degradation and HR generator networks, degrade HR images,
// super-resolve LR images by latent inversion and score the results.
//
// Exit codes: 0 ok, 2 configuration or input error, 3 training divergence,
// 4 checkpoint problem.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <torch/torch.h>

#include "commands.hpp"
#include "config.hpp"
#include "srnam/errors.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDivergence = 3;
constexpr int kExitCheckpoint = 4;

}  // namespace

int main(int argc, char** argv) {
  using namespace srnam::cli;

  CLI::App app{"Super-resolution by learned degradation and latent-code inversion"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::string> config_path;
  std::optional<uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
  bool force = false;
  app.add_option("--config", config_path, "Configuration file of dotted key=value lines");
  app.add_option("--seed", seed, "Root seed (module seeds derive from it unless set explicitly)");
  app.add_option("--out", out, "Output directory (output.dir)");
  app.add_option("--set", overrides, "Extra key=value override; may repeat")->take_all();

  auto* train_deg = app.add_subcommand("train-degrader", "Train the HR-to-LR degradation GAN");
  train_deg->add_flag("--force", force, "Replace an existing checkpoint");
  auto* train_gen = app.add_subcommand("train-generator", "Train the progressive HR face generator");
  train_gen->add_flag("--force", force, "Replace existing stage checkpoints");

  DegradeArgs degrade_args;
  auto* degrade = app.add_subcommand("degrade", "Degrade a 64x64 HR image with sampled noise vectors");
  degrade->add_option("--hr-image", degrade_args.hr_image, "64x64 PNG")->required();
  degrade->add_option("--noise-seed", degrade_args.noise_seed, "Seed of the first noise vector");
  degrade->add_option("--count", degrade_args.count, "Number of LR samples")->capture_default_str();

  InvertArgs invert_args;
  std::optional<int64_t> num_solutions;
  std::optional<int64_t> iters;
  auto* invert = app.add_subcommand("invert", "Super-resolve 16x16 LR images by latent inversion");
  invert->add_option("--lr-image", invert_args.lr_images, "16x16 PNG; may repeat")->required();
  invert->add_option("--num-solutions", num_solutions, "Candidates per image (naminvert.num_solutions)");
  invert->add_option("--iters", iters, "Optimizer iterations in [1, 10000] (naminvert.iterations)");
  invert->add_flag("--grid", invert_args.grid, "Also write an input / HR / re-degraded comparison grid");

  EvalArgs eval_args;
  std::optional<std::string> eval_csv;
  auto* eval = app.add_subcommand("eval", "Landmark heatmap metric and solution diversity");
  eval->add_option("--solutions-dir", eval_args.solutions_dir, "Directory written by invert")->required();
  eval->add_option("--reference-dir", eval_args.reference_dir, "Directory of <id>.png HR references")->required();
  eval->add_option("--csv", eval_csv, "Output CSV (default <out>/eval.csv)");

  SynthArgs synth_args;
  std::optional<std::string> synth_dest;
  auto* synth = app.add_subcommand("synth", "Export a synthetic face dataset with a manifest");
  synth->add_option("--role", synth_args.role, "hr or lr")->check(CLI::IsMember({"hr", "lr"}))->capture_default_str();
  synth->add_option("--count", synth_args.count, "Number of images")->required();
  synth->add_option("--synthetic-seed", synth_args.seed, "Dataset seed (default data.<role>.synthetic_seed)");
  synth->add_option("--dest", synth_dest, "Output directory (default <out>/data/<role>)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    Assignments assignments;
    if (config_path) assignments = read_config_file(*config_path);
    for (const auto& text : overrides) assignments.push_back(split_assignment(text));
    // Flags win over the file and over --set.
    if (seed) {
      assignments.emplace_back("seed", std::to_string(*seed));
      if (invert->parsed()) assignments.emplace_back("naminvert.seed", std::to_string(*seed));
    }
    if (out) assignments.emplace_back("output.dir", *out);
    if (num_solutions) assignments.emplace_back("naminvert.num_solutions", std::to_string(*num_solutions));
    if (iters) {
      if (*iters < 1 || *iters > 10000) throw ConfigError("--iters: must lie in [1, 10000]");
      assignments.emplace_back("naminvert.iterations", std::to_string(*iters));
    }
    const RunConfig config = build_config(assignments);
    torch::set_num_threads(static_cast<int>(config.threads));

    if (train_deg->parsed()) return cmd_train_degrader(config, force);
    if (train_gen->parsed()) return cmd_train_generator(config, force);
    if (degrade->parsed()) return cmd_degrade(config, degrade_args);
    if (invert->parsed()) return cmd_invert(config, invert_args);
    if (eval->parsed()) {
      if (eval_csv) eval_args.csv = *eval_csv;
      return cmd_eval(config, eval_args);
    }
    if (synth_dest) synth_args.dest = *synth_dest;
    return cmd_synth(config, synth_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const srnam::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const srnam::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const srnam::ShapeError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const srnam::ValueError& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const srnam::DatasetError& e) {
    std::cerr << "dataset error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
