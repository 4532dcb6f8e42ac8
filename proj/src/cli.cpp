#include "cymba/cli.hpp"

#include <iostream>

#include <CLI11.hpp>

#include "cymba/train.hpp"

namespace cymba {

namespace {

std::vector<ConditionPaths> parse_conditions(const std::vector<std::string>& raw) {
  std::vector<ConditionPaths> out;
  for (const std::string& pair : raw) {
    const auto comma = pair.find(',');
    detail::check(comma != std::string::npos && comma > 0 && comma + 1 < pair.size(),
                  "sample: conditions must be SKETCH.pgm,PSA.pgm pairs, got '" + pair +
                      "'");
    out.push_back({pair.substr(0, comma), pair.substr(comma + 1)});
  }
  return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Sketch-conditioned 3D semantic scene generation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "path to the key=value run config")
      ->required();
  std::uint64_t seed_flag = 0;
  auto* seed_opt = app.add_option("--seed", seed_flag, "override the config seed");
  int epochs_flag = 0;
  auto* epochs_opt =
      app.add_option("--epochs", epochs_flag, "override the stage's epoch count");
  std::string out_flag;
  auto* out_opt = app.add_option("--out", out_flag, "override the output directory");

  auto* gen = app.add_subcommand("gen-toy", "write a synthetic dataset");
  int count = 0;
  gen->add_option("count", count, "number of scenes (default: config scenes)");

  auto* mk = app.add_subcommand("make-sketch",
                                "derive sketch and semantic-map images from labels");
  std::vector<std::string> mk_inputs;
  mk->add_option("inputs", mk_inputs, ".lbl files")->required();

  auto* tv = app.add_subcommand("train-vae", "train the scene autoencoder");
  auto* ts = app.add_subcommand("train-ssen", "train the sketch encoder");
  auto* td = app.add_subcommand("train-diffusion", "train the latent denoiser");

  auto* sm = app.add_subcommand("sample", "generate scenes from conditions");
  std::vector<std::string> sm_conditions;
  sm->add_option("conditions", sm_conditions, "SKETCH.pgm,PSA.pgm pairs")->required();
  std::vector<std::uint64_t> sm_seeds;
  sm->add_option("--seeds", sm_seeds, "sampling seeds (default: config seed)")
      ->delimiter(',');

  auto* ev = app.add_subcommand("evaluate", "score generated scenes against real ones");
  std::string real_dir, gen_dir;
  ev->add_option("real_dir", real_dir, "directory of reference .lbl files")->required();
  ev->add_option("gen_dir", gen_dir, "directory of generated .lbl files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (*seed_opt) cfg.seed = seed_flag;
    if (*out_opt && !gen->parsed() && !mk->parsed() && !sm->parsed())
      cfg.out_dir = out_flag;

    if (gen->parsed()) {
      if (*out_opt) cfg.data_dir = out_flag;
      return run_gen_toy(cfg, cfg.seed, count > 0 ? count : cfg.scenes);
    }
    if (mk->parsed()) {
      const std::string dir = *out_opt ? out_flag : cfg.out_dir + "/sketches";
      return run_make_sketch(cfg, mk_inputs, dir);
    }
    if (tv->parsed())
      return run_train_vae(cfg, *epochs_opt ? epochs_flag : cfg.vae_epochs);
    if (ts->parsed())
      return run_train_ssen(cfg, *epochs_opt ? epochs_flag : cfg.ssen_epochs);
    if (td->parsed())
      return run_train_diffusion(cfg, *epochs_opt ? epochs_flag : cfg.diffusion_epochs);
    if (sm->parsed()) {
      const std::string dir = *out_opt ? out_flag : cfg.out_dir + "/samples";
      std::vector<std::uint64_t> seeds = sm_seeds.empty()
                                             ? std::vector<std::uint64_t>{cfg.seed}
                                             : sm_seeds;
      return run_sample(cfg, parse_conditions(sm_conditions), seeds, dir);
    }
    if (ev->parsed()) return run_evaluate(cfg, real_dir, gen_dir, std::cout);
    throw std::runtime_error("no command dispatched");
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace cymba
