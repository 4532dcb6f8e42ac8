#pragma once

#include <iosfwd>

#include "cymba/config.hpp"
#include "cymba/diffusion.hpp"
#include "cymba/metrics.hpp"
#include "cymba/optim.hpp"
#include "cymba/toygen.hpp"

namespace cymba {

// Canonical dataset file names: scene_007.lbl, sketch_007.pgm, psa_007.pgm.
std::string scene_file(int i);
std::string sketch_file(int i);
std::string psa_file(int i);

// Feature vector for distribution metrics: the encoder's latent mean,
// average-pooled over space, one entry per latent channel.
Eigen::VectorXd extract_features(const VoxelGrid& grid, const VaeModel& vae);

// Command bodies behind the CLI. Precondition violations (bad inputs,
// missing prerequisites) throw std::invalid_argument; unexpected failures
// throw std::runtime_error. The returned value is the process exit code.
int run_gen_toy(const RunConfig& cfg, std::uint64_t seed, int count);

// Converts label volumes to sketch + semantic-map images. Per-file failures
// are reported and skipped; a nonzero exit summarizes them.
int run_make_sketch(const RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::string& out_dir);

int run_train_vae(const RunConfig& cfg, int epochs);
int run_train_ssen(const RunConfig& cfg, int epochs);
int run_train_diffusion(const RunConfig& cfg, int epochs);

struct ConditionPaths {
  std::string sketch;
  std::string psa;
};

int run_sample(const RunConfig& cfg, const std::vector<ConditionPaths>& conditions,
               const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

// Writes the metric report as JSON to `out`.
int run_evaluate(const RunConfig& cfg, const std::string& real_dir,
                 const std::string& gen_dir, std::ostream& out);

}  // namespace cymba
