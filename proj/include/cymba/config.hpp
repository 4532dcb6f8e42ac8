#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "cymba/voxel.hpp"

namespace cymba {

// Run settings shared by every command, read from a plain-text key=value
// file. Validation happens entirely at load time, before any output exists.
struct RunConfig {
  Dims dims{64, 64, 8};
  Index num_classes = 8;
  std::string palette;  // optional path to a "class gray" table
  std::string data_dir = "data";
  std::string out_dir = "out";

  Index latent_channels = 4;
  Index vae_width = 16;
  Index mapper_width = 12;
  Index ssen_width = 16;
  std::array<Index, 3> denoiser_widths{32, 64, 128};
  Index ssm_state = 16;
  Index blocks_per_stage = 2;
  bool use_cylinder = true;

  int scenes = 16;
  int timesteps = 100;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int warmup_epochs = 3;
  int vae_epochs = 30;
  int ssen_epochs = 20;
  int diffusion_epochs = 50;
  double canny_low = 50.0;
  double canny_high = 100.0;
  std::uint64_t seed = 1;
};

// Parses and validates config text. Unknown keys, malformed values, and
// constraint violations throw std::invalid_argument.
RunConfig parse_config_text(const std::string& text);

// Reads the file at path and parses it. Missing file throws invalid_argument.
RunConfig load_config(const std::string& path);

// Per-class gray values used when rendering label images for edge detection.
// Without a palette file, class ids spread evenly over [0, 255].
std::vector<std::uint8_t> default_palette(Index num_classes);
std::vector<std::uint8_t> load_palette(const std::string& path, Index num_classes);

}  // namespace cymba
