#include "cymba/config.hpp"

#include <fstream>
#include <sstream>

#include "cymba/vae.hpp"

namespace cymba {

namespace {

using detail::check;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  }
  check(used == v.size(), "config: trailing junk in " + key + ": '" + v + "'");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  }
  check(used == v.size(), "config: trailing junk in " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": '" + v + "'");
}

Dims parse_dims(const std::string& v) {
  std::array<Index, 3> d{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto next = v.find('x', pos);
    const bool last = i == 2;
    check(last ? next == std::string::npos : next != std::string::npos,
          "config: dims must look like LxWxH, got '" + v + "'");
    const std::string part = v.substr(pos, last ? std::string::npos : next - pos);
    d[static_cast<std::size_t>(i)] = static_cast<Index>(parse_int("dims", part));
    pos = next + 1;
  }
  return Dims{d[0], d[1], d[2]};
}

std::array<Index, 3> parse_triple(const std::string& key, const std::string& v) {
  std::array<Index, 3> out{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto next = v.find(',', pos);
    const bool last = i == 2;
    check(last ? next == std::string::npos : next != std::string::npos,
          "config: " + key + " must be three comma-separated integers, got '" + v + "'");
    out[static_cast<std::size_t>(i)] = static_cast<Index>(
        parse_int(key, trim(v.substr(pos, last ? std::string::npos : next - pos))));
    pos = next + 1;
  }
  return out;
}

void validate(const RunConfig& c) {
  check(c.dims.L > 0 && c.dims.W > 0 && c.dims.H > 0, "config: dims must be positive");
  check(c.dims.L % kLatentFactor == 0 && c.dims.W % kLatentFactor == 0 &&
            c.dims.H % kLatentFactor == 0,
        "config: dims must be divisible by 4");
  check(c.num_classes >= 2 && c.num_classes <= 256,
        "config: num_classes must be in [2, 256]");
  check(c.latent_channels >= 1, "config: latent_channels must be positive");
  check(c.vae_width >= 1 && c.mapper_width >= 1 && c.ssen_width >= 1,
        "config: widths must be positive");
  for (Index w : c.denoiser_widths)
    check(w >= 1, "config: denoiser_widths must be positive");
  check(c.ssm_state >= 1, "config: ssm_state must be positive");
  check(c.blocks_per_stage >= 1, "config: blocks_per_stage must be positive");
  check(c.scenes >= 1, "config: scenes must be positive");
  check(c.timesteps >= 1, "config: timesteps must be positive");
  check(c.beta_start > 0.0 && c.beta_start <= c.beta_end && c.beta_end < 1.0,
        "config: need 0 < beta_start <= beta_end < 1");
  check(c.lr > 0.0, "config: lr must be positive");
  check(c.weight_decay >= 0.0, "config: weight_decay must be non-negative");
  check(c.warmup_epochs >= 0, "config: warmup_epochs must be non-negative");
  check(c.vae_epochs >= 1 && c.ssen_epochs >= 1 && c.diffusion_epochs >= 1,
        "config: epoch counts must be positive");
  check(c.canny_low > 0.0 && c.canny_low < c.canny_high,
        "config: need 0 < canny_low < canny_high");
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto eq = stripped.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(line_no) + " is not key=value: '" + stripped + "'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string val = trim(stripped.substr(eq + 1));
    check(!key.empty(), "config: empty key on line " + std::to_string(line_no));

    if (key == "dims") c.dims = parse_dims(val);
    else if (key == "num_classes") c.num_classes = static_cast<Index>(parse_int(key, val));
    else if (key == "palette") c.palette = val;
    else if (key == "data_dir") c.data_dir = val;
    else if (key == "out_dir") c.out_dir = val;
    else if (key == "latent_channels") c.latent_channels = static_cast<Index>(parse_int(key, val));
    else if (key == "vae_width") c.vae_width = static_cast<Index>(parse_int(key, val));
    else if (key == "mapper_width") c.mapper_width = static_cast<Index>(parse_int(key, val));
    else if (key == "ssen_width") c.ssen_width = static_cast<Index>(parse_int(key, val));
    else if (key == "denoiser_widths") c.denoiser_widths = parse_triple(key, val);
    else if (key == "ssm_state") c.ssm_state = static_cast<Index>(parse_int(key, val));
    else if (key == "blocks_per_stage") c.blocks_per_stage = static_cast<Index>(parse_int(key, val));
    else if (key == "use_cylinder") c.use_cylinder = parse_bool(key, val);
    else if (key == "scenes") c.scenes = static_cast<int>(parse_int(key, val));
    else if (key == "timesteps") c.timesteps = static_cast<int>(parse_int(key, val));
    else if (key == "beta_start") c.beta_start = parse_double(key, val);
    else if (key == "beta_end") c.beta_end = parse_double(key, val);
    else if (key == "lr") c.lr = parse_double(key, val);
    else if (key == "weight_decay") c.weight_decay = parse_double(key, val);
    else if (key == "warmup_epochs") c.warmup_epochs = static_cast<int>(parse_int(key, val));
    else if (key == "vae_epochs") c.vae_epochs = static_cast<int>(parse_int(key, val));
    else if (key == "ssen_epochs") c.ssen_epochs = static_cast<int>(parse_int(key, val));
    else if (key == "diffusion_epochs") c.diffusion_epochs = static_cast<int>(parse_int(key, val));
    else if (key == "canny_low") c.canny_low = parse_double(key, val);
    else if (key == "canny_high") c.canny_high = parse_double(key, val);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, val));
    else throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::vector<std::uint8_t> default_palette(Index num_classes) {
  detail::check(num_classes >= 2, "palette: need at least two classes");
  std::vector<std::uint8_t> pal(static_cast<std::size_t>(num_classes));
  for (Index i = 0; i < num_classes; ++i)
    pal[static_cast<std::size_t>(i)] =
        static_cast<std::uint8_t>(i * 255 / (num_classes - 1));
  return pal;
}

std::vector<std::uint8_t> load_palette(const std::string& path, Index num_classes) {
  std::vector<std::uint8_t> pal = default_palette(num_classes);
  if (path.empty()) return pal;
  std::ifstream in(path);
  check(in.good(), "palette: cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    std::istringstream row(stripped);
    std::int64_t cls = -1, gray = -1;
    row >> cls >> gray;
    check(!row.fail(), "palette: line " + std::to_string(line_no) + " is not 'class gray'");
    check(cls >= 0 && cls < num_classes,
          "palette: class out of range on line " + std::to_string(line_no));
    check(gray >= 0 && gray <= 255,
          "palette: gray out of range on line " + std::to_string(line_no));
    pal[static_cast<std::size_t>(cls)] = static_cast<std::uint8_t>(gray);
  }
  return pal;
}

}  // namespace cymba
