#include "cymba/train.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cymba/canny.hpp"

namespace cymba {

namespace fs = std::filesystem;

namespace {

using detail::check;
using nlohmann::json;

// Seed-stream tags, one per stage, so no two stages share a generator.
constexpr std::uint64_t kVaeStage = 1;
constexpr std::uint64_t kSsenStage = 2;
constexpr std::uint64_t kDiffStage = 3;
constexpr std::uint64_t kSampleStage = 4;
constexpr std::uint64_t kToyStage = 5;

std::string index_tag(int i) {
  std::ostringstream out;
  out << std::setw(3) << std::setfill('0') << i;
  return out.str();
}

std::string dims_str(const Dims& d) {
  std::ostringstream out;
  out << d.L << 'x' << d.W << 'x' << d.H;
  return out.str();
}

Dims latent_dims(const RunConfig& cfg) {
  return Dims{cfg.dims.L / kLatentFactor, cfg.dims.W / kLatentFactor,
              cfg.dims.H / kLatentFactor};
}

Shape latent_shape(const RunConfig& cfg) {
  const Dims l = latent_dims(cfg);
  return Shape{cfg.latent_channels, l.L, l.W, l.H};
}

std::vector<Tensor> tensors_of(const ParamStore& ps) {
  std::vector<Tensor> out;
  out.reserve(ps.items.size());
  for (const auto& item : ps.items) out.push_back(item.second);
  return out;
}

void freeze(ParamStore& ps) {
  for (auto& item : ps.items) item.second.set_requires_grad(false);
}

void append_csv_row(const fs::path& path, const std::string& header,
                    const std::string& row) {
  const bool fresh = !fs::exists(path) || fs::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out.good()) throw std::runtime_error("cannot open loss log " + path.string());
  if (fresh) out << header << '\n';
  out << row << '\n';
}

std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

json base_meta(const RunConfig& cfg, const std::string& stage, int epochs_done) {
  json meta;
  meta["stage"] = stage;
  meta["dims"] = dims_str(cfg.dims);
  meta["num_classes"] = cfg.num_classes;
  meta["epochs_done"] = epochs_done;
  return meta;
}

void check_meta(const json& meta, const RunConfig& cfg, const std::string& stage,
                const fs::path& path) {
  check(meta.value("stage", std::string()) == stage,
        path.string() + " is not a " + stage + " checkpoint");
  check(meta.value("dims", std::string()) == dims_str(cfg.dims),
        path.string() + " was trained with dims " + meta.value("dims", std::string()) +
            ", config says " + dims_str(cfg.dims));
  check(meta.value("num_classes", Index(-1)) == cfg.num_classes,
        path.string() + " was trained with a different num_classes");
}

// Shared dataset views used by the training stages.
struct ToyData {
  std::vector<VoxelGrid> scenes;
  std::vector<Image8> sketches;
  std::vector<Image8> psas;
};

ToyData load_toy_data(const RunConfig& cfg, bool need_conditions) {
  ToyData data;
  const fs::path dir = cfg.data_dir;
  for (int i = 0; i < cfg.scenes; ++i) {
    const fs::path scene = dir / scene_file(i);
    check(fs::exists(scene), "missing " + scene.string() + "; run gen-toy first");
    data.scenes.push_back(load_labels(scene, cfg.dims, cfg.num_classes));
    if (!need_conditions) continue;
    const fs::path sk = dir / sketch_file(i);
    const fs::path ps = dir / psa_file(i);
    check(fs::exists(sk), "missing " + sk.string() + "; run gen-toy first");
    check(fs::exists(ps), "missing " + ps.string() + "; run gen-toy first");
    ConditionPair pair = read_condition_pair(sk, ps, cfg.num_classes);
    check(pair.sketch.rows == cfg.dims.L && pair.sketch.cols == cfg.dims.W,
          sk.string() + " extents do not match config dims");
    data.sketches.push_back(std::move(pair.sketch));
    data.psas.push_back(std::move(pair.psa));
  }
  return data;
}

Image8 sketch_from_bev(const Image8& bev, const std::vector<std::uint8_t>& palette,
                       double low, double high) {
  std::vector<double> gray(bev.pixels.size());
  for (std::size_t i = 0; i < gray.size(); ++i) {
    check(bev.pixels[i] < palette.size(), "label outside the palette");
    gray[i] = static_cast<double>(palette[bev.pixels[i]]);
  }
  return canny(gray, bev.rows, bev.cols, low, high);
}

VaeModel build_vae(const RunConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kVaeStage));
  return VaeModel(cfg.num_classes, cfg.vae_width, cfg.latent_channels, rng);
}

SketchEncoder build_ssen(const RunConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kSsenStage));
  return SketchEncoder(cfg.dims, cfg.num_classes, cfg.ssen_width, rng);
}

DiffusionModel build_diffusion(const RunConfig& cfg) {
  Rng rng(mix_seed(cfg.seed, kDiffStage));
  return DiffusionModel(cfg.dims, latent_dims(cfg), cfg.num_classes,
                        cfg.latent_channels, cfg.mapper_width, cfg.denoiser_widths,
                        cfg.ssm_state, cfg.blocks_per_stage, cfg.use_cylinder, rng);
}

// Rebuilds the training-time ParamStore (model + optimizer state) so frozen
// consumers can load checkpoints that include optimizer tensors.
template <typename CollectModel>
json load_frozen(const fs::path& path, const RunConfig& cfg, const std::string& stage,
                 CollectModel&& collect_model) {
  ParamStore ps;
  collect_model(ps);
  AdamW opt(tensors_of(ps), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  opt.collect(ps);
  json meta = load_checkpoint(path, ps);
  check_meta(meta, cfg, stage, path);
  freeze(ps);
  return meta;
}

void require_checkpoint(const fs::path& path, const std::string& purpose) {
  check(fs::exists(path),
        "missing " + path.string() + " (" + purpose +
            "); stage order is train-vae, then train-ssen, then train-diffusion");
}

Tensor scene_volume(const VoxelGrid& grid, Index num_classes) {
  Tensor plane = one_hot(grid, num_classes);
  return as_volume(plane, {num_classes, grid.dims.L, grid.dims.W, grid.dims.H});
}

double population_std(const std::vector<Array>& arrays) {
  double sum = 0.0, sq = 0.0;
  Index n = 0;
  for (const Array& a : arrays) {
    sum += a.sum();
    sq += a.square().sum();
    n += a.size();
  }
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  const double var = sq / static_cast<double>(n) - mean * mean;
  return var > 0.0 ? std::sqrt(var) : 0.0;
}

}  // namespace

std::string scene_file(int i) { return "scene_" + index_tag(i) + ".lbl"; }
std::string sketch_file(int i) { return "sketch_" + index_tag(i) + ".pgm"; }
std::string psa_file(int i) { return "psa_" + index_tag(i) + ".pgm"; }

Eigen::VectorXd extract_features(const VoxelGrid& grid, const VaeModel& vae) {
  const Tensor mean = vae.encoder.forward(scene_volume(grid, vae.num_classes)).first;
  const Index cz = mean.extent(0);
  const Index v = mean.size() / cz;
  return MapConstMat(mean.value().data(), cz, v).rowwise().mean();
}

int run_gen_toy(const RunConfig& cfg, std::uint64_t seed, int count) {
  check(count >= 1, "gen-toy: count must be positive");
  const std::vector<std::uint8_t> palette = load_palette(cfg.palette, cfg.num_classes);
  ToySceneParams params;
  params.dims = cfg.dims;
  fs::create_directories(cfg.data_dir);
  for (int i = 0; i < count; ++i) {
    Rng rng(mix_seed(seed, kToyStage, static_cast<std::uint64_t>(i)));
    const VoxelGrid grid = generate_toy_scene(params, rng);
    const Image8 bev = bev_projection(grid);
    const Image8 sketch = sketch_from_bev(bev, palette, cfg.canny_low, cfg.canny_high);
    const fs::path dir = cfg.data_dir;
    save_labels(dir / scene_file(i), grid);
    save_pgm(dir / sketch_file(i), sketch);
    save_pgm(dir / psa_file(i), bev);
  }
  std::cout << "gen-toy: wrote " << count << " scenes to " << cfg.data_dir << "\n";
  return 0;
}

int run_make_sketch(const RunConfig& cfg, const std::vector<std::string>& inputs,
                    const std::string& out_dir) {
  check(!inputs.empty(), "make-sketch: no input files given");
  const std::vector<std::uint8_t> palette = load_palette(cfg.palette, cfg.num_classes);
  fs::create_directories(out_dir);
  int failures = 0;
  for (const std::string& input : inputs) {
    try {
      const VoxelGrid grid = load_labels(input, cfg.dims, cfg.num_classes);
      const Image8 bev = bev_projection(grid);
      const Image8 sketch =
          sketch_from_bev(bev, palette, cfg.canny_low, cfg.canny_high);
      const std::string stem = fs::path(input).stem().string();
      save_pgm(fs::path(out_dir) / (stem + "_sketch.pgm"), sketch);
      save_pgm(fs::path(out_dir) / (stem + "_psa.pgm"), bev);
    } catch (const std::exception& e) {
      std::cerr << "make-sketch: " << input << ": " << e.what() << "\n";
      ++failures;
    }
  }
  if (failures > 0)
    std::cerr << "make-sketch: " << failures << " of " << inputs.size()
              << " inputs failed\n";
  return failures == 0 ? 0 : 1;
}

int run_train_vae(const RunConfig& cfg, int epochs) {
  check(epochs >= 1, "train-vae: epochs must be positive");
  const ToyData data = load_toy_data(cfg, false);
  fs::create_directories(cfg.out_dir);
  const fs::path ckpt = fs::path(cfg.out_dir) / "vae.ckpt";
  const fs::path csv = fs::path(cfg.out_dir) / "vae_loss.csv";

  VaeModel model = build_vae(cfg);
  ParamStore ps;
  model.collect(ps);
  AdamW opt(tensors_of(ps), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  opt.collect(ps);

  int done = 0;
  if (fs::exists(ckpt)) {
    const json meta = load_checkpoint(ckpt, ps);
    check_meta(meta, cfg, "vae", ckpt);
    done = meta.value("epochs_done", 0);
  }
  if (done >= epochs) {
    std::cout << "train-vae: checkpoint already covers " << done << " epochs\n";
    return 0;
  }

  std::vector<Tensor> inputs;
  for (const VoxelGrid& g : data.scenes) inputs.push_back(scene_volume(g, cfg.num_classes));

  const int n = static_cast<int>(data.scenes.size());
  const VaeLossWeights weights;
  for (int epoch = done; epoch < epochs; ++epoch) {
    Rng erng(mix_seed(cfg.seed, kVaeStage, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    erng.shuffle(order);

    double ce = 0.0, lovasz = 0.0, kl = 0.0, total = 0.0;
    const double scale = warmup_cosine_scale(epoch, epochs, cfg.warmup_epochs);
    for (const int idx : order) {
      Tape tape;
      TapeScope scope(tape);
      auto [mean, logvar] = model.encoder.forward(inputs[static_cast<std::size_t>(idx)]);
      Array noise(mean.size());
      for (Index i = 0; i < noise.size(); ++i) noise[i] = erng.normal();
      Tensor z = reparameterize(mean, logvar, Tensor::from_array(mean.shape(), noise));
      Tensor scores = model.decoder.forward(z);
      VaeLossParts parts = vae_loss(scores,
                                    data.scenes[static_cast<std::size_t>(idx)].labels,
                                    mean, logvar, weights);
      tape.backward(parts.total);
      opt.step(scale);
      ce += parts.ce.item();
      lovasz += parts.lovasz.item();
      kl += parts.kl.item();
      total += parts.total.item();
    }
    json meta = base_meta(cfg, "vae", epoch + 1);
    meta["latent_channels"] = cfg.latent_channels;
    meta["vae_width"] = cfg.vae_width;
    save_checkpoint(ckpt, ps, meta);
    append_csv_row(csv, "epoch,ce,lovasz,kl,total",
                   std::to_string(epoch + 1) + "," + fmt(ce / n) + "," + fmt(lovasz / n) +
                       "," + fmt(kl / n) + "," + fmt(total / n));
    std::cout << "train-vae: epoch " << epoch + 1 << "/" << epochs
              << " total " << total / n << "\n";
  }
  return 0;
}

int run_train_ssen(const RunConfig& cfg, int epochs) {
  check(epochs >= 1, "train-ssen: epochs must be positive");
  const ToyData data = load_toy_data(cfg, true);
  fs::create_directories(cfg.out_dir);
  const fs::path ckpt = fs::path(cfg.out_dir) / "ssen.ckpt";
  const fs::path csv = fs::path(cfg.out_dir) / "ssen_loss.csv";

  SketchEncoder model = build_ssen(cfg);
  ParamStore ps;
  model.collect(ps);
  AdamW opt(tensors_of(ps), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  opt.collect(ps);

  int done = 0;
  if (fs::exists(ckpt)) {
    const json meta = load_checkpoint(ckpt, ps);
    check_meta(meta, cfg, "ssen", ckpt);
    done = meta.value("epochs_done", 0);
  }
  if (done >= epochs) {
    std::cout << "train-ssen: checkpoint already covers " << done << " epochs\n";
    return 0;
  }

  const int n = static_cast<int>(data.scenes.size());
  std::vector<Tensor> planes;
  std::vector<std::vector<std::uint16_t>> targets;
  std::vector<std::uint16_t> pooled_all;
  for (int i = 0; i < n; ++i) {
    planes.push_back(conditioning_plane(data.sketches[static_cast<std::size_t>(i)],
                                        data.psas[static_cast<std::size_t>(i)],
                                        cfg.num_classes));
    VoxelGrid pooled =
        majority_pool(data.scenes[static_cast<std::size_t>(i)], kLatentFactor);
    pooled_all.insert(pooled_all.end(), pooled.labels.begin(), pooled.labels.end());
    targets.push_back(std::move(pooled.labels));
  }
  const Tensor class_weights = balanced_class_weights(pooled_all, cfg.num_classes);

  for (int epoch = done; epoch < epochs; ++epoch) {
    Rng erng(mix_seed(cfg.seed, kSsenStage, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    erng.shuffle(order);

    double ce = 0.0;
    const double scale = warmup_cosine_scale(epoch, epochs, cfg.warmup_epochs);
    for (const int idx : order) {
      Tape tape;
      TapeScope scope(tape);
      Tensor scores = model.forward(planes[static_cast<std::size_t>(idx)]);
      Tensor loss = cross_entropy(as_rows(scores),
                                  targets[static_cast<std::size_t>(idx)], &class_weights);
      tape.backward(loss);
      opt.step(scale);
      ce += loss.item();
    }
    json meta = base_meta(cfg, "ssen", epoch + 1);
    meta["ssen_width"] = cfg.ssen_width;
    save_checkpoint(ckpt, ps, meta);
    append_csv_row(csv, "epoch,ce",
                   std::to_string(epoch + 1) + "," + fmt(ce / n));
    std::cout << "train-ssen: epoch " << epoch + 1 << "/" << epochs << " ce " << ce / n
              << "\n";
  }
  return 0;
}

int run_train_diffusion(const RunConfig& cfg, int epochs) {
  check(epochs >= 1, "train-diffusion: epochs must be positive");
  const fs::path vae_ckpt = fs::path(cfg.out_dir) / "vae.ckpt";
  const fs::path ssen_ckpt = fs::path(cfg.out_dir) / "ssen.ckpt";
  require_checkpoint(vae_ckpt, "train-diffusion needs the trained VAE");
  require_checkpoint(ssen_ckpt, "train-diffusion needs the trained sketch encoder");

  VaeModel vae = build_vae(cfg);
  load_frozen(vae_ckpt, cfg, "vae", [&](ParamStore& s) { vae.collect(s); });
  SketchEncoder ssen = build_ssen(cfg);
  load_frozen(ssen_ckpt, cfg, "ssen", [&](ParamStore& s) { ssen.collect(s); });

  const ToyData data = load_toy_data(cfg, true);
  const int n = static_cast<int>(data.scenes.size());

  // Frozen per-scene context: mean latents, conditioning planes, and coarse
  // structure scores. No tape is active, so these stay gradient-free.
  std::vector<Array> means;
  std::vector<Tensor> planes, coarse;
  for (int i = 0; i < n; ++i) {
    const std::size_t si = static_cast<std::size_t>(i);
    means.push_back(
        vae.encoder.forward(scene_volume(data.scenes[si], cfg.num_classes)).first.value());
    planes.push_back(
        conditioning_plane(data.sketches[si], data.psas[si], cfg.num_classes));
    coarse.push_back(ssen.forward(planes.back()));
  }
  const double sd = population_std(means);
  const double latent_scale = sd > 1e-12 ? 1.0 / sd : 1.0;

  fs::create_directories(cfg.out_dir);
  const fs::path ckpt = fs::path(cfg.out_dir) / "diffusion.ckpt";
  const fs::path csv = fs::path(cfg.out_dir) / "diffusion_loss.csv";

  DiffusionModel model = build_diffusion(cfg);
  ParamStore ps;
  model.collect(ps);
  AdamW opt(tensors_of(ps), {cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  opt.collect(ps);

  int done = 0;
  if (fs::exists(ckpt)) {
    const json meta = load_checkpoint(ckpt, ps);
    check_meta(meta, cfg, "diffusion", ckpt);
    done = meta.value("epochs_done", 0);
    const double stored = meta.value("latent_scale", 0.0);
    check(std::abs(stored - latent_scale) <= 1e-9 * std::max(1.0, std::abs(stored)),
          "vae checkpoint changed since diffusion training began");
  }
  if (done >= epochs) {
    std::cout << "train-diffusion: checkpoint already covers " << done << " epochs\n";
    return 0;
  }

  const NoiseSchedule ns =
      NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
  const Shape lshape = latent_shape(cfg);

  for (int epoch = done; epoch < epochs; ++epoch) {
    Rng erng(mix_seed(cfg.seed, kDiffStage, static_cast<std::uint64_t>(epoch)));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    erng.shuffle(order);

    double mse = 0.0;
    const double scale = warmup_cosine_scale(epoch, epochs, cfg.warmup_epochs);
    for (const int idx : order) {
      const std::size_t si = static_cast<std::size_t>(idx);
      const int t = static_cast<int>(erng.uniform_int(1, ns.timesteps));
      Array eps(means[si].size());
      for (Index i = 0; i < eps.size(); ++i) eps[i] = erng.normal();
      const Array x0 = means[si] * latent_scale;

      Tape tape;
      TapeScope scope(tape);
      Tensor x_t = Tensor::from_array(lshape, q_sample(x0, ns, t, eps));
      Tensor cond = model.conditioning(planes[si], coarse[si]);
      Tensor pred = model.denoiser.forward(x_t, cond, t,
                                           static_cast<std::uint64_t>(epoch));
      Tensor loss = mean_all(square(sub(pred, Tensor::from_array(lshape, eps))));
      tape.backward(loss);
      opt.step(scale);
      mse += loss.item();
    }
    json meta = base_meta(cfg, "diffusion", epoch + 1);
    meta["latent_scale"] = latent_scale;
    meta["use_cylinder"] = cfg.use_cylinder;
    meta["timesteps"] = cfg.timesteps;
    meta["vae_digest"] = file_digest(vae_ckpt);
    meta["ssen_digest"] = file_digest(ssen_ckpt);
    save_checkpoint(ckpt, ps, meta);
    append_csv_row(csv, "epoch,mse",
                   std::to_string(epoch + 1) + "," + fmt(mse / n));
    std::cout << "train-diffusion: epoch " << epoch + 1 << "/" << epochs << " mse "
              << mse / n << "\n";
  }
  return 0;
}

int run_sample(const RunConfig& cfg, const std::vector<ConditionPaths>& conditions,
               const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  check(!conditions.empty(), "sample: no conditions given");
  check(!seeds.empty(), "sample: no seeds given");
  const fs::path vae_ckpt = fs::path(cfg.out_dir) / "vae.ckpt";
  const fs::path ssen_ckpt = fs::path(cfg.out_dir) / "ssen.ckpt";
  const fs::path diff_ckpt = fs::path(cfg.out_dir) / "diffusion.ckpt";
  require_checkpoint(vae_ckpt, "sample needs the trained VAE");
  require_checkpoint(ssen_ckpt, "sample needs the trained sketch encoder");
  require_checkpoint(diff_ckpt, "sample needs the trained denoiser");

  VaeModel vae = build_vae(cfg);
  load_frozen(vae_ckpt, cfg, "vae", [&](ParamStore& s) { vae.collect(s); });
  SketchEncoder ssen = build_ssen(cfg);
  load_frozen(ssen_ckpt, cfg, "ssen", [&](ParamStore& s) { ssen.collect(s); });
  DiffusionModel model = build_diffusion(cfg);
  const json meta =
      load_frozen(diff_ckpt, cfg, "diffusion", [&](ParamStore& s) { model.collect(s); });
  const double latent_scale = meta.value("latent_scale", 1.0);
  check(meta.value("timesteps", cfg.timesteps) == cfg.timesteps,
        "config timesteps differ from the trained schedule");

  const NoiseSchedule ns =
      NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
  const Shape lshape = latent_shape(cfg);
  const std::string digest = file_digest(diff_ckpt);

  fs::create_directories(out_dir);
  std::ofstream manifest(fs::path(out_dir) / "manifest.jsonl", std::ios::trunc);
  if (!manifest.good()) throw std::runtime_error("cannot write manifest in " + out_dir);

  for (std::size_t ci = 0; ci < conditions.size(); ++ci) {
    const ConditionPaths& cond_paths = conditions[ci];
    const ConditionPair pair =
        read_condition_pair(cond_paths.sketch, cond_paths.psa, cfg.num_classes);
    check(pair.sketch.rows == cfg.dims.L && pair.sketch.cols == cfg.dims.W,
          cond_paths.sketch + " extents do not match config dims");
    const Tensor plane = conditioning_plane(pair.sketch, pair.psa, cfg.num_classes);
    const Tensor cond = model.conditioning(plane, ssen.forward(plane));

    for (const std::uint64_t seed : seeds) {
      Rng rng(mix_seed(seed, kSampleStage, static_cast<std::uint64_t>(ci)));
      Array latent = p_sample_loop(model, cond, ns, lshape, rng);
      latent /= latent_scale;
      const Tensor scores = vae.decoder.forward(Tensor::from_array(lshape, latent));
      const VoxelGrid grid = argmax_grid(as_rows(scores), cfg.dims);
      const std::string name =
          "sample_c" + index_tag(static_cast<int>(ci)) + "_s" + std::to_string(seed) +
          ".lbl";
      save_labels(fs::path(out_dir) / name, grid);
      json line;
      line["seed"] = seed;
      line["sketch"] = cond_paths.sketch;
      line["psa"] = cond_paths.psa;
      line["output"] = name;
      line["checkpoint_hash"] = digest;
      manifest << line.dump() << "\n";
    }
  }
  std::cout << "sample: wrote " << conditions.size() * seeds.size() << " scenes to "
            << out_dir << "\n";
  return 0;
}

int run_evaluate(const RunConfig& cfg, const std::string& real_dir,
                 const std::string& gen_dir, std::ostream& out) {
  VaeModel vae = build_vae(cfg);
  const fs::path vae_ckpt = fs::path(cfg.out_dir) / "vae.ckpt";
  require_checkpoint(vae_ckpt, "evaluate needs the trained VAE");
  load_frozen(vae_ckpt, cfg, "vae", [&](ParamStore& s) { vae.collect(s); });

  auto list_labels = [](const std::string& dir) {
    check(fs::is_directory(dir), "evaluate: " + dir + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".lbl")
        files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    check(files.size() >= 2, "evaluate: " + dir + " needs at least two .lbl files");
    return files;
  };
  const std::vector<fs::path> real_files = list_labels(real_dir);
  const std::vector<fs::path> gen_files = list_labels(gen_dir);

  auto features = [&](const std::vector<fs::path>& files,
                      std::vector<VoxelGrid>& grids) {
    Eigen::MatrixXd rows(static_cast<Index>(files.size()), cfg.latent_channels);
    for (std::size_t i = 0; i < files.size(); ++i) {
      grids.push_back(load_labels(files[i], cfg.dims, cfg.num_classes));
      rows.row(static_cast<Index>(i)) = extract_features(grids.back(), vae).transpose();
    }
    return rows;
  };
  std::vector<VoxelGrid> real_grids, gen_grids;
  const Eigen::MatrixXd real_rows = features(real_files, real_grids);
  const Eigen::MatrixXd gen_rows = features(gen_files, gen_grids);

  const double fid = frechet_distance(real_rows, gen_rows);
  double bandwidth = 0.0;
  const double mmd = mmd2(real_rows, gen_rows, std::nullopt, &bandwidth);

  // Scene-level pairing by sorted file order; the stacked grids turn the
  // per-class counts into dataset-level totals.
  const std::size_t pairs = std::min(real_grids.size(), gen_grids.size());
  VoxelGrid real_stack, gen_stack;
  real_stack.dims = Dims{cfg.dims.L * static_cast<Index>(pairs), cfg.dims.W, cfg.dims.H};
  gen_stack.dims = real_stack.dims;
  for (std::size_t i = 0; i < pairs; ++i) {
    real_stack.labels.insert(real_stack.labels.end(), real_grids[i].labels.begin(),
                             real_grids[i].labels.end());
    gen_stack.labels.insert(gen_stack.labels.end(), gen_grids[i].labels.begin(),
                            gen_grids[i].labels.end());
  }
  const IouReport iou = evaluate_iou(gen_stack, real_stack, cfg.num_classes);

  json report;
  report["fid"] = fid;
  report["mmd"] = mmd;
  report["iou"] = iou.occupancy_iou;
  report["miou"] = iou.miou;
  json per_class = json::array();
  for (std::size_t c = 0; c < iou.per_class.size(); ++c)
    per_class.push_back(iou.class_present[c] ? json(iou.per_class[c]) : json(nullptr));
  report["per_class_iou"] = per_class;
  report["m"] = pairs;
  report["d"] = cfg.latent_channels;
  report["bandwidth"] = bandwidth;
  out << report.dump(2) << "\n";
  return 0;
}

}  // namespace cymba
