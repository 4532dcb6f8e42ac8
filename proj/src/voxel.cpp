#include "cymba/voxel.hpp"

#include <cctype>
#include <fstream>
#include <string>

namespace cymba {

namespace {
using detail::check;

void check_dims(const Dims& d) {
  check(d.L > 0 && d.W > 0 && d.H > 0, "voxel grid extents must be positive");
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

VoxelGrid make_grid(const Dims& d, std::uint16_t fill) {
  check_dims(d);
  return VoxelGrid{d, std::vector<std::uint16_t>(static_cast<size_t>(d.volume()), fill)};
}

VoxelGrid load_labels(const std::filesystem::path& path, const Dims& dims,
                      Index num_classes) {
  check_dims(dims);
  std::ifstream in = open_in(path);
  in.seekg(0, std::ios::end);
  const auto bytes = static_cast<std::uint64_t>(in.tellg());
  const auto expect = static_cast<std::uint64_t>(dims.volume()) * 2;
  if (bytes != expect)
    throw std::invalid_argument("label file " + path.string() + " holds " +
                                std::to_string(bytes) + " bytes, expected " +
                                std::to_string(expect));
  in.seekg(0);
  VoxelGrid grid = make_grid(dims);
  std::vector<unsigned char> raw(static_cast<size_t>(bytes));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw std::runtime_error("short read on " + path.string());
  for (size_t i = 0; i < grid.labels.size(); ++i)
    grid.labels[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
  if (num_classes > 0)
    for (size_t i = 0; i < grid.labels.size(); ++i)
      check(grid.labels[i] < num_classes,
            path.string() + " voxel " + std::to_string(i) + " holds label " +
                std::to_string(grid.labels[i]) + " >= num_classes " +
                std::to_string(num_classes));
  return grid;
}

void save_labels(const std::filesystem::path& path, const VoxelGrid& grid) {
  check_dims(grid.dims);
  check(grid.labels.size() == static_cast<size_t>(grid.dims.volume()),
        "grid label count does not match dims");
  std::ofstream out = open_out(path);
  std::vector<unsigned char> raw(grid.labels.size() * 2);
  for (size_t i = 0; i < grid.labels.size(); ++i) {
    raw[2 * i] = static_cast<unsigned char>(grid.labels[i] & 0xff);
    raw[2 * i + 1] = static_cast<unsigned char>(grid.labels[i] >> 8);
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

namespace {

int pgm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      if (!tok.empty()) return 0;
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok.empty() ? -1 : 0;
}

}  // namespace

Image8 load_pgm(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::string tok;
  if (pgm_next_token(in, tok) != 0 || tok != "P5")
    throw std::invalid_argument(path.string() + " is not a binary PGM (P5)");
  long vals[3];
  for (long& v : vals) {
    if (pgm_next_token(in, tok) != 0)
      throw std::invalid_argument("truncated PGM header in " + path.string());
    v = std::stol(tok);
  }
  const long w = vals[0], h = vals[1], maxval = vals[2];
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw std::invalid_argument("unsupported PGM header in " + path.string());
  Image8 img{h, w, std::vector<std::uint8_t>(static_cast<size_t>(w * h))};
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw std::runtime_error("short read on " + path.string());
  return img;
}

void save_pgm(const std::filesystem::path& path, const Image8& img) {
  check(img.rows > 0 && img.cols > 0, "empty image");
  check(img.pixels.size() == static_cast<size_t>(img.rows * img.cols),
        "image pixel count does not match extents");
  std::ofstream out = open_out(path);
  out << "P5\n" << img.cols << " " << img.rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw std::runtime_error("short write on " + path.string());
}

ConditionPair read_condition_pair(const std::filesystem::path& sketch_path,
                                  const std::filesystem::path& psa_path,
                                  Index num_classes) {
  ConditionPair pair{load_pgm(sketch_path), load_pgm(psa_path)};
  check(pair.sketch.rows == pair.psa.rows && pair.sketch.cols == pair.psa.cols,
        "condition pair extents differ: " + sketch_path.string() + " is " +
            std::to_string(pair.sketch.rows) + "x" + std::to_string(pair.sketch.cols) +
            ", " + psa_path.string() + " is " + std::to_string(pair.psa.rows) + "x" +
            std::to_string(pair.psa.cols));
  for (const std::uint8_t v : pair.sketch.pixels)
    check(v == 0 || v == 255,
          sketch_path.string() + " holds value " + std::to_string(v) +
              "; sketches must be strictly 0 or 255");
  for (const std::uint8_t v : pair.psa.pixels)
    check(v < num_classes, psa_path.string() + " holds class id " + std::to_string(v) +
                               " >= num_classes " + std::to_string(num_classes));
  return pair;
}

Image8 bev_projection(const VoxelGrid& grid) {
  check_dims(grid.dims);
  const Dims& d = grid.dims;
  Image8 img{d.L, d.W, std::vector<std::uint8_t>(static_cast<size_t>(d.L * d.W), 0)};
  for (Index x = 0; x < d.L; ++x)
    for (Index y = 0; y < d.W; ++y)
      for (Index z = d.H - 1; z >= 0; --z) {
        const std::uint16_t v = grid.at(x, y, z);
        if (v != 0) {
          check(v <= 255, "label does not fit an 8-bit projection");
          img.at(x, y) = static_cast<std::uint8_t>(v);
          break;
        }
      }
  return img;
}

Tensor one_hot(const VoxelGrid& grid, Index num_classes) {
  const Index V = grid.dims.volume();
  Array data = Array::Zero(num_classes * V);
  for (Index v = 0; v < V; ++v) {
    const std::uint16_t y = grid.labels[static_cast<size_t>(v)];
    check(y < num_classes, "label id out of range for one-hot");
    data[y * V + v] = 1.0;
  }
  return Tensor::from_array({num_classes, V}, std::move(data));
}

Tensor one_hot(const Image8& img, Index num_classes) {
  const Index V = img.rows * img.cols;
  Array data = Array::Zero(num_classes * V);
  for (Index v = 0; v < V; ++v) {
    const std::uint8_t y = img.pixels[static_cast<size_t>(v)];
    check(y < num_classes, "pixel id out of range for one-hot");
    data[y * V + v] = 1.0;
  }
  return Tensor::from_array({num_classes, V}, std::move(data));
}

VoxelGrid argmax_grid(const Tensor& scores, const Dims& dims) {
  check(scores.rank() == 2, "argmax_grid: scores must be (C,V)");
  const Index C = scores.extent(0);
  const Index V = scores.extent(1);
  check(V == dims.volume(), "argmax_grid: voxel count mismatch");
  VoxelGrid grid = make_grid(dims);
  const double* s = scores.value().data();
  for (Index v = 0; v < V; ++v) {
    Index best = 0;
    double best_v = s[v];
    for (Index c = 1; c < C; ++c) {
      const double cv = s[c * V + v];
      if (cv > best_v) {
        best_v = cv;
        best = c;
      }
    }
    grid.labels[static_cast<size_t>(v)] = static_cast<std::uint16_t>(best);
  }
  return grid;
}

}  // namespace cymba
