#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include "cymba/canny.hpp"
#include "cymba/rng.hpp"
#include "cymba/toygen.hpp"
#include "cymba/voxel.hpp"

using namespace cymba;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("cymba_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

VoxelGrid random_grid(const Dims& d, Index num_classes, Rng& rng) {
  VoxelGrid g = make_grid(d);
  for (auto& v : g.labels)
    v = static_cast<std::uint16_t>(rng.uniform_int(0, num_classes - 1));
  return g;
}

}  // namespace

TEST_CASE("label bytes decode little-endian with z innermost") {
  TempDir tmp;
  const fs::path p = tmp.path / "grid.lbl";
  const unsigned char bytes[] = {0x01, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00};
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes), 8);
  VoxelGrid g = load_labels(p, {2, 2, 1});
  CHECK(g.labels == std::vector<std::uint16_t>{1, 0, 2, 0});
  CHECK(g.at(0, 0, 0) == 1);
  CHECK(g.at(1, 0, 0) == 2);
}

TEST_CASE("label files round-trip byte-exactly") {
  TempDir tmp;
  Rng rng(41);
  VoxelGrid g = random_grid({5, 4, 3}, 260, rng);  // u16 range beyond one byte
  const fs::path p = tmp.path / "grid.lbl";
  save_labels(p, g);
  VoxelGrid back = load_labels(p, g.dims);
  CHECK(back.labels == g.labels);
  save_labels(tmp.path / "again.lbl", back);
  std::ifstream a(p, std::ios::binary), b(tmp.path / "again.lbl", std::ios::binary);
  std::string sa((std::istreambuf_iterator<char>(a)), {});
  std::string sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);
}

TEST_CASE("an all-zero file is an empty scene") {
  TempDir tmp;
  const fs::path p = tmp.path / "zero.lbl";
  std::ofstream(p, std::ios::binary) << std::string(2 * 3 * 2 * 2, '\0');
  VoxelGrid g = load_labels(p, {3, 2, 2});
  for (auto v : g.labels) CHECK(v == 0);
}

TEST_CASE("wrong file length reports expected and actual") {
  TempDir tmp;
  const fs::path p = tmp.path / "short.lbl";
  std::ofstream(p, std::ios::binary) << std::string(6, '\0');
  CHECK_THROWS_WITH_AS(load_labels(p, {2, 2, 1}), doctest::Contains("8"),
                       std::invalid_argument);
}

TEST_CASE("out-of-range labels name the offending voxel") {
  TempDir tmp;
  VoxelGrid g = make_grid({2, 2, 2});
  g.labels = {0, 1, 2, 3, 9, 0, 1, 2};
  const fs::path p = tmp.path / "bad.lbl";
  save_labels(p, g);
  CHECK_NOTHROW(load_labels(p, g.dims));
  CHECK_THROWS_WITH_AS(load_labels(p, g.dims, 4), doctest::Contains("voxel 4"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(load_labels(p, g.dims, 4), doctest::Contains("9"),
                       std::invalid_argument);
  CHECK_NOTHROW(load_labels(p, g.dims, 10));
}

TEST_CASE("bev takes the top-most occupied label per column") {
  Dims d{4, 4, 6};
  VoxelGrid g = make_grid(d);
  g.at(2, 1, 0) = 5;
  Image8 single = bev_projection(g);
  for (Index x = 0; x < 4; ++x)
    for (Index y = 0; y < 4; ++y)
      CHECK(single.at(x, y) == (x == 2 && y == 1 ? 5 : 0));

  g.at(2, 1, 1) = 3;
  g.at(2, 1, 4) = 7;
  CHECK(bev_projection(g).at(2, 1) == 7);
}

TEST_CASE("bev equals the brute-force column scan on random grids") {
  Rng rng(42);
  for (int it = 0; it < 10; ++it) {
    Dims d{rng.uniform_int(1, 6), rng.uniform_int(1, 6), rng.uniform_int(1, 5)};
    VoxelGrid g = random_grid(d, 8, rng);
    Image8 bev = bev_projection(g);
    for (Index x = 0; x < d.L; ++x)
      for (Index y = 0; y < d.W; ++y) {
        std::uint8_t want = 0;
        for (Index z = 0; z < d.H; ++z)
          if (g.at(x, y, z) != 0) want = static_cast<std::uint8_t>(g.at(x, y, z));
        CHECK(bev.at(x, y) == want);
      }
  }
}

TEST_CASE("bev ignores voxels hidden below the surface") {
  Dims d{3, 3, 4};
  VoxelGrid g = make_grid(d);
  g.at(1, 1, 2) = 4;
  Image8 before = bev_projection(g);
  g.at(1, 1, 0) = 6;  // occupied below the existing top stays invisible
  g.at(1, 1, 1) = 2;
  CHECK(bev_projection(g).pixels == before.pixels);
}

TEST_CASE("a constant image has no edges") {
  std::vector<double> gray(20 * 20, 113.0);
  Image8 edges = canny(gray, 20, 20, 50.0, 100.0);
  for (auto v : edges.pixels) CHECK(v == 0);
}

TEST_CASE("a half-plane step yields one thin vertical edge line") {
  const Index rows = 16, cols = 16;
  std::vector<double> gray(rows * cols, 0.0);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 8; c < cols; ++c) gray[r * cols + c] = 100.0;
  Image8 edges = canny(gray, rows, cols, 20.0, 60.0);
  // Every row crosses the step exactly once: one marked pixel per row, all
  // in the same column.
  Index col_hit = -1;
  for (Index r = 2; r < rows - 2; ++r) {
    Index count = 0, where = -1;
    for (Index c = 0; c < cols; ++c)
      if (edges.at(r, c) != 0) {
        ++count;
        where = c;
      }
    CHECK(count == 1);
    if (col_hit < 0) col_hit = where;
    CHECK(where == col_hit);
  }
  CHECK((col_hit == 7 || col_hit == 8));
}

TEST_CASE("edge maps are binary and shift-invariant in the input") {
  Rng rng(43);
  Dims d{16, 16, 4};
  VoxelGrid g = random_grid(d, 6, rng);
  Image8 bev = bev_projection(g);
  std::vector<double> gray(bev.pixels.size()), shifted(bev.pixels.size());
  for (size_t i = 0; i < gray.size(); ++i) {
    gray[i] = 30.0 * bev.pixels[i];
    shifted[i] = gray[i] + 17.0;
  }
  Image8 a = canny(gray, d.L, d.W, 50.0, 100.0);
  Image8 b = canny(shifted, d.L, d.W, 50.0, 100.0);
  CHECK(a.pixels == b.pixels);
  for (auto v : a.pixels) CHECK((v == 0 || v == 255));
}

TEST_CASE("pgm files round-trip") {
  TempDir tmp;
  Rng rng(44);
  Image8 img{7, 5, {}};
  img.pixels.resize(35);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  const fs::path p = tmp.path / "img.pgm";
  save_pgm(p, img);
  Image8 back = load_pgm(p);
  CHECK(back.rows == 7);
  CHECK(back.cols == 5);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("condition pairs enforce their invariants") {
  TempDir tmp;
  Image8 sketch{8, 8, std::vector<std::uint8_t>(64, 0)};
  sketch.pixels[10] = 255;
  Image8 psa{8, 8, std::vector<std::uint8_t>(64, 3)};
  save_pgm(tmp.path / "sketch.pgm", sketch);
  save_pgm(tmp.path / "psa.pgm", psa);
  ConditionPair pair = read_condition_pair(tmp.path / "sketch.pgm",
                                           tmp.path / "psa.pgm", 8);
  CHECK(pair.sketch.pixels == sketch.pixels);
  CHECK(pair.psa.pixels == psa.pixels);

  Image8 small{4, 4, std::vector<std::uint8_t>(16, 0)};
  save_pgm(tmp.path / "small.pgm", small);
  CHECK_THROWS_WITH_AS(
      read_condition_pair(tmp.path / "sketch.pgm", tmp.path / "small.pgm", 8),
      doctest::Contains("extents differ"), std::invalid_argument);

  Image8 gray = sketch;
  gray.pixels[3] = 7;
  save_pgm(tmp.path / "gray.pgm", gray);
  CHECK_THROWS_WITH_AS(
      read_condition_pair(tmp.path / "gray.pgm", tmp.path / "psa.pgm", 8),
      doctest::Contains("0 or 255"), std::invalid_argument);

  CHECK_THROWS_AS(read_condition_pair(tmp.path / "sketch.pgm", tmp.path / "psa.pgm", 3),
                  std::invalid_argument);

  std::ofstream(tmp.path / "not.pgm") << "P2\n4 4\n255\n";
  CHECK_THROWS(read_condition_pair(tmp.path / "not.pgm", tmp.path / "psa.pgm", 8));
}

TEST_CASE("one-hot and argmax invert each other") {
  Rng rng(45);
  Dims d{4, 3, 2};
  VoxelGrid g = random_grid(d, 5, rng);
  Tensor oh = one_hot(g, 5);
  REQUIRE(oh.shape() == Shape{5, d.volume()});
  for (Index v = 0; v < d.volume(); ++v) {
    double col_sum = 0.0;
    for (Index c = 0; c < 5; ++c) col_sum += oh.value()[c * d.volume() + v];
    CHECK(col_sum == 1.0);
  }
  VoxelGrid back = argmax_grid(oh, d);
  CHECK(back.labels == g.labels);

  VoxelGrid bad = g;
  bad.labels[0] = 9;
  CHECK_THROWS_AS(one_hot(bad, 5), std::invalid_argument);
}

TEST_CASE("toy scenes are deterministic and within their layout budget") {
  ToySceneParams params;
  params.dims = {32, 32, 8};
  Rng rng_a(7), rng_b(7);
  VoxelGrid a = generate_toy_scene(params, rng_a);
  VoxelGrid b = generate_toy_scene(params, rng_b);
  CHECK(a.labels == b.labels);

  std::map<std::uint16_t, Index> hist;
  for (auto v : a.labels) ++hist[v];
  // Ground fills z = 0 wherever roads, sidewalks, or cars do not sit on it.
  const Index plane = params.dims.L * params.dims.W;
  CHECK(hist[toy_class::kGround] + hist[toy_class::kRoad] +
            hist[toy_class::kSidewalk] >=
        plane - static_cast<Index>(hist[toy_class::kBuilding]) -
            hist[toy_class::kTree] - hist[toy_class::kPole]);
  // Roads exist and are bounded by the widest possible strips.
  CHECK(hist[toy_class::kRoad] >= params.road_width_min * params.dims.L);
  CHECK(hist[toy_class::kRoad] <=
        params.roads_max * params.road_width_max * (params.dims.L + params.dims.W));
  for (auto v : a.labels) CHECK(v < 8);
}

TEST_CASE("toy features stand on legal footprints") {
  ToySceneParams params;
  Rng rng(9);
  VoxelGrid g = generate_toy_scene(params, rng);
  const Dims& d = params.dims;
  for (Index x = 0; x < d.L; ++x)
    for (Index y = 0; y < d.W; ++y) {
      const std::uint16_t base = g.at(x, y, 0);
      for (Index z = 1; z < d.H; ++z) {
        const std::uint16_t v = g.at(x, y, z);
        if (v == toy_class::kBuilding || v == toy_class::kPole ||
            v == toy_class::kTree)
          CHECK(base != toy_class::kRoad);
        if (v == toy_class::kCar) CHECK(base == toy_class::kRoad);
      }
    }
}
