#pragma once

#include "cymba/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cymba {

struct Dims {
  Index L = 0;  // x extent
  Index W = 0;  // y extent
  Index H = 0;  // z extent (vertical)

  Index volume() const { return L * W * H; }
  bool operator==(const Dims&) const = default;
};

// Flat layout: x-major, z-innermost.
inline Index voxel_flat(const Dims& d, Index x, Index y, Index z) {
  return (x * d.W + y) * d.H + z;
}

// Dense semantic label grid. Label 0 is empty space.
struct VoxelGrid {
  Dims dims;
  std::vector<std::uint16_t> labels;

  std::uint16_t at(Index x, Index y, Index z) const {
    return labels[static_cast<size_t>(voxel_flat(dims, x, y, z))];
  }
  std::uint16_t& at(Index x, Index y, Index z) {
    return labels[static_cast<size_t>(voxel_flat(dims, x, y, z))];
  }
};

VoxelGrid make_grid(const Dims& d, std::uint16_t fill = 0);

// Headerless little-endian u16 label files; size must equal L*W*H*2 bytes.
// num_classes > 0 additionally rejects any label >= num_classes.
VoxelGrid load_labels(const std::filesystem::path& path, const Dims& dims,
                      Index num_classes = 0);
void save_labels(const std::filesystem::path& path, const VoxelGrid& grid);

// 8-bit grayscale raster, row-major (rows x cols).
struct Image8 {
  Index rows = 0;
  Index cols = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(Index r, Index c) const {
    return pixels[static_cast<size_t>(r * cols + c)];
  }
  std::uint8_t& at(Index r, Index c) {
    return pixels[static_cast<size_t>(r * cols + c)];
  }
};

// Binary PGM (P5), maxval 255.
Image8 load_pgm(const std::filesystem::path& path);
void save_pgm(const std::filesystem::path& path, const Image8& img);

// Paired conditioning images: a binary edge sketch plus a semantic class
// map of identical extents.
struct ConditionPair {
  Image8 sketch;  // values exactly 0 or 255
  Image8 psa;     // class ids, all < num_classes
};

// Loads and validates both images: extents must agree, the sketch must be
// strictly binary, and every psa value must name a class.
ConditionPair read_condition_pair(const std::filesystem::path& sketch_path,
                                  const std::filesystem::path& psa_path,
                                  Index num_classes);

// Bird's-eye-view projection: pixel (x, y) takes the label of the highest
// occupied voxel in that column, or 0 when the column is empty.
Image8 bev_projection(const VoxelGrid& grid);

// One-hot encoding of labels, shape (C, V); requires all labels < C.
Tensor one_hot(const VoxelGrid& grid, Index num_classes);
// One-hot encoding of a 2-D label image, shape (C, rows*cols).
Tensor one_hot(const Image8& img, Index num_classes);

// Argmax decode of per-voxel class scores (C, V) back onto a grid.
// Ties resolve to the smallest class id.
VoxelGrid argmax_grid(const Tensor& scores, const Dims& dims);

}  // namespace cymba
