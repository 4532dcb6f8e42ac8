#pragma once

#include "cymba/blocks.hpp"
#include "cymba/vae.hpp"

namespace cymba {

// Sketch-and-semantics encoder: lifts a plane of sketch + semantic-map
// channels into a volume, then runs multi-scale convolutions down to the
// latent resolution, producing per-voxel class scores there.
struct SketchEncoder {
  Dims full_dims;
  Index num_classes = 0;

  Conv3 mix;        // 1x1x1 over the lifted channels
  Conv3 down1;      // stride 2
  ChannelNorm3 norm1;
  MultiConvBlock ms;
  Conv3 down2;      // stride 2
  ChannelNorm3 norm2;
  DdrBlock ddr;
  Conv3 head;       // 1x1x1 -> num_classes

  SketchEncoder() = default;
  SketchEncoder(const Dims& full_dims, Index num_classes, Index width, Rng& rng);

  // plane: (1 + num_classes, L*W) sketch channel plus one-hot semantic map.
  // Returns scores (num_classes, L/4, W/4, H/4).
  Tensor forward(const Tensor& plane) const;
  void collect(ParamStore& ps) const;
};

// Conditioning plane from a sketch image ({0,255}) and a semantic map image
// (class ids): shape (1 + num_classes, L*W).
Tensor conditioning_plane(const Image8& sketch, const Image8& semantic_map,
                          Index num_classes);

// Majority label of each factor-sized block (ties to the smaller id), for
// supervising latent-resolution scores with a full-resolution grid.
VoxelGrid majority_pool(const VoxelGrid& grid, Index factor);

// Inverse-frequency class weights over a label field: weight_c =
// total / (num_classes * count_c) for present classes, 0 for absent ones.
Tensor balanced_class_weights(const std::vector<std::uint16_t>& labels, Index num_classes);

}  // namespace cymba
