#include "cymba/ssen.hpp"

namespace cymba {

namespace {
using detail::check;
}

SketchEncoder::SketchEncoder(const Dims& dims, Index classes, Index width, Rng& rng)
    : full_dims(dims), num_classes(classes) {
  check(dims.L % kLatentFactor == 0 && dims.W % kLatentFactor == 0 &&
            dims.H % kLatentFactor == 0,
        "SketchEncoder: extents must be divisible by the latent factor");
  const Index in = 1 + classes;
  const Index mid = width * 3 / 2;
  mix = Conv3(in, width, {1, 1, 1}, rng);
  down1 = Conv3(width, width, {2, 2, 2}, rng, {2, 2, 2});
  norm1 = ChannelNorm3(width);
  ms = MultiConvBlock(width, rng);
  down2 = Conv3(width, mid, {2, 2, 2}, rng, {2, 2, 2});
  norm2 = ChannelNorm3(mid);
  ddr = DdrBlock(mid, mid, 3, 1, rng);
  head = Conv3(mid, classes, {1, 1, 1}, rng);
}

Tensor SketchEncoder::forward(const Tensor& plane) const {
  check(plane.rank() == 2 && plane.extent(0) == 1 + num_classes &&
            plane.extent(1) == full_dims.L * full_dims.W,
        "SketchEncoder: conditioning plane shape mismatch");
  Tensor vol = lift_columns(plane, full_dims.L, full_dims.W, full_dims.H);
  Tensor h = relu(mix.forward(vol));
  h = relu(norm1.forward(down1.forward(h)));
  h = ms.forward(h);
  h = relu(norm2.forward(down2.forward(h)));
  h = relu(ddr.forward(h));
  return head.forward(h);
}

void SketchEncoder::collect(ParamStore& ps) const {
  mix.collect(ps, "mix");
  down1.collect(ps, "down1");
  norm1.collect(ps, "norm1");
  ms.collect(ps, "ms");
  down2.collect(ps, "down2");
  norm2.collect(ps, "norm2");
  ddr.collect(ps, "ddr");
  head.collect(ps, "head");
}

Tensor conditioning_plane(const Image8& sketch, const Image8& semantic_map,
                          Index num_classes) {
  check(sketch.rows == semantic_map.rows && sketch.cols == semantic_map.cols,
        "conditioning_plane: image extents differ");
  const Index V = sketch.rows * sketch.cols;
  Array data = Array::Zero((1 + num_classes) * V);
  for (Index v = 0; v < V; ++v)
    data[v] = sketch.pixels[static_cast<size_t>(v)] != 0 ? 1.0 : 0.0;
  for (Index v = 0; v < V; ++v) {
    const std::uint8_t y = semantic_map.pixels[static_cast<size_t>(v)];
    check(y < num_classes, "conditioning_plane: semantic label out of range");
    data[(1 + y) * V + v] = 1.0;
  }
  return Tensor::from_array({1 + num_classes, V}, std::move(data));
}

VoxelGrid majority_pool(const VoxelGrid& grid, Index factor) {
  check(factor >= 1, "majority_pool: factor must be positive");
  const Dims& d = grid.dims;
  check(d.L % factor == 0 && d.W % factor == 0 && d.H % factor == 0,
        "majority_pool: extents must divide by the pooling factor");
  const Dims out_dims{d.L / factor, d.W / factor, d.H / factor};
  VoxelGrid out = make_grid(out_dims);
  std::vector<Index> counts;
  for (Index x = 0; x < out_dims.L; ++x)
    for (Index y = 0; y < out_dims.W; ++y)
      for (Index z = 0; z < out_dims.H; ++z) {
        counts.assign(65536, 0);
        Index max_label = 0;
        for (Index dx = 0; dx < factor; ++dx)
          for (Index dy = 0; dy < factor; ++dy)
            for (Index dz = 0; dz < factor; ++dz) {
              const std::uint16_t v =
                  grid.at(x * factor + dx, y * factor + dy, z * factor + dz);
              ++counts[v];
              if (v > max_label) max_label = v;
            }
        Index best = 0;
        for (Index c = 1; c <= max_label; ++c)
          if (counts[static_cast<size_t>(c)] > counts[static_cast<size_t>(best)]) best = c;
        out.at(x, y, z) = static_cast<std::uint16_t>(best);
      }
  return out;
}

Tensor balanced_class_weights(const std::vector<std::uint16_t>& labels, Index num_classes) {
  std::vector<Index> counts(static_cast<size_t>(num_classes), 0);
  for (std::uint16_t y : labels) {
    check(y < num_classes, "balanced_class_weights: label out of range");
    ++counts[y];
  }
  Array w = Array::Zero(num_classes);
  const double total = static_cast<double>(labels.size());
  for (Index c = 0; c < num_classes; ++c)
    if (counts[static_cast<size_t>(c)] > 0)
      w[c] = total / (static_cast<double>(num_classes) *
                      static_cast<double>(counts[static_cast<size_t>(c)]));
  return Tensor::from_array({num_classes}, std::move(w));
}

}  // namespace cymba
