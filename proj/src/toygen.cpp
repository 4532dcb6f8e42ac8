#include "cymba/toygen.hpp"

#include <algorithm>

namespace cymba {

namespace {

int clamp_height(int h, const Dims& dims) {
  return std::min<int>(h, static_cast<int>(dims.H) - 1);
}

bool column_empty(const VoxelGrid& g, Index x, Index y, int z_lo, int z_hi) {
  for (int z = z_lo; z <= z_hi; ++z)
    if (g.at(x, y, z) != 0) return false;
  return true;
}

bool footprint_free(const VoxelGrid& g, Index x0, Index y0, Index sx, Index sy,
                    bool allow_road) {
  for (Index x = x0; x < x0 + sx; ++x)
    for (Index y = y0; y < y0 + sy; ++y) {
      const std::uint16_t base = g.at(x, y, 0);
      if (!allow_road && base == toy_class::kRoad) return false;
      if (!column_empty(g, x, y, 1, static_cast<int>(g.dims.H) - 1)) return false;
    }
  return true;
}

void fill_box(VoxelGrid& g, Index x0, Index y0, Index sx, Index sy, int z_lo,
              int z_hi, std::uint16_t cls) {
  for (Index x = x0; x < x0 + sx; ++x)
    for (Index y = y0; y < y0 + sy; ++y)
      for (int z = z_lo; z <= z_hi; ++z) g.at(x, y, z) = cls;
}

void place_roads(VoxelGrid& g, const ToySceneParams& p, Rng& rng) {
  const Index L = g.dims.L, W = g.dims.W;
  const int n = static_cast<int>(rng.uniform_int(p.roads_min, p.roads_max));
  for (int i = 0; i < n; ++i) {
    const int width = static_cast<int>(rng.uniform_int(p.road_width_min, p.road_width_max));
    const bool along_x = rng.uniform_int(0, 1) == 0;
    const Index span = along_x ? W : L;
    const Index start = rng.uniform_int(0, span - width);
    for (Index a = 0; a < (along_x ? L : W); ++a)
      for (Index b = start; b < start + width; ++b) {
        const Index x = along_x ? a : b;
        const Index y = along_x ? b : a;
        g.at(x, y, 0) = toy_class::kRoad;
      }
    // Sidewalk bands hug both road edges but never overwrite road cells.
    for (Index a = 0; a < (along_x ? L : W); ++a)
      for (int s = 1; s <= p.sidewalk_width; ++s)
        for (const Index b : {start - s, start + width - 1 + s}) {
          if (b < 0 || b >= span) continue;
          const Index x = along_x ? a : b;
          const Index y = along_x ? b : a;
          if (g.at(x, y, 0) == toy_class::kGround)
            g.at(x, y, 0) = toy_class::kSidewalk;
        }
  }
}

void place_buildings(VoxelGrid& g, const ToySceneParams& p, Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(p.buildings_min, p.buildings_max));
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < p.placement_retries; ++attempt) {
      const Index sx = rng.uniform_int(p.building_side_min, p.building_side_max);
      const Index sy = rng.uniform_int(p.building_side_min, p.building_side_max);
      const int h =
          clamp_height(static_cast<int>(rng.uniform_int(p.building_height_min,
                                                        p.building_height_max)),
                       g.dims);
      const Index x0 = rng.uniform_int(0, g.dims.L - sx);
      const Index y0 = rng.uniform_int(0, g.dims.W - sy);
      if (!footprint_free(g, x0, y0, sx, sy, false)) continue;
      fill_box(g, x0, y0, sx, sy, 1, h, toy_class::kBuilding);
      break;
    }
  }
}

void place_poles(VoxelGrid& g, const ToySceneParams& p, Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(p.poles_min, p.poles_max));
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < p.placement_retries; ++attempt) {
      const int h = clamp_height(
          static_cast<int>(rng.uniform_int(p.pole_height_min, p.pole_height_max)), g.dims);
      const Index x0 = rng.uniform_int(0, g.dims.L - 2);
      const Index y0 = rng.uniform_int(0, g.dims.W - 2);
      if (!footprint_free(g, x0, y0, 2, 2, false)) continue;
      fill_box(g, x0, y0, 2, 2, 1, h, toy_class::kPole);
      break;
    }
  }
}

void place_trees(VoxelGrid& g, const ToySceneParams& p, Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(p.trees_min, p.trees_max));
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < p.placement_retries; ++attempt) {
      const int trunk = static_cast<int>(rng.uniform_int(2, 3));
      const int top = clamp_height(trunk + 2, g.dims);
      const Index x0 = rng.uniform_int(0, g.dims.L - 3);
      const Index y0 = rng.uniform_int(0, g.dims.W - 3);
      if (!footprint_free(g, x0, y0, 3, 3, false)) continue;
      fill_box(g, x0 + 1, y0 + 1, 1, 1, 1, trunk, toy_class::kTree);
      if (top > trunk) fill_box(g, x0, y0, 3, 3, trunk + 1, top, toy_class::kTree);
      break;
    }
  }
}

void place_cars(VoxelGrid& g, const ToySceneParams& p, Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(p.cars_min, p.cars_max));
  for (int i = 0; i < n; ++i) {
    for (int attempt = 0; attempt < p.placement_retries; ++attempt) {
      const bool long_x = rng.uniform_int(0, 1) == 0;
      const Index sx = long_x ? 4 : 2;
      const Index sy = long_x ? 2 : 4;
      const Index x0 = rng.uniform_int(0, g.dims.L - sx);
      const Index y0 = rng.uniform_int(0, g.dims.W - sy);
      bool on_road = true;
      for (Index x = x0; x < x0 + sx && on_road; ++x)
        for (Index y = y0; y < y0 + sy && on_road; ++y)
          on_road = g.at(x, y, 0) == toy_class::kRoad && g.at(x, y, 1) == 0;
      if (!on_road) continue;
      fill_box(g, x0, y0, sx, sy, 1, 1, toy_class::kCar);
      break;
    }
  }
}

}  // namespace

VoxelGrid generate_toy_scene(const ToySceneParams& p, Rng& rng) {
  detail::check(p.dims.L >= 8 && p.dims.W >= 8 && p.dims.H >= 2,
                "generate_toy_scene: grid too small");
  detail::check(p.road_width_min >= 1 && p.road_width_max <= std::min(p.dims.L, p.dims.W),
                "generate_toy_scene: road width out of range");
  VoxelGrid g = make_grid(p.dims);
  for (Index x = 0; x < p.dims.L; ++x)
    for (Index y = 0; y < p.dims.W; ++y) g.at(x, y, 0) = toy_class::kGround;
  place_roads(g, p, rng);
  place_buildings(g, p, rng);
  place_poles(g, p, rng);
  place_trees(g, p, rng);
  place_cars(g, p, rng);
  return g;
}

}  // namespace cymba
