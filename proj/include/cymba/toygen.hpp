#pragma once

#include "cymba/rng.hpp"
#include "cymba/voxel.hpp"

namespace cymba {

// Procedural outdoor-style scenes: a ground plane carrying road strips with
// flanking sidewalks, plus building boxes, pole columns, trees, and cars.
// Class ids are fixed; 0 stays empty space.
namespace toy_class {
inline constexpr std::uint16_t kGround = 1;
inline constexpr std::uint16_t kRoad = 2;
inline constexpr std::uint16_t kBuilding = 3;
inline constexpr std::uint16_t kPole = 4;
inline constexpr std::uint16_t kTree = 5;
inline constexpr std::uint16_t kCar = 6;
inline constexpr std::uint16_t kSidewalk = 7;
}  // namespace toy_class

struct ToySceneParams {
  Dims dims{64, 64, 8};
  int roads_min = 1, roads_max = 2;
  int road_width_min = 6, road_width_max = 10;
  int sidewalk_width = 2;
  int buildings_min = 2, buildings_max = 4;
  int building_side_min = 8, building_side_max = 16;
  int building_height_min = 3, building_height_max = 6;
  int poles_min = 4, poles_max = 8;
  int pole_height_min = 4, pole_height_max = 7;
  int trees_min = 2, trees_max = 4;
  int cars_min = 1, cars_max = 3;
  int placement_retries = 20;
};

// Deterministic given the generator state. Every feature placement that
// cannot find a free spot within the retry budget is skipped, so the scene
// always satisfies the layout rules even on crowded grids.
VoxelGrid generate_toy_scene(const ToySceneParams& params, Rng& rng);

}  // namespace cymba
