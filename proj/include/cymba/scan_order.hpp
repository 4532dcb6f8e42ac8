#pragma once

#include "cymba/ops.hpp"
#include "cymba/voxel.hpp"

#include <cstdint>

namespace cymba {

enum class ScanKind { Cartesian, Cylinder };

enum class ScanDirection { Forward, Backward, InterSlice };

// Bijective serialization of a voxel grid. perm maps sequence position to
// flat voxel index; inverse is its inverse permutation.
struct ScanOrder {
  Dims dims;
  std::vector<Index> perm;
  std::vector<Index> inverse;
};

// Cartesian: raster order, x outermost, z innermost (the storage order).
// Cylinder: sort by (z ascending, azimuth ascending, radius ascending),
// measured at cell centers about the grid center (L/2, W/2); azimuth is
// normalized to [0, 2*pi) and exact ties fall back to the flat index.
ScanOrder make_scan_order(ScanKind kind, const Dims& dims);

// Sequence-space reordering for a scan direction. Forward is the identity,
// Backward reverses, InterSlice keeps each z-slice's tokens in order but
// visits the slices in a seeded random order. Returns rho with
// out_position q reading from base position rho[q].
std::vector<Index> direction_row_perm(const ScanOrder& order, ScanDirection dir,
                                      std::uint64_t seed);

// Applies a scan order (composed with a direction) to the columns of x,
// which must be (R, V) with V = dims.volume(). Column t of the result is the
// t-th voxel visited. invert_order is the exact inverse.
Tensor apply_order(const Tensor& x, const ScanOrder& order, ScanDirection dir,
                   std::uint64_t seed);
Tensor invert_order(const Tensor& x, const ScanOrder& order, ScanDirection dir,
                    std::uint64_t seed);

}  // namespace cymba
