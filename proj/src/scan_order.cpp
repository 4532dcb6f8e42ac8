#include "cymba/scan_order.hpp"

#include "cymba/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cymba {

namespace {
using detail::check;
}

ScanOrder make_scan_order(ScanKind kind, const Dims& dims) {
  check(dims.L > 0 && dims.W > 0 && dims.H > 0, "scan order: extents must be positive");
  const Index V = dims.volume();
  ScanOrder order;
  order.dims = dims;
  order.perm.resize(static_cast<size_t>(V));
  std::iota(order.perm.begin(), order.perm.end(), Index(0));

  if (kind == ScanKind::Cylinder) {
    struct Key {
      Index z;
      double theta;
      double radius;
    };
    std::vector<Key> keys(static_cast<size_t>(V));
    const double cx = static_cast<double>(dims.L) / 2.0;
    const double cy = static_cast<double>(dims.W) / 2.0;
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    for (Index x = 0; x < dims.L; ++x)
      for (Index y = 0; y < dims.W; ++y) {
        const double dx = (static_cast<double>(x) + 0.5) - cx;
        const double dy = (static_cast<double>(y) + 0.5) - cy;
        double theta = std::atan2(dy, dx);
        if (theta < 0.0) theta += kTwoPi;
        const double radius = std::hypot(dx, dy);
        for (Index z = 0; z < dims.H; ++z)
          keys[static_cast<size_t>(voxel_flat(dims, x, y, z))] = {z, theta, radius};
      }
    std::sort(order.perm.begin(), order.perm.end(), [&keys](Index a, Index b) {
      const Key& ka = keys[static_cast<size_t>(a)];
      const Key& kb = keys[static_cast<size_t>(b)];
      if (ka.z != kb.z) return ka.z < kb.z;
      if (ka.theta != kb.theta) return ka.theta < kb.theta;
      if (ka.radius != kb.radius) return ka.radius < kb.radius;
      return a < b;
    });
  }

  order.inverse.assign(static_cast<size_t>(V), 0);
  for (Index t = 0; t < V; ++t)
    order.inverse[static_cast<size_t>(order.perm[static_cast<size_t>(t)])] = t;
  return order;
}

std::vector<Index> direction_row_perm(const ScanOrder& order, ScanDirection dir,
                                      std::uint64_t seed) {
  const Index T = static_cast<Index>(order.perm.size());
  std::vector<Index> rho(static_cast<size_t>(T));
  switch (dir) {
    case ScanDirection::Forward:
      std::iota(rho.begin(), rho.end(), Index(0));
      break;
    case ScanDirection::Backward:
      for (Index t = 0; t < T; ++t) rho[static_cast<size_t>(t)] = T - 1 - t;
      break;
    case ScanDirection::InterSlice: {
      // Visit whole z-slices in a seeded random order; token order inside
      // each slice is untouched.
      const Index H = order.dims.H;
      std::vector<Index> slices(static_cast<size_t>(H));
      std::iota(slices.begin(), slices.end(), Index(0));
      Rng rng(seed);
      rng.shuffle(slices);
      std::vector<std::vector<Index>> groups(static_cast<size_t>(H));
      for (Index t = 0; t < T; ++t) {
        const Index z = order.perm[static_cast<size_t>(t)] % H;
        groups[static_cast<size_t>(z)].push_back(t);
      }
      size_t q = 0;
      for (Index s : slices)
        for (Index t : groups[static_cast<size_t>(s)]) rho[q++] = t;
      break;
    }
  }
  return rho;
}

namespace {

std::vector<Index> composed_perm(const ScanOrder& order, ScanDirection dir,
                                 std::uint64_t seed) {
  const std::vector<Index> rho = direction_row_perm(order, dir, seed);
  std::vector<Index> comp(rho.size());
  for (size_t q = 0; q < rho.size(); ++q)
    comp[q] = order.perm[static_cast<size_t>(rho[q])];
  return comp;
}

void check_apply(const Tensor& x, const ScanOrder& order) {
  detail::check(x.rank() == 2, "apply_order: input must be (R,V)");
  detail::check(x.extent(1) == order.dims.volume(),
                "apply_order: column count does not match the grid volume");
}

}  // namespace

Tensor apply_order(const Tensor& x, const ScanOrder& order, ScanDirection dir,
                   std::uint64_t seed) {
  check_apply(x, order);
  return permute_cols(x, composed_perm(order, dir, seed));
}

Tensor invert_order(const Tensor& x, const ScanOrder& order, ScanDirection dir,
                    std::uint64_t seed) {
  check_apply(x, order);
  return unpermute_cols(x, composed_perm(order, dir, seed));
}

}  // namespace cymba
