#pragma once

#include "cymba/voxel.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace cymba {

// Rows are feature vectors. Requires at least two rows and finite entries.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;  // unbiased (m - 1 denominator)
};

GaussianSummary summarize(const Eigen::MatrixXd& rows);

// Frechet distance between two Gaussians:
// |m1 - m2|^2 + tr(C1 + C2 - 2 (C1 C2)^{1/2}).
// The matrix square root goes through an eigendecomposition of C1; the
// product root is tr sqrt(S C2 S) with S = sqrt(C1). Eigenvalues below
// -1e-6 are rejected as non-PSD; small negatives are clipped to zero.
double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);
double frechet_distance(const Eigen::MatrixXd& rows_a, const Eigen::MatrixXd& rows_b);

// Median of pairwise Euclidean distances over the pooled rows; falls back to
// 1.0 when the median is zero.
double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

// Biased (V-statistic) squared maximum mean discrepancy with a Gaussian
// kernel exp(-|a-b|^2 / (2 sigma^2)). All pairs including self-pairs enter
// the double sums. bandwidth = nullopt selects the median heuristic. The
// bandwidth actually used is written to used_bandwidth when given.
double mmd2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
            std::optional<double> bandwidth, double* used_bandwidth = nullptr);

// Per-class scores cover classes 1..C-1; the empty class never enters the
// mean. A class counts as present when it appears in either grid.
struct IouReport {
  std::vector<double> per_class;      // index c-1 holds class c; NaN if absent
  std::vector<bool> class_present;    // class appears in pred or truth
  double miou = 0.0;                  // mean over present classes
  double occupancy_iou = 0.0;         // label != 0 treated as occupied
};

IouReport evaluate_iou(const VoxelGrid& pred, const VoxelGrid& truth, Index num_classes);

}  // namespace cymba
