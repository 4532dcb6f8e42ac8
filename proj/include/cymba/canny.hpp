#pragma once

#include "cymba/voxel.hpp"

namespace cymba {

// Classic edge detector: 5x5 Gaussian (sigma 1.4), Sobel gradients,
// four-direction non-maximum suppression, double-threshold hysteresis with
// 8-connected linking. Borders use replicate padding. Output pixels are 0 or
// 255. Requires 0 < low < high.
Image8 canny(const std::vector<double>& gray, Index rows, Index cols, double low,
             double high);

// Runs canny on a label image scaled by value_scale, so that the edge map is
// invariant to a constant shift of the label ids.
Image8 canny_from_labels(const Image8& labels, double value_scale, double low,
                         double high);

}  // namespace cymba
