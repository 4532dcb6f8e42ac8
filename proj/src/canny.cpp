#include "cymba/canny.hpp"

#include <cmath>
#include <deque>

namespace cymba {

namespace {

using detail::check;

inline Index clamp_idx(Index v, Index n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); }

double at_rep(const std::vector<double>& img, Index rows, Index cols, Index r, Index c) {
  return img[static_cast<size_t>(clamp_idx(r, rows) * cols + clamp_idx(c, cols))];
}

std::vector<double> gaussian_blur_5x5(const std::vector<double>& img, Index rows,
                                      Index cols) {
  // 5-tap kernel for sigma 1.4, normalized.
  double k[5];
  double norm = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k[i + 2] = std::exp(-(i * i) / (2.0 * 1.4 * 1.4));
    norm += k[i + 2];
  }
  for (double& v : k) v /= norm;

  std::vector<double> tmp(img.size()), out(img.size());
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * at_rep(img, rows, cols, r, c + i);
      tmp[static_cast<size_t>(r * cols + c)] = acc;
    }
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      double acc = 0.0;
      for (int i = -2; i <= 2; ++i) acc += k[i + 2] * at_rep(tmp, rows, cols, r + i, c);
      out[static_cast<size_t>(r * cols + c)] = acc;
    }
  return out;
}

}  // namespace

Image8 canny(const std::vector<double>& gray, Index rows, Index cols, double low,
             double high) {
  check(rows > 0 && cols > 0, "canny: empty image");
  check(gray.size() == static_cast<size_t>(rows * cols), "canny: pixel count mismatch");
  check(low > 0.0 && low < high, "canny: thresholds must satisfy 0 < low < high");

  const std::vector<double> smooth = gaussian_blur_5x5(gray, rows, cols);

  std::vector<double> mag(gray.size(), 0.0);
  std::vector<std::uint8_t> dir(gray.size(), 0);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      auto s = [&](Index dr, Index dc) { return at_rep(smooth, rows, cols, r + dr, c + dc); };
      const double gx = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) -
                        (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
      const double gy = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) -
                        (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
      mag[static_cast<size_t>(r * cols + c)] = std::hypot(gx, gy);
      // Quantize the gradient direction to 0, 45, 90, 135 degrees.
      double angle = std::atan2(gy, gx) * 180.0 / 3.14159265358979323846;
      if (angle < 0.0) angle += 180.0;
      std::uint8_t bin = 0;
      if (angle >= 22.5 && angle < 67.5)
        bin = 1;
      else if (angle >= 67.5 && angle < 112.5)
        bin = 2;
      else if (angle >= 112.5 && angle < 157.5)
        bin = 3;
      dir[static_cast<size_t>(r * cols + c)] = bin;
    }

  // Non-maximum suppression along the gradient direction. The comparison is
  // >= toward the preceding neighbor and > toward the following one, so a
  // two-pixel plateau keeps exactly one pixel.
  std::vector<double> thin(gray.size(), 0.0);
  const Index off[4][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const size_t i = static_cast<size_t>(r * cols + c);
      const std::uint8_t b = dir[i];
      const Index r1 = clamp_idx(r - off[b][0], rows), c1 = clamp_idx(c - off[b][1], cols);
      const Index r2 = clamp_idx(r + off[b][0], rows), c2 = clamp_idx(c + off[b][1], cols);
      const double m = mag[i];
      const double m_prev = mag[static_cast<size_t>(r1 * cols + c1)];
      const double m_next = mag[static_cast<size_t>(r2 * cols + c2)];
      if (m >= m_prev && m > m_next) thin[i] = m;
    }

  // Double threshold + hysteresis, 8-connected.
  Image8 edges{rows, cols, std::vector<std::uint8_t>(gray.size(), 0)};
  std::deque<Index> frontier;
  std::vector<std::uint8_t> weak(gray.size(), 0);
  for (Index i = 0; i < static_cast<Index>(gray.size()); ++i) {
    if (thin[static_cast<size_t>(i)] >= high) {
      edges.pixels[static_cast<size_t>(i)] = 255;
      frontier.push_back(i);
    } else if (thin[static_cast<size_t>(i)] >= low) {
      weak[static_cast<size_t>(i)] = 1;
    }
  }
  while (!frontier.empty()) {
    const Index i = frontier.front();
    frontier.pop_front();
    const Index r = i / cols, c = i % cols;
    for (Index dr = -1; dr <= 1; ++dr)
      for (Index dc = -1; dc <= 1; ++dc) {
        const Index rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
        const size_t j = static_cast<size_t>(rr * cols + cc);
        if (weak[j] && !edges.pixels[j]) {
          edges.pixels[j] = 255;
          frontier.push_back(static_cast<Index>(rr * cols + cc));
        }
      }
  }
  return edges;
}

Image8 canny_from_labels(const Image8& labels, double value_scale, double low,
                         double high) {
  check(value_scale > 0.0, "canny: value_scale must be positive");
  std::vector<double> gray(labels.pixels.size());
  for (size_t i = 0; i < gray.size(); ++i)
    gray[i] = static_cast<double>(labels.pixels[i]) * value_scale;
  return canny(gray, labels.rows, labels.cols, low, high);
}

}  // namespace cymba
