#include "cymba/metrics.hpp"

#include "cymba/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cymba {

namespace {

using detail::check;

constexpr double kEigFloor = -1e-6;

// Eigenvalues of a symmetric PSD matrix, with tiny negatives clipped.
Eigen::VectorXd psd_eigenvalues(const Eigen::MatrixXd& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  check(eig.info() == Eigen::Success, std::string(what) + ": eigendecomposition failed");
  Eigen::VectorXd ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    check(ev[i] >= kEigFloor, std::string(what) + ": covariance is not positive semidefinite");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  return ev;
}

}  // namespace

GaussianSummary summarize(const Eigen::MatrixXd& rows) {
  check(rows.rows() >= 2, "summarize: need at least two feature rows");
  check(rows.allFinite(), "summarize: non-finite features");
  GaussianSummary s;
  s.mean = rows.colwise().mean();
  const Eigen::MatrixXd centered = rows.rowwise() - s.mean.transpose();
  s.cov = centered.transpose() * centered / static_cast<double>(rows.rows() - 1);
  return s;
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  check(a.mean.size() == b.mean.size(), "frechet_distance: dimension mismatch");
  check(a.cov.rows() == a.mean.size() && b.cov.rows() == b.mean.size(),
        "frechet_distance: covariance shape mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a.cov);
  check(eig.info() == Eigen::Success, "frechet_distance: eigendecomposition failed");
  Eigen::VectorXd ev = eig.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    check(ev[i] >= kEigFloor, "frechet_distance: covariance is not positive semidefinite");
    if (ev[i] < 0.0) ev[i] = 0.0;
  }
  const Eigen::MatrixXd sqrt_a =
      eig.eigenvectors() * ev.cwiseSqrt().asDiagonal() * eig.eigenvectors().transpose();

  // tr sqrt(C1 C2) = tr sqrt(S C2 S), and S C2 S is symmetric PSD.
  const Eigen::MatrixXd inner = sqrt_a * b.cov * sqrt_a;
  const Eigen::VectorXd inner_ev =
      psd_eigenvalues(0.5 * (inner + inner.transpose()), "frechet_distance");
  const double tr_sqrt = inner_ev.cwiseSqrt().sum();

  const double mean_term = (a.mean - b.mean).squaredNorm();
  return mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
}

double frechet_distance(const Eigen::MatrixXd& rows_a, const Eigen::MatrixXd& rows_b) {
  return frechet_distance(summarize(rows_a), summarize(rows_b));
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  check(x.cols() == y.cols(), "median_heuristic_bandwidth: dimension mismatch");
  Eigen::MatrixXd pooled(x.rows() + y.rows(), x.cols());
  pooled << x, y;
  const Eigen::Index m = pooled.rows();
  check(m >= 2, "median_heuristic_bandwidth: need at least two rows");
  std::vector<double> dists;
  dists.reserve(static_cast<size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = i + 1; j < m; ++j)
      dists.push_back((pooled.row(i) - pooled.row(j)).norm());
  std::sort(dists.begin(), dists.end());
  const size_t n = dists.size();
  const double median =
      n % 2 == 1 ? dists[n / 2] : 0.5 * (dists[n / 2 - 1] + dists[n / 2]);
  return median > 0.0 ? median : 1.0;
}

double mmd2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
            std::optional<double> bandwidth, double* used_bandwidth) {
  check(x.rows() >= 1 && y.rows() >= 1, "mmd2: empty feature set");
  check(x.cols() == y.cols(), "mmd2: dimension mismatch");
  check(x.allFinite() && y.allFinite(), "mmd2: non-finite features");
  double sigma;
  if (bandwidth.has_value()) {
    check(*bandwidth > 0.0, "mmd2: bandwidth must be positive");
    sigma = *bandwidth;
  } else {
    sigma = median_heuristic_bandwidth(x, y);
  }
  if (used_bandwidth) *used_bandwidth = sigma;
  const double inv = 1.0 / (2.0 * sigma * sigma);

  auto kernel_mean = [inv](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < b.rows(); ++j)
        acc += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv);
    return acc / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
  };

  const double v = kernel_mean(x, x) + kernel_mean(y, y) - 2.0 * kernel_mean(x, y);
  return v < 0.0 ? 0.0 : v;
}

IouReport evaluate_iou(const VoxelGrid& pred, const VoxelGrid& truth, Index num_classes) {
  check(pred.dims == truth.dims, "evaluate_iou: grid extents differ");
  check(num_classes >= 1, "evaluate_iou: need at least one class");
  std::vector<Index> inter(static_cast<size_t>(num_classes), 0);
  std::vector<Index> pred_n(static_cast<size_t>(num_classes), 0);
  std::vector<Index> truth_n(static_cast<size_t>(num_classes), 0);
  Index occ_inter = 0, occ_union = 0;
  for (size_t i = 0; i < truth.labels.size(); ++i) {
    const std::uint16_t p = pred.labels[i];
    const std::uint16_t t = truth.labels[i];
    check(p < num_classes && t < num_classes, "evaluate_iou: label out of range");
    ++pred_n[p];
    ++truth_n[t];
    if (p == t) ++inter[p];
    const bool po = p != 0, to = t != 0;
    if (po && to) ++occ_inter;
    if (po || to) ++occ_union;
  }

  IouReport rep;
  rep.per_class.assign(static_cast<size_t>(num_classes - 1),
                       std::numeric_limits<double>::quiet_NaN());
  rep.class_present.assign(static_cast<size_t>(num_classes - 1), false);
  double sum = 0.0;
  Index present = 0;
  for (Index c = 1; c < num_classes; ++c) {
    const size_t ci = static_cast<size_t>(c);
    if (truth_n[ci] == 0 && pred_n[ci] == 0) continue;
    rep.class_present[ci - 1] = true;
    const Index uni = pred_n[ci] + truth_n[ci] - inter[ci];
    rep.per_class[ci - 1] = static_cast<double>(inter[ci]) / static_cast<double>(uni);
    sum += rep.per_class[ci - 1];
    ++present;
  }
  rep.miou = present > 0 ? sum / static_cast<double>(present) : 0.0;
  rep.occupancy_iou =
      occ_union > 0 ? static_cast<double>(occ_inter) / static_cast<double>(occ_union) : 1.0;
  return rep;
}

}  // namespace cymba
