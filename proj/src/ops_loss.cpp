#include "cymba/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cymba {

namespace {
using detail::check;
using detail::op_result;

void check_labels(const std::vector<std::uint16_t>& labels, Index C, Index V,
                  const char* what) {
  check(static_cast<Index>(labels.size()) == V, std::string(what) + ": label count mismatch");
  for (std::uint16_t y : labels)
    check(y < C, std::string(what) + ": label id out of range");
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, const std::vector<std::uint16_t>& labels,
                     const Tensor* class_weights) {
  check(logits.rank() == 2, "cross_entropy: scores must be (C,V)");
  const Index C = logits.extent(0), V = logits.extent(1);
  check_labels(labels, C, V, "cross_entropy");
  Array wts = Array::Ones(C);
  if (class_weights) {
    check(class_weights->rank() == 1 && class_weights->extent(0) == C,
          "cross_entropy: class weights must be (C)");
    wts = class_weights->value();
    check((wts >= 0.0).all(), "cross_entropy: class weights must be nonnegative");
  }

  MapConstMat xm(logits.value().data(), C, V);
  double acc = 0.0;
  double wsum = 0.0;
  for (Index v = 0; v < V; ++v) {
    const double mx = xm.col(v).maxCoeff();
    const double lse = mx + std::log((xm.col(v).array() - mx).exp().sum());
    const double w = wts[labels[static_cast<size_t>(v)]];
    acc -= w * (xm(labels[static_cast<size_t>(v)], v) - lse);
    wsum += w;
  }
  check(wsum > 0.0, "cross_entropy: all voxel weights are zero");

  const bool w_grad = class_weights && class_weights->requires_grad();
  Tensor out =
      op_result({1}, Array::Constant(1, acc / wsum), logits.requires_grad() || w_grad);
  if (out.requires_grad()) {
    auto xn = logits.node();
    auto on = out.node();
    auto wn = w_grad ? class_weights->node() : nullptr;
    auto wcopy = std::make_shared<Array>(std::move(wts));
    auto lcopy = std::make_shared<std::vector<std::uint16_t>>(labels);
    Tape::record([xn, on, wn, wcopy, lcopy, C, V, wsum] {
      if (!on->has_grad()) return;
      const double g0 = on->grad[0];
      const double loss = on->value[0];
      MapConstMat xm(xn->value.data(), C, V);
      Array dx = Array::Zero(xn->value.size());
      MapMat dxm(dx.data(), C, V);
      Array dw = Array::Zero(C);
      for (Index v = 0; v < V; ++v) {
        const std::uint16_t y = (*lcopy)[static_cast<size_t>(v)];
        const double mx = xm.col(v).maxCoeff();
        Eigen::ArrayXd p = (xm.col(v).array() - mx).exp();
        const double lse = mx + std::log(p.sum());
        p /= p.sum();
        p[y] -= 1.0;
        if (xn->requires_grad) dxm.col(v) = p * (g0 * (*wcopy)[y] / wsum);
        dw[y] += (lse - xm(y, v)) - loss;
      }
      if (xn->requires_grad) xn->accumulate(dx);
      if (wn) wn->accumulate(dw * (g0 / wsum));
    });
  }
  return out;
}

namespace {

// Gradient of the Jaccard extension along the sorted error sequence.
// gt_sorted holds 0/1 ground-truth flags in descending-error order.
std::vector<double> jaccard_grad(const std::vector<double>& gt_sorted) {
  const size_t n = gt_sorted.size();
  const double gts = std::accumulate(gt_sorted.begin(), gt_sorted.end(), 0.0);
  std::vector<double> grad(n);
  double cum_fg = 0.0, cum_bg = 0.0, prev = 0.0;
  for (size_t j = 0; j < n; ++j) {
    cum_fg += gt_sorted[j];
    cum_bg += 1.0 - gt_sorted[j];
    const double inter = gts - cum_fg;
    const double uni = gts + cum_bg;
    const double jac = 1.0 - inter / uni;
    grad[j] = jac - prev;
    prev = jac;
  }
  return grad;
}

}  // namespace

Tensor lovasz_softmax(const Tensor& probs, const std::vector<std::uint16_t>& labels) {
  check(probs.rank() == 2, "lovasz_softmax: probabilities must be (C,V)");
  const Index C = probs.extent(0), V = probs.extent(1);
  check_labels(labels, C, V, "lovasz_softmax");

  std::vector<char> present(static_cast<size_t>(C), 0);
  for (std::uint16_t y : labels) present[y] = 1;
  Index n_present = 0;
  for (char p : present) n_present += p;
  check(n_present > 0, "lovasz_softmax: no labels");

  struct ClassRecord {
    Index cls;
    std::vector<Index> order;  // voxel index at each sorted rank
    std::vector<double> grad;  // Jaccard gradient at each sorted rank
  };
  auto records = std::make_shared<std::vector<ClassRecord>>();
  records->reserve(static_cast<size_t>(n_present));

  MapConstMat pm(probs.value().data(), C, V);
  double total = 0.0;
  std::vector<Index> order(static_cast<size_t>(V));
  std::vector<double> errors(static_cast<size_t>(V));
  std::vector<double> gt_sorted(static_cast<size_t>(V));
  for (Index c = 0; c < C; ++c) {
    if (!present[static_cast<size_t>(c)]) continue;
    for (Index v = 0; v < V; ++v) {
      const bool fg = labels[static_cast<size_t>(v)] == c;
      errors[static_cast<size_t>(v)] = fg ? 1.0 - pm(c, v) : pm(c, v);
    }
    std::iota(order.begin(), order.end(), Index(0));
    std::sort(order.begin(), order.end(), [&errors](Index a, Index b) {
      const double ea = errors[static_cast<size_t>(a)];
      const double eb = errors[static_cast<size_t>(b)];
      return ea > eb || (ea == eb && a < b);
    });
    for (Index j = 0; j < V; ++j)
      gt_sorted[static_cast<size_t>(j)] =
          labels[static_cast<size_t>(order[static_cast<size_t>(j)])] == c ? 1.0 : 0.0;
    std::vector<double> grad = jaccard_grad(gt_sorted);
    double loss_c = 0.0;
    for (Index j = 0; j < V; ++j)
      loss_c += errors[static_cast<size_t>(order[static_cast<size_t>(j)])] *
                grad[static_cast<size_t>(j)];
    total += loss_c;
    records->push_back({c, order, std::move(grad)});
  }
  total /= static_cast<double>(n_present);

  Tensor out = op_result({1}, Array::Constant(1, total), probs.requires_grad());
  if (out.requires_grad()) {
    auto pn = probs.node();
    auto on = out.node();
    auto lcopy = std::make_shared<std::vector<std::uint16_t>>(labels);
    const double scale = 1.0 / static_cast<double>(n_present);
    Tape::record([pn, on, records, lcopy, C, V, scale] {
      if (!on->has_grad() || !pn->requires_grad) return;
      const double g0 = on->grad[0] * scale;
      Array dp = Array::Zero(pn->value.size());
      MapMat dpm(dp.data(), C, V);
      for (const auto& rec : *records) {
        for (Index j = 0; j < V; ++j) {
          const Index v = rec.order[static_cast<size_t>(j)];
          const bool fg = (*lcopy)[static_cast<size_t>(v)] == rec.cls;
          dpm(rec.cls, v) += g0 * rec.grad[static_cast<size_t>(j)] * (fg ? -1.0 : 1.0);
        }
      }
      pn->accumulate(dp);
    });
  }
  return out;
}

}  // namespace cymba
