#include "abc/loss.hpp"

#include <cmath>

#include "abc/ops.hpp"

namespace abc {

Tensor soft_iou_loss(const Tensor& logits, const Tensor& target, float eps) {
  if (!logits.defined() || !target.defined() || logits.shape() != target.shape() || logits.rank() < 1) {
    throw ShapeError("soft_iou_loss: logits and target shapes differ");
  }
  for (float t : target.data()) {
    if (t != 0.0f && t != 1.0f) throw ShapeError("soft_iou_loss: target must be binary");
  }
  const std::size_t batch = logits.dim(0);
  const std::size_t per = logits.numel() / batch;
  auto z = logits.data();
  auto t = target.data();

  std::vector<float> prob(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) prob[i] = 1.0f / (1.0f + std::exp(-z[i]));

  // Per-sample intersection and union, accumulated in double.
  std::vector<double> inter(batch, 0.0);
  std::vector<double> uni(batch, 0.0);
  double loss = 0.0;
  for (std::size_t n = 0; n < batch; ++n) {
    double sp = 0.0;
    double st = 0.0;
    double spt = 0.0;
    for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
      sp += prob[i];
      st += t[i];
      spt += static_cast<double>(prob[i]) * t[i];
    }
    inter[n] = spt;
    uni[n] = sp + st - spt;
    loss += 1.0 - (spt + eps) / (uni[n] + eps);
  }
  loss /= static_cast<double>(batch);

  auto li = logits.impl();
  auto ti = target.impl();
  return Tensor::make_result(
      {1}, {static_cast<float>(loss)}, "soft_iou_loss", {logits, target},
      [li, ti, prob = std::move(prob), inter = std::move(inter), uni = std::move(uni), batch, per, eps](
          const TensorImpl&, std::span<const float> g) {
        if (!li->requires_grad) return;
        auto gz = li->grad_buffer();
        const double scale = static_cast<double>(g[0]) / static_cast<double>(batch);
        for (std::size_t n = 0; n < batch; ++n) {
          const double num = inter[n] + eps;
          const double den = uni[n] + eps;
          for (std::size_t i = n * per; i < (n + 1) * per; ++i) {
            const double tv = ti->data[i];
            // d/dp [1 - num/den] with dnum/dp = t, dden/dp = 1 - t.
            const double dp = -(tv * den - num * (1.0 - tv)) / (den * den);
            const double p = prob[i];
            gz[i] += static_cast<float>(scale * dp * p * (1.0 - p));
          }
        }
      });
}

Tensor deep_supervision_loss(const Tensor& main_logits, std::span<const Tensor> aux_logits, const Tensor& target,
                             float eps) {
  Tensor total = soft_iou_loss(main_logits, target, eps);
  for (const Tensor& aux : aux_logits) total = add(total, soft_iou_loss(aux, target, eps));
  return scale(total, 1.0f / static_cast<float>(aux_logits.size() + 1));
}

}  // namespace abc
