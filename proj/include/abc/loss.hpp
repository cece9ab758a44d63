#pragma once

#include <span>

#include "abc/tensor.hpp"

namespace abc {

/// Smoothed soft-IoU loss on sigmoid probabilities, averaged over the batch:
///   p = sigmoid(logits)
///   loss_n = 1 - (sum p*t + eps) / (sum p + sum t - sum p*t + eps)
/// logits and target are [N,1,H,W]; target must be binary.
Tensor soft_iou_loss(const Tensor& logits, const Tensor& target, float eps = 1.0f);

/// Mean soft-IoU over the main head and every auxiliary head.
Tensor deep_supervision_loss(const Tensor& main_logits, std::span<const Tensor> aux_logits, const Tensor& target,
                             float eps = 1.0f);

}  // namespace abc
