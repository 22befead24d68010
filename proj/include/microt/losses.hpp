#pragma once

#include "microt/tensor.hpp"

namespace microt {

/// Probabilities of softmax(logits / temperature), numerically stable.
Tensor softmax(const Tensor& logits, double temperature = 1.0);

/// Cross entropy -log softmax(logits)[label], evaluated in log space.
double softmax_ce(const Tensor& logits, int label);

/// d(softmax_ce)/d(logits) = softmax(logits) - onehot(label).
Tensor softmax_ce_grad(const Tensor& logits, int label);

/// Cross entropy from probabilities (already a simplex): -log p[label].
double ce_from_probs(const Tensor& probs, int label);

/// Mean squared error between two equal-length vectors.
double mse(const Tensor& a, const Tensor& b);

/// d(mse)/da = 2 (a - b) / n.
Tensor mse_grad(const Tensor& a, const Tensor& b);

/// Guide/exploration agreement loss:
///   -sum_i softmax(g/tau_g)_i * log softmax(e/tau_e)_i.
/// The guide branch is a constant target; gradients flow to the exploration
/// logits only.
double ssl_loss(const Tensor& guide_logits, const Tensor& explore_logits, double tau_guide,
                double tau_explore);

/// d(ssl_loss)/d(explore_logits) = (softmax(e/tau_e) - softmax(g/tau_g)) / tau_e.
Tensor ssl_loss_grad(const Tensor& guide_logits, const Tensor& explore_logits, double tau_guide,
                     double tau_explore);

/// Distillation objective: alpha * MSE(student_feat, teacher_feat) +
/// CE(student_out, label). student_feat must already be matched to the
/// teacher width; student_out holds classifier logits.
double distill_loss(const Tensor& student_feat, const Tensor& teacher_feat,
                    const Tensor& student_out, int label, double alpha);

/// Part/full fine-tuning objective:
///   alpha*MSE(full_feat, teacher) + beta*MSE(part_feat, teacher)
///   + CE(full_out, label) + CE(part_out, label).
double joint_loss(const Tensor& part_feat, const Tensor& full_feat, const Tensor& teacher_feat,
                  const Tensor& part_out, const Tensor& full_out, int label, double alpha,
                  double beta);

}  // namespace microt
