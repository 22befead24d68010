#include "microt/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace microt {

Tensor softmax(const Tensor& logits, double temperature) {
  if (logits.size() == 0) throw std::invalid_argument("softmax of empty tensor");
  if (temperature <= 0) throw std::invalid_argument("softmax temperature must be positive");
  Tensor p(logits.shape);
  const double m = logits.data.maxCoeff();
  p.data = ((logits.data - m) / temperature).exp();
  p.data /= p.data.sum();
  return p;
}

namespace {

/// log softmax(logits / temperature), stable for large magnitudes.
Tensor log_softmax(const Tensor& logits, double temperature) {
  Tensor out(logits.shape);
  const double m = logits.data.maxCoeff();
  out.data = (logits.data - m) / temperature;
  const double lse = std::log(out.data.exp().sum());
  out.data -= lse;
  return out;
}

void check_label(const Tensor& t, int label) {
  if (label < 0 || label >= t.size())
    throw std::out_of_range("label " + std::to_string(label) + " outside output width " +
                            std::to_string(t.size()));
}

}  // namespace

double softmax_ce(const Tensor& logits, int label) {
  check_label(logits, label);
  return -log_softmax(logits, 1.0).data[label];
}

Tensor softmax_ce_grad(const Tensor& logits, int label) {
  check_label(logits, label);
  Tensor g = softmax(logits, 1.0);
  g.data[label] -= 1.0;
  return g;
}

double ce_from_probs(const Tensor& probs, int label) {
  check_label(probs, label);
  return -std::log(std::max(probs.data[label], 1e-300));
}

double mse(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    throw ShapeError("mse width mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  return (a.data - b.data).square().mean();
}

Tensor mse_grad(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size())
    throw ShapeError("mse width mismatch: " + shape_str(a.shape) + " vs " + shape_str(b.shape));
  Tensor g(a.shape);
  g.data = 2.0 * (a.data - b.data) / static_cast<double>(a.size());
  return g;
}

double ssl_loss(const Tensor& guide_logits, const Tensor& explore_logits, double tau_guide,
                double tau_explore) {
  if (guide_logits.size() == 0) throw std::invalid_argument("ssl_loss on zero-length logits");
  if (guide_logits.size() != explore_logits.size())
    throw ShapeError("ssl_loss width mismatch: " + shape_str(guide_logits.shape) + " vs " +
                     shape_str(explore_logits.shape));
  if (tau_guide <= 0 || tau_explore <= 0)
    throw std::invalid_argument("ssl temperatures must be positive");
  const Tensor target = softmax(guide_logits, tau_guide);
  const Tensor logp = log_softmax(explore_logits, tau_explore);
  return -(target.data * logp.data).sum();
}

Tensor ssl_loss_grad(const Tensor& guide_logits, const Tensor& explore_logits, double tau_guide,
                     double tau_explore) {
  const Tensor target = softmax(guide_logits, tau_guide);
  const Tensor p = softmax(explore_logits, tau_explore);
  Tensor g(explore_logits.shape);
  g.data = (p.data - target.data) / tau_explore;
  return g;
}

double distill_loss(const Tensor& student_feat, const Tensor& teacher_feat,
                    const Tensor& student_out, int label, double alpha) {
  if (alpha < 0) throw std::invalid_argument("alpha must be nonnegative");
  return alpha * mse(student_feat, teacher_feat) + softmax_ce(student_out, label);
}

double joint_loss(const Tensor& part_feat, const Tensor& full_feat, const Tensor& teacher_feat,
                  const Tensor& part_out, const Tensor& full_out, int label, double alpha,
                  double beta) {
  if (alpha < 0 || beta < 0) throw std::invalid_argument("alpha/beta must be nonnegative");
  return alpha * mse(full_feat, teacher_feat) + beta * mse(part_feat, teacher_feat) +
         softmax_ce(full_out, label) + softmax_ce(part_out, label);
}

}  // namespace microt
