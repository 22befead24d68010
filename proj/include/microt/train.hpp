#pragma once

#include "microt/data.hpp"
#include "microt/net.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace microt {

/// Feature rows (one per sample) with labels, the common currency between
/// extractors, probes and the reference trainer.
struct FeatureMatrix {
  Eigen::MatrixXd X;  // N x D
  std::vector<int> y;
  int classes = 0;

  Eigen::Index count() const { return X.rows(); }
  Eigen::Index dim() const { return X.cols(); }
};

/// Global-average-pools rank-3 activations to per-channel means; vectors pass
/// through. This is the feature view every classifier head consumes.
Tensor pool_features(const Tensor& t);

/// Pre-head (pooled) features of the net over a dataset.
FeatureMatrix extract_feature_matrix(const BlockNet& net, const Dataset& ds);

/// Plain linear softmax classifier over feature rows.
struct SoftmaxModel {
  Eigen::MatrixXd W;  // classes x dim
  Eigen::VectorXd b;

  int predict(const Eigen::VectorXd& features) const;
};

/// Mini-batch SGD with mean-reduced gradients and a seeded per-epoch shuffle.
/// batch_size of 1 reproduces sample-at-a-time training; batch_size >= N is
/// full-batch gradient descent.
SoftmaxModel train_softmax(const FeatureMatrix& data, double lr, int epochs, int batch_size,
                           std::uint64_t seed, bool shuffle = true);

double accuracy(const SoftmaxModel& model, const FeatureMatrix& data);

/// Held-out accuracy of a fresh linear probe: the standard measure of feature
/// quality used by the split search and the distillation comparisons.
double linear_probe_accuracy(const FeatureMatrix& train, const FeatureMatrix& test, double lr,
                             int epochs, std::uint64_t seed);

struct ProbeSettings {
  double lr = 0.5;
  int epochs = 120;
  int batch_size = 1 << 30;  // full batch
};

}  // namespace microt
