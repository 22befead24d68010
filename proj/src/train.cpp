#include "microt/train.hpp"

#include "microt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace microt {

Tensor pool_features(const Tensor& t) {
  if (t.rank() == 3) return block_forward(gap_block(), t);
  if (t.rank() == 1) return t;
  throw ShapeError("features must be rank-1 or rank-3, got " + shape_str(t.shape));
}

FeatureMatrix extract_feature_matrix(const BlockNet& net, const Dataset& ds) {
  FeatureMatrix fm;
  fm.classes = ds.classes;
  fm.y = ds.labels;
  for (std::size_t i = 0; i < ds.inputs.size(); ++i) {
    const Tensor feat = pool_features(forward(net, ds.inputs[i]).features);
    if (i == 0) fm.X.resize(static_cast<Eigen::Index>(ds.inputs.size()), feat.size());
    fm.X.row(static_cast<Eigen::Index>(i)) = feat.data.matrix().transpose();
  }
  return fm;
}

int SoftmaxModel::predict(const Eigen::VectorXd& features) const {
  Eigen::Index best;
  (W * features + b).maxCoeff(&best);
  return static_cast<int>(best);
}

SoftmaxModel train_softmax(const FeatureMatrix& data, double lr, int epochs, int batch_size,
                           std::uint64_t seed, bool shuffle) {
  if (data.count() == 0) throw std::invalid_argument("empty training data");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  const Eigen::Index n = data.count();
  const Eigen::Index d = data.dim();
  const int classes = data.classes;

  SoftmaxModel m;
  m.W = Eigen::MatrixXd::Zero(classes, d);
  m.b = Eigen::VectorXd::Zero(classes);

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "softmax-train"));

  Eigen::MatrixXd gW(classes, d);
  Eigen::VectorXd gb(classes);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    if (shuffle) rng.shuffle(order);
    for (Eigen::Index start = 0; start < n; start += batch_size) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + batch_size, n);
      gW.setZero();
      gb.setZero();
      for (Eigen::Index k = start; k < stop; ++k) {
        const int idx = order[static_cast<std::size_t>(k)];
        const Eigen::VectorXd x = data.X.row(idx).transpose();
        Eigen::VectorXd logits = m.W * x + m.b;
        logits.array() -= logits.maxCoeff();
        Eigen::VectorXd p = logits.array().exp();
        p /= p.sum();
        p[data.y[static_cast<std::size_t>(idx)]] -= 1.0;
        gW.noalias() += p * x.transpose();
        gb += p;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      m.W.noalias() -= lr * inv * gW;
      m.b -= lr * inv * gb;
    }
  }
  return m;
}

double accuracy(const SoftmaxModel& model, const FeatureMatrix& data) {
  if (data.count() == 0) throw std::invalid_argument("empty evaluation data");
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < data.count(); ++i) {
    if (model.predict(data.X.row(i).transpose()) == data.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.count());
}

double linear_probe_accuracy(const FeatureMatrix& train, const FeatureMatrix& test, double lr,
                             int epochs, std::uint64_t seed) {
  const SoftmaxModel probe = train_softmax(train, lr, epochs, 1 << 30, seed, false);
  return accuracy(probe, test);
}

}  // namespace microt
