#include "microt/distill.hpp"

#include "microt/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace microt {

namespace {

double bilinear_at(const Tensor& x, int c, double fy, double fx, int h, int w) {
  const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, h - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double wy = std::clamp(fy - y0, 0.0, 1.0);
  const double wx = std::clamp(fx - x0, 0.0, 1.0);
  auto at = [&](int yy, int xx) {
    return x.data[(static_cast<Eigen::Index>(c) * h + yy) * w + xx];
  };
  return (1 - wy) * ((1 - wx) * at(y0, x0) + wx * at(y0, x1)) +
         wy * ((1 - wx) * at(y1, x0) + wx * at(y1, x1));
}

}  // namespace

Tensor augment(const Tensor& x, const AugmentSpec& spec, Rng& rng) {
  Tensor out = x;
  if (x.rank() == 3) {
    const int c = x.shape[0], h = x.shape[1], w = x.shape[2];
    const double frac = rng.uniform(spec.crop_min, spec.crop_max);
    const int ch = std::max(1, static_cast<int>(std::lround(frac * h)));
    const int cw = std::max(1, static_cast<int>(std::lround(frac * w)));
    const int oy = ch < h ? static_cast<int>(rng.below(h - ch + 1)) : 0;
    const int ox = cw < w ? static_cast<int>(rng.below(w - cw + 1)) : 0;
    const bool flip = rng.bernoulli(spec.flip_prob);

    const double sy = static_cast<double>(ch) / h;
    const double sx = static_cast<double>(cw) / w;
    for (int ci = 0; ci < c; ++ci) {
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          const int dst_x = flip ? (w - 1 - xx) : xx;
          const double fy = oy + (y + 0.5) * sy - 0.5;
          const double fx = ox + (xx + 0.5) * sx - 0.5;
          out.data[(static_cast<Eigen::Index>(ci) * h + y) * w + dst_x] =
              bilinear_at(x, ci, fy, fx, h, w);
        }
      }
    }
  }
  if (spec.noise_sigma > 0) {
    for (Eigen::Index i = 0; i < out.data.size(); ++i)
      out.data[i] += spec.noise_sigma * rng.normal();
  }
  return out;
}

void validate(const SslConfig& cfg) {
  if (cfg.tau_guide <= 0 || cfg.tau_explore <= 0)
    throw std::invalid_argument("ssl temperatures must be positive");
  if (cfg.ema_momentum < 0 || cfg.ema_momentum >= 1)
    throw std::invalid_argument("ema momentum must lie in [0,1)");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
}

void validate(const DistillConfig& cfg) {
  if (cfg.alpha < 0 || cfg.beta < 0 || !std::isfinite(cfg.alpha) || !std::isfinite(cfg.beta))
    throw std::invalid_argument("alpha/beta must be finite and nonnegative");
  if (cfg.epochs < 0) throw std::invalid_argument("epochs must be nonnegative");
}

TeacherPair make_teacher_pair(const NetSpec& spec, std::uint64_t seed) {
  TeacherPair pair;
  pair.explore = seeded_init(spec, seed);
  pair.guide = pair.explore;
  return pair;
}

namespace {

void check_same_arch(const BlockNet& a, const BlockNet& b) {
  if (a.blocks.size() != b.blocks.size())
    throw std::invalid_argument("teacher pair architecture mismatch (block count)");
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    if (a.blocks[i].kind != b.blocks[i].kind ||
        !same_shape(a.blocks[i].weight.shape, b.blocks[i].weight.shape))
      throw std::invalid_argument("teacher pair architecture mismatch at block " +
                                  std::to_string(i));
  }
  if (a.head.has_value() != b.head.has_value() ||
      (a.head && !same_shape(a.head->dense.weight.shape, b.head->dense.weight.shape)))
    throw std::invalid_argument("teacher pair architecture mismatch (head)");
}

}  // namespace

TeacherPair ema_update(TeacherPair pair, double m) {
  if (m < 0 || m >= 1) throw std::invalid_argument("ema momentum must lie in [0,1)");
  check_same_arch(pair.guide, pair.explore);
  for (std::size_t i = 0; i < pair.guide.blocks.size(); ++i) {
    Block& g = pair.guide.blocks[i];
    if (!g.has_params()) continue;
    const Block& e = pair.explore.blocks[i];
    g.weight.data = m * g.weight.data + (1 - m) * e.weight.data;
    g.bias.data = m * g.bias.data + (1 - m) * e.bias.data;
  }
  if (pair.guide.head) {
    Block& g = pair.guide.head->dense;
    const Block& e = pair.explore.head->dense;
    g.weight.data = m * g.weight.data + (1 - m) * e.weight.data;
    g.bias.data = m * g.bias.data + (1 - m) * e.bias.data;
  }
  return pair;
}

BlockNet train_teacher(const Dataset& data, const NetSpec& arch, const SslConfig& cfg,
                       std::uint64_t seed) {
  validate(cfg);
  if (data.inputs.empty()) throw std::invalid_argument("train_teacher on empty dataset");
  if (!arch.head || arch.head->apply_softmax)
    throw std::invalid_argument("ssl architecture needs a logit head (dense, no softmax)");

  TeacherPair pair = make_teacher_pair(arch, seed);
  Rng rng(derive_seed(seed, "ssl"));

  std::vector<int> order(data.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int idx : order) {
      const Tensor& raw = data.inputs[static_cast<std::size_t>(idx)];
      const Tensor view_guide = augment(raw, cfg.augment, rng);
      const Tensor view_explore = augment(raw, cfg.augment, rng);

      const Tensor guide_logits = forward(pair.guide, view_guide).output;
      const ForwardResult er = forward(pair.explore, view_explore);

      const double loss = ssl_loss(guide_logits, er.output, cfg.tau_guide, cfg.tau_explore);
      if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "ssl training diverged: non-finite loss at epoch " << epoch << ", sample " << idx;
        throw std::runtime_error(os.str());
      }
      const Tensor g = ssl_loss_grad(guide_logits, er.output, cfg.tau_guide, cfg.tau_explore);
      const GradientTape tape = backward(pair.explore, g, er);
      sgd_step_inplace(pair.explore, tape, cfg.lr);
      pair = ema_update(std::move(pair), cfg.ema_momentum);
    }
  }
  return pair.guide;
}

EmbeddingDataset extract_embeddings(const BlockNet& teacher, const Dataset& data) {
  if (!teacher.head)
    throw std::invalid_argument("teacher has no removable head; embeddings are taken before it");
  EmbeddingDataset out;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    Tensor feat = pool_features(forward(teacher, data.inputs[i]).features);
    if (i == 0) out.width = static_cast<int>(feat.size());
    EmbeddingEntry e;
    e.id = static_cast<std::uint32_t>(i);
    e.label = static_cast<std::uint32_t>(data.labels[i]);
    e.embedding = std::move(feat);
    out.records.push_back(std::move(e));
  }
  return out;
}

namespace {

struct AuxLayer {
  Block dense;

  void step(const ParamGrad& g, double lr) {
    dense.weight.data -= lr * g.weight.data;
    dense.bias.data -= lr * g.bias.data;
  }
};

AuxLayer make_aux(int in, int out, Rng& rng) {
  AuxLayer a;
  a.dense = dense_block(in, out);
  const double bound = std::sqrt(6.0 / (in + out));
  for (Eigen::Index i = 0; i < a.dense.weight.data.size(); ++i)
    a.dense.weight.data[i] = rng.uniform(-bound, bound);
  return a;
}

void check_divergence(double loss, const char* what, int epoch, int sample) {
  if (std::isfinite(loss)) return;
  std::ostringstream os;
  os << what << " diverged: non-finite loss at epoch " << epoch << ", sample " << sample;
  throw std::runtime_error(os.str());
}

}  // namespace

BlockNet run_distillation(BlockNet student, const EmbeddingDataset& emb, const Dataset& raw,
                          const DistillConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (student.head) throw std::invalid_argument("student must be a headless feature extractor");
  if (emb.records.size() != raw.inputs.size())
    throw std::invalid_argument("embedding dataset does not cover the raw dataset");
  const int classes = cfg.head_classes > 0 ? cfg.head_classes : raw.classes;

  const Tensor probe = pool_features(forward(student, raw.inputs.at(0)).features);
  const int p_width = static_cast<int>(probe.size());

  Rng rng(derive_seed(seed, "distill"));
  AuxLayer matching = make_aux(p_width, emb.width, rng);
  AuxLayer tmp_head = make_aux(emb.width, classes, rng);

  std::vector<int> order(raw.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int idx : order) {
      const Tensor& q = emb.records[static_cast<std::size_t>(idx)].embedding;
      const int label = raw.labels[static_cast<std::size_t>(idx)];

      const ForwardResult fr = forward(student, raw.inputs[static_cast<std::size_t>(idx)]);
      const Tensor feat = pool_features(fr.features);
      const Tensor matched = block_forward(matching.dense, feat);
      const Tensor logits = block_forward(tmp_head.dense, matched);

      const double loss = distill_loss(matched, q, logits, label, cfg.alpha);
      check_divergence(loss, "distillation", epoch, idx);

      ParamGrad g_head;
      Tensor d_matched =
          block_backward(tmp_head.dense, matched, logits, softmax_ce_grad(logits, label), &g_head);
      d_matched.data += cfg.alpha * mse_grad(matched, q).data;
      ParamGrad g_match;
      Tensor d_feat = block_backward(matching.dense, feat, matched, d_matched, &g_match);
      if (fr.features.rank() == 3)
        d_feat = block_backward(gap_block(), fr.features, feat, d_feat, nullptr);

      const GradientTape tape = backward(student, d_feat, fr);
      sgd_step_inplace(student, tape, cfg.lr);
      matching.step(g_match, cfg.lr);
      tmp_head.step(g_head, cfg.lr);
    }
  }
  // The matching layer and temporary head never become part of the student.
  return student;
}

BlockNet joint_train(BlockNet extractor, int split_index, const EmbeddingDataset& emb,
                     const Dataset& raw, const DistillConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (extractor.head) throw std::invalid_argument("extractor must be headless");
  if (split_index <= 0 || split_index > static_cast<int>(extractor.blocks.size()))
    throw std::out_of_range("joint_train split index outside the block range");
  if (emb.records.size() != raw.inputs.size())
    throw std::invalid_argument("embedding dataset does not cover the raw dataset");
  const int classes = cfg.head_classes > 0 ? cfg.head_classes : raw.classes;

  const ForwardResult probe = forward(extractor, raw.inputs.at(0));
  const int full_width = static_cast<int>(pool_features(probe.features).size());
  const int part_width =
      static_cast<int>(pool_features(probe.activations[static_cast<std::size_t>(split_index)]).size());

  Rng rng(derive_seed(seed, "joint"));
  AuxLayer match_full = make_aux(full_width, emb.width, rng);
  AuxLayer match_part = make_aux(part_width, emb.width, rng);
  AuxLayer head_full = make_aux(emb.width, classes, rng);
  AuxLayer head_part = make_aux(emb.width, classes, rng);

  std::vector<int> order(raw.inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    for (int idx : order) {
      const Tensor& q = emb.records[static_cast<std::size_t>(idx)].embedding;
      const int label = raw.labels[static_cast<std::size_t>(idx)];

      const ForwardResult fr = forward(extractor, raw.inputs[static_cast<std::size_t>(idx)]);
      const Tensor& boundary = fr.activations[static_cast<std::size_t>(split_index)];
      const Tensor part_feat = pool_features(boundary);
      const Tensor full_feat = pool_features(fr.features);

      const Tensor p_part = block_forward(match_part.dense, part_feat);
      const Tensor p_full = block_forward(match_full.dense, full_feat);
      const Tensor logit_part = block_forward(head_part.dense, p_part);
      const Tensor logit_full = block_forward(head_full.dense, p_full);

      const double loss =
          joint_loss(p_part, p_full, q, logit_part, logit_full, label, cfg.alpha, cfg.beta);
      check_divergence(loss, "joint training", epoch, idx);

      // Full branch to the extractor output.
      ParamGrad g_hf;
      Tensor dp_full = block_backward(head_full.dense, p_full, logit_full,
                                      softmax_ce_grad(logit_full, label), &g_hf);
      dp_full.data += cfg.alpha * mse_grad(p_full, q).data;
      ParamGrad g_mf;
      Tensor d_full_feat = block_backward(match_full.dense, full_feat, p_full, dp_full, &g_mf);
      Tensor dy = fr.features.rank() == 3
                      ? block_backward(gap_block(), fr.features, full_feat, d_full_feat, nullptr)
                      : d_full_feat;

      // Part branch to the boundary activation.
      ParamGrad g_hp;
      Tensor dp_part = block_backward(head_part.dense, p_part, logit_part,
                                      softmax_ce_grad(logit_part, label), &g_hp);
      dp_part.data += cfg.beta * mse_grad(p_part, q).data;
      ParamGrad g_mp;
      Tensor d_part_feat = block_backward(match_part.dense, part_feat, p_part, dp_part, &g_mp);
      Tensor d_boundary = boundary.rank() == 3
                              ? block_backward(gap_block(), boundary, part_feat, d_part_feat,
                                               nullptr)
                              : d_part_feat;

      const GradientTape tape =
          backward_with_boundary_grad(extractor, dy, split_index, d_boundary, fr);

      sgd_step_inplace(extractor, tape, cfg.lr);
      match_full.step(g_mf, cfg.lr);
      match_part.step(g_mp, cfg.lr);
      head_full.step(g_hf, cfg.lr);
      head_part.step(g_hp, cfg.lr);
    }
  }
  return extractor;
}

}  // namespace microt
