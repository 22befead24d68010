#pragma once

#include "microt/data.hpp"
#include "microt/losses.hpp"
#include "microt/net.hpp"
#include "microt/rng.hpp"

#include <cstdint>
#include <vector>

namespace microt {

struct AugmentSpec {
  double crop_min = 0.7;  // crop side as a fraction of the image side
  double crop_max = 1.0;
  double flip_prob = 0.5;
  double noise_sigma = 0.05;
};

/// Random crop-and-resize + horizontal flip + additive gaussian noise for
/// [C,H,W] images; vectors only receive the noise term.
Tensor augment(const Tensor& x, const AugmentSpec& spec, Rng& rng);

struct SslConfig {
  double tau_guide = 0.04;
  double tau_explore = 0.1;
  double ema_momentum = 0.996;
  AugmentSpec augment;
  int epochs = 10;
  double lr = 0.01;
};

void validate(const SslConfig& cfg);

/// Two same-architecture models: the guide smooths the exploration model's
/// history through an EMA and serves as the distillation teacher afterwards.
struct TeacherPair {
  BlockNet guide;
  BlockNet explore;
};

TeacherPair make_teacher_pair(const NetSpec& spec, std::uint64_t seed);

/// guide' = m * guide + (1-m) * explore, parameter-wise; explore untouched.
TeacherPair ema_update(TeacherPair pair, double m);

/// Guide/exploration training: every step draws two augmented views of one
/// sample, descends the agreement loss on the exploration model only, then
/// folds it into the guide. Returns the guide as the teacher.
BlockNet train_teacher(const Dataset& data, const NetSpec& arch, const SslConfig& cfg,
                       std::uint64_t seed);

struct EmbeddingEntry {
  std::uint32_t id = 0;
  std::uint32_t label = 0;
  Tensor embedding;
};

struct EmbeddingDataset {
  int width = 0;
  std::vector<EmbeddingEntry> records;
};

/// Pre-head teacher features over the dataset, order-preserving, one record
/// per input. The teacher must carry a (removable) head.
EmbeddingDataset extract_embeddings(const BlockNet& teacher, const Dataset& data);

struct DistillConfig {
  double alpha = 1.0;
  double beta = 1.0;  // part-model feature weight, joint training only
  int epochs = 10;
  double lr = 0.01;
  int head_classes = 0;  // classifier width used during (joint) distillation
};

void validate(const DistillConfig& cfg);

/// Feature distillation (teacher MSE through a matching layer + label CE on a
/// temporary head). Matching layer and head are dropped from the returned
/// student, whose feature width stays the student's own.
BlockNet run_distillation(BlockNet student, const EmbeddingDataset& emb, const Dataset& raw,
                          const DistillConfig& cfg, std::uint64_t seed);

/// Part/full fine-tuning around a fixed split: one pass per sample feeds both
/// the boundary (part) branch and the final (full) branch; each branch has its
/// own matching layer and temporary head, removed afterwards.
BlockNet joint_train(BlockNet extractor, int split_index, const EmbeddingDataset& emb,
                     const Dataset& raw, const DistillConfig& cfg, std::uint64_t seed);

}  // namespace microt
