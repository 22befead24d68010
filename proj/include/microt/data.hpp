#pragma once

#include "microt/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace microt {

struct Dataset {
  std::vector<Tensor> inputs;
  std::vector<int> labels;
  int classes = 0;
  Shape sample_shape;

  std::size_t size() const { return inputs.size(); }
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// A loaded dataset with disjoint train/val/test splits covering the data.
struct DatasetHandle {
  Dataset train;
  Dataset val;
  Dataset test;
  int classes = 0;
  Shape sample_shape;
  std::string preprocessing;  // recorded so device-side preprocessing can match
};

/// Generator for the bundled synthetic image data: each class is a smooth
/// multi-blob template; samples are shifted, contrast-jittered, noisy copies.
/// Distinct template_seed values give distinct distributions, which is how
/// the "cloud" and "local" datasets differ.
struct SyntheticSpec {
  int classes = 6;
  int samples_per_class = 200;
  int image = 16;  // square, single channel
  int blobs_per_class = 3;
  double noise = 0.22;
  int max_shift = 3;
  double contrast_lo = 0.7;
  double contrast_hi = 1.3;
  std::uint64_t template_seed = 1;
};

Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t sample_seed);

/// Seeded shuffle then contiguous 8:1:1 (by default) assignment; identical
/// (data, seed) always yields identical split membership.
DatasetHandle split_dataset(Dataset all, const SplitRatios& ratios, std::uint64_t seed,
                            std::string preprocessing = "");

/// IDX (big-endian) image/label pair, pixel values normalized to [0,1].
DatasetHandle ingest_idx(const std::string& images_path, const std::string& labels_path,
                         const SplitRatios& ratios, std::uint64_t seed);

/// Header CSV with numeric feature columns and a final label column; features
/// min-max normalized per column to [0,1].
DatasetHandle ingest_csv(const std::string& path, const SplitRatios& ratios, std::uint64_t seed);

Dataset concat(const Dataset& a, const Dataset& b);

/// Deterministic subsample without replacement.
Dataset take(const Dataset& d, const std::vector<int>& indices);

}  // namespace microt
