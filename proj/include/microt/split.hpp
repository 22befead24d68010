#pragma once

#include "microt/data.hpp"
#include "microt/net.hpp"
#include "microt/train.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace microt {

/// Everything computed for one candidate prefix (candidate index = number of
/// blocks kept). Raw series are collected first; normalization runs across
/// the whole candidate set afterwards.
struct CandidateMetrics {
  int index = 0;
  double accuracy = 0.0;       // A_i
  std::int64_t macs = 0;       // M_i
  double delta_acc = 0.0;      // A_i - A_{i-1}; 0 at the first candidate
  std::int64_t delta_mac = 0;  // M_i - M_{i-1}; 0 at the first candidate
  double gain_raw = 0.0;       // dA/dM; +inf when dM == 0; unused at the first
  double gain_norm = 0.0;      // first candidate pinned to 0
  double acc_loss_raw = 0.0;   // R_A = (A_full - A_i) / A_full
  double acc_loss_norm = 0.0;
  double mac_reduction_raw = 0.0;  // R_M = (M_full - M_i) / M_full
  double mac_reduction_norm = 0.0;
  double retained_norm = 0.0;  // 1 - R_A^norm, clamped at 0
  bool retained_clamped = false;
  double fused = 0.0;  // F_score
};

struct SplitRange {
  int lo = 0;  // inclusive candidate indices (prefix lengths)
  int hi = 0;
};

/// Default search window: 25% to 85% of the block count, so the part model is
/// neither trivial nor nearly the full model.
SplitRange default_split_range(int block_count);

struct SplitReport {
  std::vector<CandidateMetrics> candidates;
  int optimal_index = 0;
  SplitRange range;
  double full_accuracy = 0.0;
  std::int64_t full_macs = 0;
  std::string probe_note;  // records how A_i was measured
};

struct ProbeTrainer {
  double lr = 0.5;
  int epochs = 120;
  std::uint64_t seed = 1;
};

/// Harmonic-mean style composite 3xyz/(x+y+z) of retained accuracy, gain and
/// MAC reduction; 0 when the denominator vanishes. Arguments must be >= 0.
double fused_score(double one_minus_ra_norm, double gain_norm, double rm_norm);

/// (v - min)/(max - min) across the sequence. All-equal collapses to 0.5;
/// +inf entries (free-accuracy gain markers) pin to 1.
std::vector<double> min_max_normalize(const std::vector<double>& values);

/// Accuracy/MAC pairs for every candidate prefix: a fresh linear probe is
/// trained on the prefix's pooled features per candidate (independent seeds,
/// evaluated in parallel), MACs are the prefix count.
std::vector<std::pair<double, std::int64_t>> evaluate_candidates(
    const BlockNet& net, const Dataset& probe_train, const Dataset& probe_eval,
    const ProbeTrainer& trainer, const SplitRange& range);

/// Algorithm: collect raw A/M series over the candidate range, derive
/// dA, dM, G, R_A, R_M, normalize each series across candidates, score, and
/// return the argmax (first wins on ties; the first candidate competes with
/// gain pinned to 0).
SplitReport find_optimal_split(const BlockNet& net, const Dataset& probe_train,
                               const Dataset& probe_eval, const ProbeTrainer& trainer,
                               const SplitRange& range);

/// Score-only core over precomputed (A_i, M_i) series: the full pipeline above
/// minus probe training. Exposed for profile-level use and oracles.
SplitReport score_candidates(const std::vector<std::pair<double, std::int64_t>>& series,
                             double full_accuracy, std::int64_t full_macs,
                             const SplitRange& range);

void write_split_report_csv(const SplitReport& report, const std::string& path);

/// Reads back the optimal index echoed in the CSV footer comment.
int read_split_report_optimal(const std::string& path);

}  // namespace microt
