#include "microt/split.hpp"

#include "microt/csv.hpp"
#include "microt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <stdexcept>

namespace microt {

SplitRange default_split_range(int block_count) {
  SplitRange r;
  r.lo = std::max(1, static_cast<int>(std::lround(0.25 * block_count)));
  r.hi = std::min(block_count, static_cast<int>(std::lround(0.85 * block_count)));
  if (r.hi <= r.lo) r.hi = std::min(block_count, r.lo + 1);
  return r;
}

double fused_score(double one_minus_ra_norm, double gain_norm, double rm_norm) {
  if (one_minus_ra_norm < 0 || gain_norm < 0 || rm_norm < 0)
    throw std::invalid_argument("fused_score arguments must be nonnegative");
  const double denom = one_minus_ra_norm + gain_norm + rm_norm;
  if (denom == 0.0) return 0.0;
  return 3.0 * one_minus_ra_norm * gain_norm * rm_norm / denom;
}

std::vector<double> min_max_normalize(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("min_max_normalize on empty sequence");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (std::isinf(v)) {
      out[i] = v > 0 ? 1.0 : 0.0;
    } else if (!(hi > lo)) {
      out[i] = 0.5;  // degenerate span (all equal, or a single finite value)
    } else {
      out[i] = (v - lo) / (hi - lo);
    }
  }
  return out;
}

std::vector<std::pair<double, std::int64_t>> evaluate_candidates(
    const BlockNet& net, const Dataset& probe_train, const Dataset& probe_eval,
    const ProbeTrainer& trainer, const SplitRange& range) {
  const int n = static_cast<int>(net.blocks.size());
  if (range.lo < 1 || range.hi > n || range.lo > range.hi)
    throw std::out_of_range("candidate range [" + std::to_string(range.lo) + ", " +
                            std::to_string(range.hi) + "] outside 1.." + std::to_string(n));
  if (probe_train.inputs.empty() || probe_eval.inputs.empty())
    throw std::invalid_argument("probe datasets must be nonempty");

  const Shape in_shape = probe_train.sample_shape;
  const int count = range.hi - range.lo + 1;
  std::vector<std::pair<double, std::int64_t>> out(static_cast<std::size_t>(count));

  // Candidates are independent; evaluate them concurrently, each with its own
  // probe seed. Results land by index, so completion order is irrelevant.
  std::vector<std::future<void>> jobs;
  for (int k = 0; k < count; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k]() {
      const int idx = range.lo + k;
      auto [prefix, rest] = split_model(net, idx);
      const FeatureMatrix ftrain = extract_feature_matrix(prefix, probe_train);
      const FeatureMatrix feval = extract_feature_matrix(prefix, probe_eval);
      const double acc = linear_probe_accuracy(ftrain, feval, trainer.lr, trainer.epochs,
                                               derive_seed(trainer.seed, "probe", idx));
      out[static_cast<std::size_t>(k)] = {acc, mac_count(prefix, in_shape)};
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

SplitReport score_candidates(const std::vector<std::pair<double, std::int64_t>>& series,
                             double full_accuracy, std::int64_t full_macs,
                             const SplitRange& range) {
  if (series.size() < 2) throw std::invalid_argument("need at least 2 split candidates");
  if (full_accuracy <= 0) throw std::invalid_argument("full accuracy must be positive");
  if (full_macs <= 0) throw std::invalid_argument("full MACs must be positive");

  SplitReport rep;
  rep.range = range;
  rep.full_accuracy = full_accuracy;
  rep.full_macs = full_macs;

  const std::size_t n = series.size();
  std::vector<double> gains(n, 0.0), acc_loss(n, 0.0), mac_red(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    CandidateMetrics m;
    m.index = range.lo + static_cast<int>(k);
    m.accuracy = series[k].first;
    m.macs = series[k].second;
    if (k > 0) {
      m.delta_acc = series[k].first - series[k - 1].first;
      m.delta_mac = series[k].second - series[k - 1].second;
      m.gain_raw = m.delta_mac == 0 ? std::numeric_limits<double>::infinity()
                                    : m.delta_acc / static_cast<double>(m.delta_mac);
    }
    m.acc_loss_raw = (full_accuracy - m.accuracy) / full_accuracy;
    m.mac_reduction_raw =
        static_cast<double>(full_macs - m.macs) / static_cast<double>(full_macs);
    gains[k] = m.gain_raw;
    acc_loss[k] = m.acc_loss_raw;
    mac_red[k] = m.mac_reduction_raw;
    rep.candidates.push_back(m);
  }

  // The first candidate has no predecessor: its gain is undefined upstream,
  // so it enters the argmax with normalized gain 0 instead of being dropped.
  std::vector<double> gain_tail(gains.begin() + 1, gains.end());
  const std::vector<double> gain_norm_tail = min_max_normalize(gain_tail);
  const std::vector<double> acc_loss_norm = min_max_normalize(acc_loss);
  const std::vector<double> mac_red_norm = min_max_normalize(mac_red);

  for (std::size_t k = 0; k < n; ++k) {
    CandidateMetrics& m = rep.candidates[k];
    m.gain_norm = k == 0 ? 0.0 : gain_norm_tail[k - 1];
    m.acc_loss_norm = acc_loss_norm[k];
    m.mac_reduction_norm = mac_red_norm[k];
    double retained = 1.0 - m.acc_loss_norm;
    if (retained < 0) {
      retained = 0.0;
      m.retained_clamped = true;
    }
    m.retained_norm = retained;
    m.fused = fused_score(m.retained_norm, m.gain_norm, m.mac_reduction_norm);
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k)
    if (rep.candidates[k].fused > rep.candidates[best].fused) best = k;
  rep.optimal_index = rep.candidates[best].index;
  return rep;
}

SplitReport find_optimal_split(const BlockNet& net, const Dataset& probe_train,
                               const Dataset& probe_eval, const ProbeTrainer& trainer,
                               const SplitRange& range) {
  if (range.hi - range.lo + 1 < 2) throw std::invalid_argument("need at least 2 split candidates");
  const auto series = evaluate_candidates(net, probe_train, probe_eval, trainer, range);

  // Full-model reference: the whole block stack with a probe head of its own.
  const FeatureMatrix ftrain = extract_feature_matrix(net, probe_train);
  const FeatureMatrix feval = extract_feature_matrix(net, probe_eval);
  const double full_acc = linear_probe_accuracy(ftrain, feval, trainer.lr, trainer.epochs,
                                                derive_seed(trainer.seed, "probe-full"));
  const std::int64_t full_macs = mac_count(net, probe_train.sample_shape);

  SplitReport rep = score_candidates(series, full_acc, full_macs, range);
  rep.probe_note = "accuracy from a freshly trained linear probe on pooled prefix features";
  return rep;
}

void write_split_report_csv(const SplitReport& report, const std::string& path) {
  CsvWriter csv(path);
  csv.comment("probe: " + report.probe_note);
  csv.comment("full_accuracy," + csv_double(report.full_accuracy) + ",full_macs," +
              std::to_string(report.full_macs));
  csv.row(
      "index,accuracy,macs,delta_acc,delta_mac,gain_raw,gain_norm,acc_loss_raw,acc_loss_norm,"
      "mac_reduction_raw,mac_reduction_norm,retained_norm,retained_clamped,fused_score");
  for (const CandidateMetrics& m : report.candidates) {
    csv.fields(m.index, csv_double(m.accuracy), m.macs, csv_double(m.delta_acc), m.delta_mac,
               csv_double(m.gain_raw), csv_double(m.gain_norm), csv_double(m.acc_loss_raw),
               csv_double(m.acc_loss_norm), csv_double(m.mac_reduction_raw),
               csv_double(m.mac_reduction_norm), csv_double(m.retained_norm),
               m.retained_clamped ? 1 : 0, csv_double(m.fused));
  }
  csv.comment("optimal_index," + std::to_string(report.optimal_index));
}

int read_split_report_optimal(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open split report: " + path);
  std::string line;
  int found = -1;
  while (std::getline(in, line)) {
    const std::string tag = "# optimal_index,";
    if (line.rfind(tag, 0) == 0) found = std::stoi(line.substr(tag.size()));
  }
  if (found < 0) throw std::runtime_error("split report has no optimal_index footer: " + path);
  return found;
}

}  // namespace microt
