// SPDX-License-Identifier: Apache-2.0
//
// Aggregation across runs and the three significance tests used to compare
// two systems: paired bootstrap resampling (corpus BLEU), two sided paired
// Student t-test (per sample F1 scores) and the two sided sign test (match
// indicators). Stars: ** for p < 0.01, * for p < 0.05, both strict.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdg/metrics.hpp"
#include "gdg/rng.hpp"

namespace gdg::stats {

// All generation sets of one system over the same test dialogs.
struct RunResults {
  std::string system;
  std::vector<metrics::GenerationSet> runs;
  std::vector<metrics::MetricReport> reports;  // aligned with runs
};

struct PooledEntry {
  metrics::GenerationEntry entry;
  std::string run_id;
};

// One hypothesis per test dialog, drawn evenly across runs.
struct PooledSampleSet {
  std::string system;
  std::vector<PooledEntry> entries;
};

enum class Mark { kNone, kStar, kStarStar };

const char* mark_suffix(Mark m);  // "", "*", "**"
Mark mark(double p_value);

struct SignificanceResult {
  std::string test;       // "bootstrap", "t_test", "sign_test"
  double statistic = 0.0;
  double p_value = 1.0;
  Mark mark = Mark::kNone;
};

// Mean and population standard deviation of one metric across the reports.
// The deviation is absent for a single run.
std::pair<double, std::optional<double>> aggregate_runs(
    const RunResults& results, const std::string& metric);

// Draws target_size distinct dialog ids (all of them when target_size is
// larger) and takes each id's hypothesis from one run, round robin over a
// shuffled id order, so run counts differ by at most one and no dialog
// repeats. Two systems pooled with equal seeds stay aligned by dialog.
PooledSampleSet pool_even(const RunResults& results, std::size_t target_size,
                          std::uint64_t seed);

using CorpusMetric =
    std::function<double(std::span<const metrics::GenerationEntry>)>;

// Paired bootstrap: resamples dialogs with replacement n_resamples times and
// counts how often the observed winner fails to win. Reports
// p = min(1, 2 * that fraction). An observed tie is p = 1 without resampling.
SignificanceResult bootstrap_test(const CorpusMetric& metric,
                                  const PooledSampleSet& a,
                                  const PooledSampleSet& b,
                                  std::size_t n_resamples, std::uint64_t seed);

// Two sided paired t-test on per-sample score lists.
SignificanceResult paired_t_test(std::span<const double> a,
                                 std::span<const double> b);

// Two sided exact sign test given the win counts (ties already dropped).
SignificanceResult sign_test(std::size_t wins_a, std::size_t wins_b);

// Exposed for the oracle tests.
double student_t_two_sided_p(double t, double dof);
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace gdg::stats
