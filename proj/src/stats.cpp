// SPDX-License-Identifier: Apache-2.0

#include "gdg/stats.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>

#include "gdg/error.hpp"

namespace gdg::stats {

const char* mark_suffix(Mark m) {
  switch (m) {
    case Mark::kNone: return "";
    case Mark::kStar: return "*";
    case Mark::kStarStar: return "**";
  }
  return "";
}

Mark mark(double p_value) {
  if (p_value < 0.01) return Mark::kStarStar;
  if (p_value < 0.05) return Mark::kStar;
  return Mark::kNone;
}

std::pair<double, std::optional<double>> aggregate_runs(
    const RunResults& results, const std::string& metric) {
  if (results.reports.empty())
    fail(ErrorCode::kValidation, "no reports to aggregate");
  std::vector<double> xs;
  for (const auto& r : results.reports) {
    const auto it = r.values.find(metric);
    if (it == r.values.end())
      fail(ErrorCode::kValidation,
           "metric '" + metric + "' missing in run " + r.run_id);
    xs.push_back(it->second);
  }
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, std::nullopt};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

PooledSampleSet pool_even(const RunResults& results, std::size_t target_size,
                          std::uint64_t seed) {
  if (results.runs.empty()) fail(ErrorCode::kValidation, "no runs to pool");
  if (target_size == 0) fail(ErrorCode::kValidation, "empty pool requested");

  // index each run by dialog and check the runs cover the same dialogs
  std::vector<std::map<std::string, const metrics::GenerationEntry*>> index;
  for (const auto& run : results.runs) {
    std::map<std::string, const metrics::GenerationEntry*> m;
    for (const auto& e : run.entries) {
      if (!m.emplace(e.dialog_id, &e).second)
        fail(ErrorCode::kValidation,
             "duplicate dialog in run " + run.run_id + ": " + e.dialog_id);
    }
    if (!index.empty() && m.size() != index.front().size())
      fail(ErrorCode::kValidation, "runs cover different dialog sets");
    index.push_back(std::move(m));
  }

  std::vector<std::string> ids;
  for (const auto& [id, e] : index.front()) {
    for (const auto& m : index)
      if (!m.count(id))
        fail(ErrorCode::kValidation, "runs cover different dialog sets");
    ids.push_back(id);
  }

  Rng rng(seed);
  rng.shuffle(ids);
  if (ids.size() > target_size) ids.resize(target_size);

  PooledSampleSet pooled;
  pooled.system = results.system;
  for (std::size_t j = 0; j < ids.size(); ++j) {
    const std::size_t run = j % results.runs.size();
    PooledEntry pe;
    pe.entry = *index[run].at(ids[j]);
    pe.run_id = results.runs[run].run_id;
    pooled.entries.push_back(std::move(pe));
  }
  return pooled;
}

SignificanceResult bootstrap_test(const CorpusMetric& metric,
                                  const PooledSampleSet& a,
                                  const PooledSampleSet& b,
                                  std::size_t n_resamples,
                                  std::uint64_t seed) {
  if (n_resamples == 0) fail(ErrorCode::kConfig, "need at least one resample");
  if (n_resamples < 100)
    std::cerr << "warning: bootstrap with " << n_resamples
              << " resamples is unreliable\n";

  auto sorted = [](const PooledSampleSet& s) {
    std::vector<metrics::GenerationEntry> es;
    es.reserve(s.entries.size());
    for (const auto& pe : s.entries) es.push_back(pe.entry);
    std::sort(es.begin(), es.end(),
              [](const auto& x, const auto& y) {
                return x.dialog_id < y.dialog_id;
              });
    return es;
  };
  const auto ea = sorted(a);
  const auto eb = sorted(b);
  if (ea.size() != eb.size())
    fail(ErrorCode::kValidation, "pooled sets differ in size");
  for (std::size_t i = 0; i < ea.size(); ++i)
    if (ea[i].dialog_id != eb[i].dialog_id)
      fail(ErrorCode::kValidation, "pooled sets are not aligned by dialog");

  SignificanceResult res;
  res.test = "bootstrap";
  const double observed = metric(ea) - metric(eb);
  res.statistic = observed;
  if (observed == 0.0) {
    res.p_value = 1.0;
    res.mark = Mark::kNone;
    return res;
  }
  const double sign = observed > 0.0 ? 1.0 : -1.0;

  Rng rng(seed);
  const std::size_t n = ea.size();
  std::vector<metrics::GenerationEntry> ra(n), rb(n);
  std::size_t not_won = 0;
  for (std::size_t r = 0; r < n_resamples; ++r) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = static_cast<std::size_t>(rng.below(n));
      ra[i] = ea[j];
      rb[i] = eb[j];
    }
    const double delta = metric(ra) - metric(rb);
    if (delta * sign <= 0.0) ++not_won;
  }
  res.p_value = std::min(
      1.0, 2.0 * static_cast<double>(not_won) /
               static_cast<double>(n_resamples));
  res.mark = mark(res.p_value);
  return res;
}

// ---------------------------------------------------------------------------
// Student t distribution via the regularized incomplete beta function

namespace {

double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double bt = std::exp(std::lgamma(a + b) - std::lgamma(a) -
                             std::lgamma(b) + a * std::log(x) +
                             b * std::log(1.0 - x));
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  return regularized_incomplete_beta(dof / 2.0, 0.5,
                                     dof / (dof + t * t));
}

SignificanceResult paired_t_test(std::span<const double> a,
                                 std::span<const double> b) {
  if (a.size() != b.size())
    fail(ErrorCode::kValidation, "paired t-test needs equal length lists");
  const std::size_t n = a.size();
  if (n < 2) fail(ErrorCode::kValidation, "paired t-test needs n >= 2");

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += a[i] - b[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = (a[i] - b[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n - 1);  // sample variance

  SignificanceResult res;
  res.test = "t_test";
  if (var == 0.0) {
    if (mean == 0.0) {  // identical lists
      res.statistic = 0.0;
      res.p_value = 1.0;
      res.mark = Mark::kNone;
    } else {  // constant non-zero difference: limit case
      res.statistic = mean > 0.0 ? std::numeric_limits<double>::max()
                                 : -std::numeric_limits<double>::max();
      res.p_value = 0.0;
      res.mark = Mark::kStarStar;
    }
    return res;
  }
  const double t = mean / std::sqrt(var / static_cast<double>(n));
  res.statistic = t;
  res.p_value = student_t_two_sided_p(t, static_cast<double>(n - 1));
  res.mark = mark(res.p_value);
  return res;
}

namespace {

// sum_{i<=k} C(n,i) / 2^n, exact in integer arithmetic for n <= 62
double binomial_lower_cdf_half(std::size_t n, std::size_t k) {
  if (n <= 62) {
    std::uint64_t c = 1, sum = 0;
    for (std::size_t i = 0; i <= k; ++i) {
      sum += c;
      c = c * (n - i) / (i + 1);
    }
    return std::ldexp(static_cast<double>(sum), -static_cast<int>(n));
  }
  // log-space accumulation for large n
  double p = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double lg = std::lgamma(static_cast<double>(n + 1)) -
                      std::lgamma(static_cast<double>(i + 1)) -
                      std::lgamma(static_cast<double>(n - i + 1)) -
                      static_cast<double>(n) * std::log(2.0);
    p += std::exp(lg);
  }
  return p;
}

}  // namespace

SignificanceResult sign_test(std::size_t wins_a, std::size_t wins_b) {
  SignificanceResult res;
  res.test = "sign_test";
  res.statistic =
      static_cast<double>(wins_a) - static_cast<double>(wins_b);
  const std::size_t n = wins_a + wins_b;
  if (n == 0) {  // no discordant pairs, no evidence either way
    res.p_value = 1.0;
    res.mark = Mark::kNone;
    return res;
  }
  const std::size_t k = std::min(wins_a, wins_b);
  res.p_value = std::min(1.0, 2.0 * binomial_lower_cdf_half(n, k));
  res.mark = mark(res.p_value);
  return res;
}

}  // namespace gdg::stats
