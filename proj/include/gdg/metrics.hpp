// SPDX-License-Identifier: Apache-2.0
//
// Evaluation metrics: perplexity, corpus-level BLEU-2, unigram F1, grounding
// overlap F1 and the strategy match ratio, plus per-run and aggregate
// reports.

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdg/corpus.hpp"
#include "gdg/model.hpp"
#include "gdg/text.hpp"

namespace gdg::metrics {

// One generated response next to its reference and grounding.
struct GenerationEntry {
  std::string dialog_id;
  std::string hypothesis;
  std::string reference;
  corpus::GroundingSource gs;
  std::optional<std::string> designated_strategy;
};

struct GenerationSet {
  std::string run_id;
  std::string task;
  std::vector<GenerationEntry> entries;
};

// Corpus-level BLEU with bigram cap, scaled to [0, 100]. Uses clipped
// (modified) n-gram precision, the geometric mean of unigram and bigram
// precision, and brevity penalty exp(1 - r/c) when the hypothesis side is
// shorter. No smoothing: zero bigram matches anywhere means 0.
double corpus_bleu2(std::span<const std::string> hypotheses,
                    std::span<const std::string> references);

// Unigram overlap F1 on multiset token counts, in [0, 1]. Both sides empty
// is 1, exactly one side empty is 0.
double unigram_f1(const std::string& hypothesis, const std::string& reference);

// Unigram F1 between the hypothesis and the concatenated grounding items,
// computed on non stop words only. Strategy grounding is an error.
double grounding_f1(const std::string& hypothesis,
                    const corpus::GroundingSource& gs,
                    const text::StopWordList& stopwords);

// Maps a response to one of the strategy names or "others".
class StrategyClassifier {
 public:
  virtual ~StrategyClassifier() = default;
  virtual std::string classify(const std::string& response) const = 0;
};

// Transparent keyword table stand-in for a trained classifier.
class KeywordStrategyClassifier : public StrategyClassifier {
 public:
  std::string classify(const std::string& response) const override;
};

// Share of generations whose classified strategy equals the designated one,
// in [0, 100]. Samples designated "others" are excluded from the
// denominator; an empty denominator is an error.
double match_ratio(const GenerationSet& gen, const StrategyClassifier& clf);

// exp(total masked nll / total masked tokens) over assembled inputs.
double perplexity(const model::Backend& backend,
                  std::span<const prompting::AssembledInput> inputs);

struct MetricReport {
  std::string run_id;
  std::string task;
  // keys: "ppl", "bleu2", "f1", "grounding_f1", "match_ratio" (subset
  // depends on the task); f1 values live in [0, 1], bleu2 and match_ratio
  // in [0, 100]
  std::map<std::string, double> values;
  std::size_t evaluated = 0;
  std::size_t excluded = 0;
};

struct EvalOptions {
  const text::StopWordList* stopwords = nullptr;      // builtin when null
  const StrategyClassifier* classifier = nullptr;     // keyword stub when null
  std::optional<double> ppl;  // computed externally, copied into the report
};

MetricReport evaluate_run(const GenerationSet& gen, const EvalOptions& opts);

struct AggregateReport {
  std::string task;
  std::size_t n_runs = 0;
  std::map<std::string, double> mean;
  std::map<std::string, double> stddev;  // empty when n_runs < 2
  std::vector<MetricReport> runs;
};

// Mean and population standard deviation per metric. All runs must share the
// task and the metric key set.
AggregateReport aggregate(std::span<const MetricReport> runs);

}  // namespace gdg::metrics
