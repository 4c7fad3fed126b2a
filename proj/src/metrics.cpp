// SPDX-License-Identifier: Apache-2.0

#include "gdg/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iostream>
#include <map>

#include "gdg/error.hpp"

namespace gdg::metrics {

namespace {

using TokenCounts = std::map<std::string, std::size_t>;
using BigramCounts = std::map<std::pair<std::string, std::string>, std::size_t>;

TokenCounts unigram_counts(const std::vector<std::string>& toks) {
  TokenCounts c;
  for (const auto& t : toks) ++c[t];
  return c;
}

BigramCounts bigram_counts(const std::vector<std::string>& toks) {
  BigramCounts c;
  for (std::size_t i = 0; i + 1 < toks.size(); ++i)
    ++c[{toks[i], toks[i + 1]}];
  return c;
}

template <class Counts>
std::size_t clipped_overlap(const Counts& hyp, const Counts& ref) {
  std::size_t n = 0;
  for (const auto& [key, cnt] : hyp) {
    const auto it = ref.find(key);
    if (it != ref.end()) n += std::min(cnt, it->second);
  }
  return n;
}

bool is_word_token(const std::string& tok) {
  const unsigned char c = static_cast<unsigned char>(tok[0]);
  return std::isalnum(c) != 0 || c >= 0x80;
}

std::vector<std::string> non_stop_tokens(const std::string& s,
                                         const text::StopWordList& stop) {
  std::vector<std::string> out;
  for (auto& t : text::word_tokenize(s))
    if (is_word_token(t) && !stop.contains(t)) out.push_back(std::move(t));
  return out;
}

double multiset_f1(const std::vector<std::string>& hyp,
                   const std::vector<std::string>& ref) {
  if (hyp.empty() && ref.empty()) return 1.0;
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto overlap = clipped_overlap(unigram_counts(hyp),
                                       unigram_counts(ref));
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(hyp.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace

double corpus_bleu2(std::span<const std::string> hypotheses,
                    std::span<const std::string> references) {
  if (hypotheses.size() != references.size())
    fail(ErrorCode::kValidation, "hypothesis/reference count mismatch");
  if (hypotheses.empty())
    fail(ErrorCode::kValidation, "empty evaluation set");

  std::size_t hyp_len = 0, ref_len = 0;
  std::size_t uni_match = 0, uni_total = 0;
  std::size_t bi_match = 0, bi_total = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto hyp = text::word_tokenize(hypotheses[i]);
    const auto ref = text::word_tokenize(references[i]);
    hyp_len += hyp.size();
    ref_len += ref.size();
    uni_total += hyp.size();
    uni_match += clipped_overlap(unigram_counts(hyp), unigram_counts(ref));
    if (hyp.size() > 1) bi_total += hyp.size() - 1;
    bi_match += clipped_overlap(bigram_counts(hyp), bigram_counts(ref));
  }

  if (hyp_len == 0) {
    std::cerr << "warning: all hypotheses are empty, BLEU-2 is 0\n";
    return 0.0;
  }
  if (uni_total == 0 || bi_total == 0 || uni_match == 0 || bi_match == 0)
    return 0.0;

  const double p1 = static_cast<double>(uni_match) / static_cast<double>(uni_total);
  const double p2 = static_cast<double>(bi_match) / static_cast<double>(bi_total);
  const double bp =
      hyp_len > ref_len
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref_len) /
                               static_cast<double>(hyp_len));
  return 100.0 * bp * std::sqrt(p1 * p2);
}

double unigram_f1(const std::string& hypothesis,
                  const std::string& reference) {
  return multiset_f1(text::word_tokenize(hypothesis),
                     text::word_tokenize(reference));
}

double grounding_f1(const std::string& hypothesis,
                    const corpus::GroundingSource& gs,
                    const text::StopWordList& stopwords) {
  if (gs.kind != corpus::GsKind::kText)
    fail(ErrorCode::kValidation,
         "grounding overlap needs text grounding, not a strategy");
  std::vector<std::string> ref;
  for (const auto& item : gs.items) {
    auto toks = non_stop_tokens(item, stopwords);
    ref.insert(ref.end(), toks.begin(), toks.end());
  }
  return multiset_f1(non_stop_tokens(hypothesis, stopwords), ref);
}

namespace {

// one phrase table entry: strategy plus the substrings that indicate it
struct StrategyCue {
  const char* strategy;
  std::vector<const char*> cues;
};

const StrategyCue kCues[] = {
    {"restatement or paraphrasing",
     {"so you are saying", "it sounds like you", "in other words",
      "if i understand you"}},
    {"reflection of feelings",
     {"you must feel", "that sounds really", "i can see how you feel",
      "that must be"}},
    {"self-disclosure",
     {"i have been through", "i also ", "me too", "when i was",
      "something similar myself"}},
    {"affirmation and reassurance",
     {"you are doing great", "it will get better", "you should be proud",
      "everything will be", "you are not alone"}},
    {"providing suggestions",
     {"maybe you could", "you could try", "i suggest", "have you considered",
      "why not try"}},
    {"information",
     {"studies show", "according to", "research suggests", "the fact is",
      "statistics say"}},
};

}  // namespace

std::string KeywordStrategyClassifier::classify(
    const std::string& response) const {
  // normalize the same way the tokenizer does
  const auto toks = text::word_tokenize(response);
  const std::string flat = text::detokenize(toks);
  for (const auto& entry : kCues)
    for (const char* cue : entry.cues)
      if (flat.find(cue) != std::string::npos) return entry.strategy;
  if (std::find(toks.begin(), toks.end(), "?") != toks.end())
    return "question";
  return corpus::others_strategy();
}

double match_ratio(const GenerationSet& gen, const StrategyClassifier& clf) {
  std::size_t considered = 0, matched = 0;
  for (const auto& e : gen.entries) {
    if (!e.designated_strategy)
      fail(ErrorCode::kValidation,
           "match ratio needs designated strategies (entry " + e.dialog_id +
               ")");
    const std::string designated =
        corpus::normalize_strategy(*e.designated_strategy);
    if (designated == corpus::others_strategy()) continue;
    ++considered;
    if (corpus::normalize_strategy(clf.classify(e.hypothesis)) == designated)
      ++matched;
  }
  if (considered == 0)
    fail(ErrorCode::kValidation,
         "no entries with a scoreable designated strategy");
  return 100.0 * static_cast<double>(matched) /
         static_cast<double>(considered);
}

double perplexity(const model::Backend& backend,
                  std::span<const prompting::AssembledInput> inputs) {
  return model::validation_perplexity(backend, inputs);
}

MetricReport evaluate_run(const GenerationSet& gen, const EvalOptions& opts) {
  if (gen.entries.empty())
    fail(ErrorCode::kValidation, "generation set is empty");
  const text::StopWordList& stop =
      opts.stopwords ? *opts.stopwords : text::StopWordList::builtin();

  MetricReport rep;
  rep.run_id = gen.run_id;
  rep.task = gen.task;
  rep.evaluated = gen.entries.size();

  std::vector<std::string> hyps, refs;
  hyps.reserve(gen.entries.size());
  refs.reserve(gen.entries.size());
  double f1_sum = 0.0;
  bool text_gs = true;
  double gf1_sum = 0.0;
  for (const auto& e : gen.entries) {
    hyps.push_back(e.hypothesis);
    refs.push_back(e.reference);
    f1_sum += unigram_f1(e.hypothesis, e.reference);
    if (e.gs.kind == corpus::GsKind::kText)
      gf1_sum += grounding_f1(e.hypothesis, e.gs, stop);
    else
      text_gs = false;
  }

  rep.values["bleu2"] = corpus_bleu2(hyps, refs);
  rep.values["f1"] = f1_sum / static_cast<double>(gen.entries.size());
  if (text_gs) {
    rep.values["grounding_f1"] =
        gf1_sum / static_cast<double>(gen.entries.size());
  } else {
    KeywordStrategyClassifier fallback;
    const StrategyClassifier& clf =
        opts.classifier ? *opts.classifier : fallback;
    rep.values["match_ratio"] = match_ratio(gen, clf);
    std::size_t excluded = 0;
    for (const auto& e : gen.entries)
      if (e.designated_strategy &&
          corpus::normalize_strategy(*e.designated_strategy) ==
              corpus::others_strategy())
        ++excluded;
    rep.excluded = excluded;
  }
  if (opts.ppl) rep.values["ppl"] = *opts.ppl;
  return rep;
}

AggregateReport aggregate(std::span<const MetricReport> runs) {
  if (runs.empty()) fail(ErrorCode::kValidation, "no runs to aggregate");
  AggregateReport agg;
  agg.task = runs.front().task;
  agg.n_runs = runs.size();
  for (const auto& r : runs) {
    if (r.task != agg.task)
      fail(ErrorCode::kValidation, "cannot aggregate runs of mixed tasks");
    if (r.values.size() != runs.front().values.size())
      fail(ErrorCode::kValidation, "runs report different metric sets");
    agg.runs.push_back(r);
  }

  for (const auto& [key, first] : runs.front().values) {
    double sum = 0.0;
    for (const auto& r : runs) {
      const auto it = r.values.find(key);
      if (it == r.values.end())
        fail(ErrorCode::kValidation, "metric missing in a run: " + key);
      sum += it->second;
    }
    const double mean = sum / static_cast<double>(runs.size());
    agg.mean[key] = mean;
    if (runs.size() >= 2) {
      double var = 0.0;
      for (const auto& r : runs) {
        const double d = r.values.at(key) - mean;
        var += d * d;
      }
      agg.stddev[key] = std::sqrt(var / static_cast<double>(runs.size()));
    }
  }
  return agg;
}

}  // namespace gdg::metrics
