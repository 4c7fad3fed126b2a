// SPDX-License-Identifier: Apache-2.0
//
// Dialog corpus loading, grounding filters, truncation and few-shot splits.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdg/text.hpp"

namespace gdg::corpus {

enum class Speaker { kUser, kSystem };

const char* speaker_name(Speaker s);
Speaker speaker_from_name(const std::string& name);

struct Utterance {
  Speaker speaker = Speaker::kUser;
  std::string text;
};

// What a response is grounded on: either free text passages (knowledge
// sentences, persona lines) or exactly one strategy label from a fixed
// inventory.
enum class GsKind { kText, kStrategy };

struct GroundingSource {
  GsKind kind = GsKind::kText;
  std::vector<std::string> items;
};

struct DialogSample {
  std::string dialog_id;
  std::string task;
  GroundingSource gs;
  std::vector<Utterance> context;
  std::string response;
  std::optional<std::string> designated_strategy;  // strategy tasks only
  bool has_reference = false;  // annotator flag: response uses the grounding
  std::optional<std::string> domain;
};

// Token budgets applied before assembly. context_window caps the number of
// most recent utterances kept; the token limits then cut whole tokens, the
// context from the left (oldest first), grounding text and response from the
// right.
struct TruncationLimits {
  std::size_t context_tokens = 250;
  std::size_t gs_tokens = 300;
  std::size_t response_tokens = 50;
  std::size_t context_window = 5;
};

enum class FilterPolicy { kNone, kReferenceFlag, kOverlap };

const char* filter_policy_name(FilterPolicy p);
FilterPolicy filter_policy_from_name(const std::string& name);

// Few-shot sampling plan: n_subsets independent subsets of n_train + n_valid
// samples each, and seeds_per_subset run seeds per subset.
struct FewShotPlan {
  std::size_t n_train = 50;
  std::size_t n_valid = 15;
  std::size_t n_subsets = 4;
  std::size_t seeds_per_subset = 2;
  std::uint64_t master_seed = 0;
};

struct SplitSet {
  std::size_t subset_id = 0;
  std::uint64_t run_seed = 0;
  std::vector<DialogSample> train;
  std::vector<DialogSample> valid;
};

inline std::string run_name(std::size_t subset_id, std::size_t seed_index) {
  return "subset" + std::to_string(subset_id) + "_seed" +
         std::to_string(seed_index);
}

// Strategy inventory for emotional support dialogs: seven strategies plus the
// catch-all "others" bucket (excluded from match ratio).
std::span<const std::string> esconv_strategies();  // without "others"
const std::string& others_strategy();              // "others"
bool is_known_strategy(const std::string& task, const std::string& name);
std::string normalize_strategy(const std::string& name);  // lowercase copy

// JSONL input. One object per line; unknown fields are rejected, messages
// carry the line number. expected_task empty accepts any task but still
// requires it to be uniform within the file.
std::vector<DialogSample> load_corpus(const std::string& path,
                                      const std::string& expected_task = "");
void save_corpus(const std::string& path,
                 std::span<const DialogSample> samples);

std::string sample_to_json_line(const DialogSample& s);
DialogSample sample_from_json_line(const std::string& line);

// Keeps samples whose response is actually grounded. kReferenceFlag keeps
// has_reference == true; kOverlap keeps samples whose response shares at
// least one non stop word with some grounding item (text GS only).
std::vector<DialogSample> filter_grounded(std::span<const DialogSample> samples,
                                          FilterPolicy policy,
                                          const text::StopWordList& stopwords);

// Applies TruncationLimits. Untouched fields keep their original text
// byte for byte; a cut field is re-rendered from its surviving tokens, so
// applying the same limits twice is a no-op.
DialogSample truncate_sample(const DialogSample& s,
                             const TruncationLimits& limits);

// Draws the few-shot subsets. Sampling is without replacement inside one
// subset; distinct subsets are drawn independently. Each (subset, seed slot)
// pair gets its own run_seed derived from the master seed.
std::vector<SplitSet> make_few_shot_splits(std::span<const DialogSample> pool,
                                           const FewShotPlan& plan);

}  // namespace gdg::corpus
