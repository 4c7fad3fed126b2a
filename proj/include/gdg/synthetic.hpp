// SPDX-License-Identifier: Apache-2.0
//
// Synthetic dialog fixtures. Each sample hides a keyword in its grounding
// source; the reference response repeats that keyword. Context turns are
// small talk and may name other keywords as distractors, so a model only
// scores well on grounding overlap when it copies from the right place.

#pragma once

#include <cstdint>
#include <vector>

#include "gdg/corpus.hpp"

namespace gdg::corpus {

struct SyntheticSpec {
  std::size_t n_samples = 500;
  std::uint64_t seed = 0;
  std::string task = "synth_copy";
  GsKind gs_kind = GsKind::kText;
  std::size_t min_context = 1;
  std::size_t max_context = 4;
  // chance that a context turn mentions a wrong keyword
  double distractor_prob = 0.5;
  // chance of an ungrounded sample (response ignores the keyword,
  // has_reference = false)
  double off_topic_prob = 0.1;
  std::string id_prefix = "synth";
};

std::vector<DialogSample> make_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace gdg::corpus
