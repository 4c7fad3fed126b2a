// SPDX-License-Identifier: Apache-2.0
//
// Prompt assembly. Turns a dialog sample into model input tokens under one
// of three schemes:
//
//   none        plain concatenation of grounding, context and response,
//               closed by a single end token. No extra tokens at all.
//   continuous  newly added indicator tokens mark the grounding block, the
//               context block and every speaker turn. Their embeddings are
//               trainable; nothing else about the input changes.
//   discrete    a textual instruction plus "label:" lines, one line per
//               block, separated by newline tokens.
//
// For strategy-grounded dialogs the continuous scheme swaps the grounding
// block for a single strategy token and has no component indicators.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdg/corpus.hpp"
#include "gdg/text.hpp"

namespace gdg::prompting {

// Both component indicators (grounding and context) report kGsIndicator.
enum class SegmentKind {
  kInstruction,
  kGsIndicator,
  kGsContent,
  kSpeakerIndicator,
  kUtterance,
  kResponse,
  kEndToken,
  kStrategyToken,
};

enum class Layout { kSingleSequence, kEncoderDecoder };
enum class Mode { kNone, kContinuous, kDiscrete };
enum class GsPosition { kPreContext, kPostContext };
enum class AblationTarget { kComponent, kSpeaker, kBoth };
enum class Perturbation { kDropInstruction, kInstructionWords, kSpeakerWords };

const char* layout_name(Layout l);
Layout layout_from_name(const std::string& name);

// A trainable indicator token: its surface form (never produced by the
// tokenizer) and the natural language explanation used for semantic
// initialization.
struct Indicator {
  std::string token;
  std::string explanation;
};

struct IndicatorSet {
  std::optional<Indicator> gs_component;
  std::optional<Indicator> context_component;
  std::optional<Indicator> speaker_user;
  std::optional<Indicator> speaker_system;
  // strategy name (normalized) -> token, insertion order preserved
  std::vector<std::pair<std::string, Indicator>> strategy_tokens;

  const Indicator* strategy(const std::string& name) const;
};

struct DiscreteTemplate {
  std::string instruction;  // may be empty (instruction dropped)
  std::string gs_label = "knowledge";
  std::string user_label = "user";
  std::string system_label = "system";
};

struct PromptScheme {
  Mode mode = Mode::kNone;
  IndicatorSet indicators;   // continuous mode
  DiscreteTemplate tmpl;     // discrete mode
  bool drop_component_indicators = false;
  bool drop_speaker_indicators = false;
  GsPosition gs_position = GsPosition::kPreContext;
};

// Tokens the scheme can inject that are not ordinary words. These must be
// added to the vocabulary (and the embedding table) before assembly.
std::vector<Indicator> scheme_new_tokens(const PromptScheme& scheme);

struct AssembledInput {
  Layout layout = Layout::kSingleSequence;

  // single sequence layout
  std::vector<int> tokens;
  std::vector<SegmentKind> segments;

  // encoder/decoder layout
  std::vector<int> encoder_tokens;
  std::vector<SegmentKind> encoder_segments;
  std::vector<int> decoder_tokens;  // starts with the begin-of-response token
  std::vector<SegmentKind> decoder_segments;

  // aligned with tokens (single sequence) or decoder_tokens; true exactly on
  // the response tokens and the end token that closes them
  std::vector<std::uint8_t> loss_mask;

  // token id that terminates the response under this scheme
  int end_token = text::Vocabulary::kEos;

  const std::vector<int>& decoder_side() const {
    return layout == Layout::kSingleSequence ? tokens : decoder_tokens;
  }
  const std::vector<SegmentKind>& decoder_side_segments() const {
    return layout == Layout::kSingleSequence ? segments : decoder_segments;
  }

  // content tokens (grounding text, utterances, response) in order, both
  // sides; ablations and scheme changes must keep these intact
  std::vector<int> content_tokens() const;
};

// Default indicator sets and templates for the known tasks ("wow", "pc",
// "esconv"). Other tasks raise a config error; the pipeline builds custom
// ones from its configuration instead.
IndicatorSet default_indicator_set(const std::string& task);
DiscreteTemplate default_discrete_template(const std::string& task);

// A generic indicator set for text-grounded tasks outside the known three.
IndicatorSet make_text_indicator_set(const std::string& gs_explanation,
                                     const std::string& context_explanation);

// Template perturbations used to probe discrete prompt robustness.
DiscreteTemplate perturb_template(const DiscreteTemplate& tmpl,
                                  Perturbation kind);

// Removes an indicator class from a continuous scheme. Errors when the
// scheme is not continuous or has no indicators of that class.
PromptScheme ablate(const PromptScheme& scheme, AblationTarget target);

// The sample must already be truncated; assemble does not cut anything.
AssembledInput assemble(const corpus::DialogSample& sample,
                        const PromptScheme& scheme, Layout layout,
                        const text::Vocabulary& vocab);

// Same shape, but with the response left out: the conditioning prefix used
// at generation time. Single sequence inputs end right where the first
// response token would go (after the response speaker indicator or label).
AssembledInput assemble_prompt(const corpus::DialogSample& sample,
                               const PromptScheme& scheme, Layout layout,
                               const text::Vocabulary& vocab);

}  // namespace gdg::prompting
