// SPDX-License-Identifier: Apache-2.0

#include "gdg/prompting.hpp"

#include <algorithm>

#include "gdg/error.hpp"

namespace gdg::prompting {

const char* layout_name(Layout l) {
  return l == Layout::kSingleSequence ? "single_sequence" : "encoder_decoder";
}

Layout layout_from_name(const std::string& name) {
  if (name == "single_sequence") return Layout::kSingleSequence;
  if (name == "encoder_decoder") return Layout::kEncoderDecoder;
  fail(ErrorCode::kConfig, "unknown layout: " + name);
}

const Indicator* IndicatorSet::strategy(const std::string& name) const {
  const std::string n = corpus::normalize_strategy(name);
  for (const auto& [key, ind] : strategy_tokens)
    if (key == n) return &ind;
  return nullptr;
}

std::vector<Indicator> scheme_new_tokens(const PromptScheme& scheme) {
  std::vector<Indicator> out;
  if (scheme.mode != Mode::kContinuous) return out;
  if (!scheme.drop_component_indicators) {
    if (scheme.indicators.gs_component)
      out.push_back(*scheme.indicators.gs_component);
    if (scheme.indicators.context_component)
      out.push_back(*scheme.indicators.context_component);
  }
  if (!scheme.drop_speaker_indicators) {
    if (scheme.indicators.speaker_user)
      out.push_back(*scheme.indicators.speaker_user);
    if (scheme.indicators.speaker_system)
      out.push_back(*scheme.indicators.speaker_system);
  }
  for (const auto& [key, ind] : scheme.indicators.strategy_tokens)
    out.push_back(ind);
  return out;
}

std::vector<int> AssembledInput::content_tokens() const {
  std::vector<int> out;
  auto collect = [&out](const std::vector<int>& toks,
                        const std::vector<SegmentKind>& kinds) {
    for (std::size_t i = 0; i < toks.size(); ++i)
      if (kinds[i] == SegmentKind::kGsContent ||
          kinds[i] == SegmentKind::kUtterance ||
          kinds[i] == SegmentKind::kResponse)
        out.push_back(toks[i]);
  };
  if (layout == Layout::kSingleSequence) {
    collect(tokens, segments);
  } else {
    collect(encoder_tokens, encoder_segments);
    collect(decoder_tokens, decoder_segments);
  }
  return out;
}

IndicatorSet make_text_indicator_set(const std::string& gs_explanation,
                                     const std::string& context_explanation) {
  IndicatorSet set;
  set.gs_component = Indicator{"<gs>", gs_explanation};
  set.context_component = Indicator{"<context>", context_explanation};
  set.speaker_user = Indicator{"<user>", "user"};
  set.speaker_system = Indicator{"<system>", "system"};
  return set;
}

namespace {

std::string strategy_token_surface(const std::string& normalized) {
  std::string out = "<strategy:";
  for (char c : normalized) out.push_back(c == ' ' ? '_' : c);
  out.push_back('>');
  return out;
}

}  // namespace

IndicatorSet default_indicator_set(const std::string& task) {
  if (task == "wow" || task == "pc") {
    IndicatorSet set = make_text_indicator_set(
        task == "wow" ? "knowledge" : "persona", "conversation");
    set.gs_component->token = task == "wow" ? "<knowledge>" : "<persona>";
    return set;
  }
  if (task == "esconv") {
    IndicatorSet set;
    set.speaker_user = Indicator{"<user>", "user"};
    set.speaker_system = Indicator{"<system>", "system"};
    for (const auto& name : corpus::esconv_strategies())
      set.strategy_tokens.push_back(
          {name, Indicator{strategy_token_surface(name), name}});
    const std::string& others = corpus::others_strategy();
    set.strategy_tokens.push_back(
        {others, Indicator{strategy_token_surface(others), others}});
    return set;
  }
  fail(ErrorCode::kConfig, "no default indicator set for task: " + task);
}

DiscreteTemplate default_discrete_template(const std::string& task) {
  DiscreteTemplate t;
  std::string gs_name;
  if (task == "wow")
    gs_name = "knowledge";
  else if (task == "pc")
    gs_name = "persona";
  else if (task == "esconv")
    gs_name = "strategy";
  else
    fail(ErrorCode::kConfig, "no default template for task: " + task);
  t.gs_label = gs_name;
  t.instruction = "The following is a conversation between a user and a "
                  "system, grounded on the " + gs_name + ".";
  return t;
}

namespace {

void replace_all(std::string& s, const std::string& from,
                 const std::string& to) {
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

DiscreteTemplate perturb_template(const DiscreteTemplate& tmpl,
                                  Perturbation kind) {
  DiscreteTemplate out = tmpl;
  switch (kind) {
    case Perturbation::kDropInstruction:
      out.instruction.clear();
      break;
    case Perturbation::kSpeakerWords:
      replace_all(out.instruction, "user", "human");
      replace_all(out.instruction, "system", "AI");
      out.user_label = "human";
      out.system_label = "AI";
      [[fallthrough]];
    case Perturbation::kInstructionWords:
      replace_all(out.instruction, "The following", "Below");
      replace_all(out.instruction, "conversation", "dialog");
      replace_all(out.instruction, "grounded", "based");
      break;
  }
  return out;
}

PromptScheme ablate(const PromptScheme& scheme, AblationTarget target) {
  if (scheme.mode != Mode::kContinuous)
    fail(ErrorCode::kConfig, "ablation applies to continuous schemes only");
  PromptScheme out = scheme;
  const bool has_component = scheme.indicators.gs_component.has_value() ||
                             scheme.indicators.context_component.has_value();
  const bool has_speaker = scheme.indicators.speaker_user.has_value() ||
                           scheme.indicators.speaker_system.has_value();
  if (target == AblationTarget::kComponent || target == AblationTarget::kBoth) {
    if (!has_component)
      fail(ErrorCode::kValidation,
           "scheme has no component indicators to ablate");
    out.drop_component_indicators = true;
  }
  if (target == AblationTarget::kSpeaker || target == AblationTarget::kBoth) {
    if (!has_speaker)
      fail(ErrorCode::kValidation,
           "scheme has no speaker indicators to ablate");
    out.drop_speaker_indicators = true;
  }
  return out;
}

namespace {

// token/segment pair stream used while assembling
struct Emitter {
  std::vector<int> tokens;
  std::vector<SegmentKind> kinds;

  void one(int tok, SegmentKind k) {
    tokens.push_back(tok);
    kinds.push_back(k);
  }
  void text(const std::string& s, SegmentKind k,
            const text::Vocabulary& vocab) {
    for (const auto& w : text::word_tokenize(s)) one(vocab.id(w), k);
  }
};

int indicator_id(const Indicator& ind, const text::Vocabulary& vocab) {
  if (!vocab.contains(ind.token))
    fail(ErrorCode::kValidation,
         "indicator token not in vocabulary: " + ind.token +
             " (extend the vocabulary first)");
  return vocab.id(ind.token);
}

// "label: text" line opener; the label and colon act as the indicator
void emit_label(Emitter& e, const std::string& label, SegmentKind kind,
                const text::Vocabulary& vocab) {
  e.text(label, kind, vocab);
  e.one(vocab.id(":"), kind);
}

struct Blocks {
  Emitter instruction;
  Emitter gs;
  Emitter context;
  Emitter response_prefix;  // indicator or label before the response
  Emitter response;         // response tokens plus closing end token
};

Blocks build_blocks(const corpus::DialogSample& sample,
                    const PromptScheme& scheme, const text::Vocabulary& vocab,
                    bool with_response) {
  Blocks b;
  const bool strategy_gs = sample.gs.kind == corpus::GsKind::kStrategy;

  if (scheme.mode == Mode::kContinuous && strategy_gs &&
      (scheme.indicators.gs_component || scheme.indicators.context_component))
    fail(ErrorCode::kValidation,
         "strategy grounding takes no component indicators");

  // instruction
  if (scheme.mode == Mode::kDiscrete && !scheme.tmpl.instruction.empty()) {
    b.instruction.text(scheme.tmpl.instruction, SegmentKind::kInstruction,
                       vocab);
    b.instruction.one(text::Vocabulary::kNl, SegmentKind::kEndToken);
  }

  // grounding block
  switch (scheme.mode) {
    case Mode::kNone:
      if (strategy_gs)
        b.gs.text(sample.gs.items[0], SegmentKind::kGsContent, vocab);
      else
        for (const auto& item : sample.gs.items)
          b.gs.text(item, SegmentKind::kGsContent, vocab);
      break;
    case Mode::kContinuous:
      if (strategy_gs) {
        if (!sample.designated_strategy)
          fail(ErrorCode::kValidation, "strategy sample lacks designation");
        const Indicator* tok =
            scheme.indicators.strategy(*sample.designated_strategy);
        if (!tok)
          fail(ErrorCode::kValidation,
               "no strategy token for: " + *sample.designated_strategy);
        b.gs.one(indicator_id(*tok, vocab), SegmentKind::kStrategyToken);
      } else {
        if (!scheme.drop_component_indicators &&
            scheme.indicators.gs_component)
          b.gs.one(indicator_id(*scheme.indicators.gs_component, vocab),
                   SegmentKind::kGsIndicator);
        for (const auto& item : sample.gs.items)
          b.gs.text(item, SegmentKind::kGsContent, vocab);
      }
      break;
    case Mode::kDiscrete: {
      emit_label(b.gs, scheme.tmpl.gs_label, SegmentKind::kGsIndicator, vocab);
      if (strategy_gs)
        b.gs.text(sample.gs.items[0], SegmentKind::kGsContent, vocab);
      else
        for (const auto& item : sample.gs.items)
          b.gs.text(item, SegmentKind::kGsContent, vocab);
      b.gs.one(text::Vocabulary::kNl, SegmentKind::kEndToken);
      break;
    }
  }

  // context block
  if (scheme.mode == Mode::kContinuous && !strategy_gs &&
      !scheme.drop_component_indicators &&
      scheme.indicators.context_component)
    b.context.one(indicator_id(*scheme.indicators.context_component, vocab),
                  SegmentKind::kGsIndicator);
  for (const auto& utt : sample.context) {
    const bool user = utt.speaker == corpus::Speaker::kUser;
    if (scheme.mode == Mode::kContinuous && !scheme.drop_speaker_indicators) {
      const auto& ind =
          user ? scheme.indicators.speaker_user : scheme.indicators.speaker_system;
      if (!ind)
        fail(ErrorCode::kValidation,
             "continuous scheme missing speaker indicator");
      b.context.one(indicator_id(*ind, vocab), SegmentKind::kSpeakerIndicator);
    } else if (scheme.mode == Mode::kDiscrete) {
      emit_label(b.context,
                 user ? scheme.tmpl.user_label : scheme.tmpl.system_label,
                 SegmentKind::kSpeakerIndicator, vocab);
    }
    b.context.text(utt.text, SegmentKind::kUtterance, vocab);
    if (scheme.mode == Mode::kDiscrete)
      b.context.one(text::Vocabulary::kNl, SegmentKind::kEndToken);
  }

  // response block
  if (scheme.mode == Mode::kContinuous && !scheme.drop_speaker_indicators) {
    if (!scheme.indicators.speaker_system)
      fail(ErrorCode::kValidation,
           "continuous scheme missing speaker indicator");
    b.response_prefix.one(indicator_id(*scheme.indicators.speaker_system, vocab),
                          SegmentKind::kSpeakerIndicator);
  } else if (scheme.mode == Mode::kDiscrete) {
    emit_label(b.response_prefix, scheme.tmpl.system_label,
               SegmentKind::kSpeakerIndicator, vocab);
  }
  if (with_response) {
    b.response.text(sample.response, SegmentKind::kResponse, vocab);
    b.response.one(scheme.mode == Mode::kDiscrete ? text::Vocabulary::kNl
                                                  : text::Vocabulary::kEos,
                   SegmentKind::kEndToken);
  }
  return b;
}

void append(Emitter& dst, const Emitter& src) {
  dst.tokens.insert(dst.tokens.end(), src.tokens.begin(), src.tokens.end());
  dst.kinds.insert(dst.kinds.end(), src.kinds.begin(), src.kinds.end());
}

AssembledInput assemble_impl(const corpus::DialogSample& sample,
                             const PromptScheme& scheme, Layout layout,
                             const text::Vocabulary& vocab,
                             bool with_response) {
  Blocks b = build_blocks(sample, scheme, vocab, with_response);

  Emitter conditioning;
  append(conditioning, b.instruction);
  if (scheme.gs_position == GsPosition::kPreContext) {
    append(conditioning, b.gs);
    append(conditioning, b.context);
  } else {
    append(conditioning, b.context);
    append(conditioning, b.gs);
  }

  AssembledInput out;
  out.layout = layout;
  out.end_token = scheme.mode == Mode::kDiscrete ? text::Vocabulary::kNl
                                                 : text::Vocabulary::kEos;
  if (layout == Layout::kSingleSequence) {
    Emitter seq = conditioning;
    append(seq, b.response_prefix);
    const std::size_t unmasked = seq.tokens.size();
    append(seq, b.response);
    out.tokens = std::move(seq.tokens);
    out.segments = std::move(seq.kinds);
    out.loss_mask.assign(out.tokens.size(), 0);
    for (std::size_t i = unmasked; i < out.tokens.size(); ++i)
      out.loss_mask[i] = 1;
  } else {
    Emitter enc = conditioning;
    append(enc, b.response_prefix);
    out.encoder_tokens = std::move(enc.tokens);
    out.encoder_segments = std::move(enc.kinds);
    Emitter dec;
    dec.one(text::Vocabulary::kBor, SegmentKind::kEndToken);
    append(dec, b.response);
    out.decoder_tokens = std::move(dec.tokens);
    out.decoder_segments = std::move(dec.kinds);
    out.loss_mask.assign(out.decoder_tokens.size(), 1);
    out.loss_mask[0] = 0;  // begin-of-response is conditioning
  }
  return out;
}

}  // namespace

AssembledInput assemble(const corpus::DialogSample& sample,
                        const PromptScheme& scheme, Layout layout,
                        const text::Vocabulary& vocab) {
  return assemble_impl(sample, scheme, layout, vocab, true);
}

AssembledInput assemble_prompt(const corpus::DialogSample& sample,
                               const PromptScheme& scheme, Layout layout,
                               const text::Vocabulary& vocab) {
  return assemble_impl(sample, scheme, layout, vocab, false);
}

}  // namespace gdg::prompting
