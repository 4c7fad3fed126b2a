// SPDX-License-Identifier: Apache-2.0

#include "gdg/synthetic.hpp"

#include <array>

#include "gdg/error.hpp"
#include "gdg/rng.hpp"

namespace gdg::corpus {

namespace {

const char* const kKeywords[] = {
    "tiger",   "river",   "piano",   "garden",  "rocket",  "engine",
    "violin",  "castle",  "desert",  "harbor",  "jungle",  "lantern",
    "marble",  "meadow",  "monsoon", "nebula",  "orchid",  "pepper",
    "quartz",  "saddle",  "temple",  "turbine", "volcano", "walnut",
};

const char* const kGsTemplates[] = {
    "the secret topic is %s",
    "today the topic is %s",
    "our hidden topic is %s this time",
    "the chosen topic for this chat is %s",
};

const char* const kSmallTalk[] = {
    "how are you doing today ?",
    "i had a long day at work .",
    "the weather was quite nice this morning .",
    "did you sleep well last night ?",
    "i am feeling a little tired .",
    "we should plan something for the weekend .",
    "my neighbor plays loud music every night .",
    "i finished reading that book yesterday .",
    "what did you have for lunch ?",
    "the train was late again this morning .",
};

const char* const kDistractorLines[] = {
    "i saw a %s on my way home .",
    "someone mentioned a %s earlier .",
    "my friend keeps talking about the %s .",
};

const char* const kResponseTemplates[] = {
    "i really like the %s .",
    "let us talk about the %s now .",
    "the %s is a fine subject .",
};

const char* const kOffTopicResponses[] = {
    "sorry i do not know what to say .",
    "i would rather not talk about this .",
};

// Emotional support flavor for the strategy variant. One reference response
// per strategy, phrased so the keyword based classifier stub recovers the
// label.
struct StrategyLine {
  const char* strategy;
  const char* response;
};
const StrategyLine kStrategyLines[] = {
    {"question", "what happened after that ?"},
    {"restatement or paraphrasing", "so you are saying the pressure comes from work ."},
    {"reflection of feelings", "that sounds really hard for you ."},
    {"self-disclosure", "i have been through something similar myself ."},
    {"affirmation and reassurance", "you are doing great and it will get better ."},
    {"providing suggestions", "maybe you could take a short walk every day ."},
    {"information", "studies show that regular sleep helps a lot ."},
    {"others", "thanks for sharing all of this with me ."},
};

const char* const kSupportTalk[] = {
    "i lost my job last month and i feel terrible .",
    "my exams are coming up and i cannot focus .",
    "i argued with my best friend yesterday .",
    "everything feels heavier than it used to .",
    "i have trouble sleeping these days .",
};

std::string fill(const char* tmpl, const std::string& word) {
  std::string out;
  for (const char* p = tmpl; *p; ++p) {
    if (p[0] == '%' && p[1] == 's') {
      out += word;
      ++p;
    } else {
      out.push_back(*p);
    }
  }
  return out;
}

template <class T, std::size_t N>
const T& pick(Rng& rng, const T (&arr)[N]) {
  return arr[rng.below(N)];
}

}  // namespace

std::vector<DialogSample> make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.min_context == 0 || spec.min_context > spec.max_context)
    fail(ErrorCode::kConfig, "bad synthetic context bounds");

  Rng rng(spec.seed);
  std::vector<DialogSample> out;
  out.reserve(spec.n_samples);

  for (std::size_t i = 0; i < spec.n_samples; ++i) {
    DialogSample s;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s-%06zu", spec.id_prefix.c_str(), i);
    s.dialog_id = idbuf;
    s.task = spec.task;

    const std::size_t n_ctx =
        spec.min_context + rng.below(spec.max_context - spec.min_context + 1);

    if (spec.gs_kind == GsKind::kText) {
      const std::string kw = pick(rng, kKeywords);
      s.gs.kind = GsKind::kText;
      s.gs.items.push_back(fill(pick(rng, kGsTemplates), kw));

      for (std::size_t t = 0; t < n_ctx; ++t) {
        Utterance u;
        // last turn is the user so the system responds next
        u.speaker = (n_ctx - 1 - t) % 2 == 0 ? Speaker::kUser : Speaker::kSystem;
        if (rng.uniform() < spec.distractor_prob) {
          std::string other = pick(rng, kKeywords);
          while (other == kw) other = pick(rng, kKeywords);
          u.text = fill(pick(rng, kDistractorLines), other);
        } else {
          u.text = pick(rng, kSmallTalk);
        }
        s.context.push_back(std::move(u));
      }

      if (rng.uniform() < spec.off_topic_prob) {
        s.response = pick(rng, kOffTopicResponses);
        s.has_reference = false;
      } else {
        s.response = fill(pick(rng, kResponseTemplates), kw);
        s.has_reference = true;
      }
    } else {
      const StrategyLine& line = pick(rng, kStrategyLines);
      s.gs.kind = GsKind::kStrategy;
      s.gs.items.push_back(line.strategy);
      s.designated_strategy = line.strategy;
      for (std::size_t t = 0; t < n_ctx; ++t) {
        Utterance u;
        u.speaker = (n_ctx - 1 - t) % 2 == 0 ? Speaker::kUser : Speaker::kSystem;
        u.text = pick(rng, kSupportTalk);
        s.context.push_back(std::move(u));
      }
      s.response = line.response;
      s.has_reference = true;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace gdg::corpus
