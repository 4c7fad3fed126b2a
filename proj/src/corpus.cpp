// SPDX-License-Identifier: Apache-2.0

#include "gdg/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "gdg/error.hpp"
#include "gdg/rng.hpp"

namespace gdg::corpus {

using ordered_json = nlohmann::ordered_json;

const char* speaker_name(Speaker s) {
  return s == Speaker::kUser ? "user" : "system";
}

Speaker speaker_from_name(const std::string& name) {
  if (name == "user") return Speaker::kUser;
  if (name == "system") return Speaker::kSystem;
  fail(ErrorCode::kValidation, "unknown speaker: " + name);
}

const char* filter_policy_name(FilterPolicy p) {
  switch (p) {
    case FilterPolicy::kNone: return "none";
    case FilterPolicy::kReferenceFlag: return "reference_flag";
    case FilterPolicy::kOverlap: return "overlap";
  }
  return "none";
}

FilterPolicy filter_policy_from_name(const std::string& name) {
  if (name == "none") return FilterPolicy::kNone;
  if (name == "reference_flag") return FilterPolicy::kReferenceFlag;
  if (name == "overlap") return FilterPolicy::kOverlap;
  fail(ErrorCode::kConfig, "unknown filter policy: " + name);
}

namespace {

const std::string kStrategies[] = {
    "question",
    "restatement or paraphrasing",
    "reflection of feelings",
    "self-disclosure",
    "affirmation and reassurance",
    "providing suggestions",
    "information",
};
const std::string kOthers = "others";

}  // namespace

std::span<const std::string> esconv_strategies() {
  return std::span<const std::string>(std::begin(kStrategies),
                                      std::end(kStrategies));
}

const std::string& others_strategy() { return kOthers; }

std::string normalize_strategy(const std::string& name) {
  std::string out = name;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool is_known_strategy(const std::string& task, const std::string& name) {
  if (task != "esconv") return true;  // no registered inventory
  const std::string n = normalize_strategy(name);
  if (n == kOthers) return true;
  for (const auto& s : kStrategies)
    if (s == n) return true;
  return false;
}

namespace {

[[noreturn]] void line_fail(std::size_t line_no, const std::string& msg) {
  fail(ErrorCode::kValidation, "line " + std::to_string(line_no) + ": " + msg);
}

void check_fields(const ordered_json& obj,
                  const std::unordered_set<std::string>& allowed,
                  std::size_t line_no, const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      line_fail(line_no, "unknown field '" + it.key() + "' in " + where);
}

DialogSample parse_sample(const ordered_json& j, std::size_t line_no) {
  static const std::unordered_set<std::string> kTop = {
      "dialog_id", "task",          "gs",
      "context",   "response",      "designated_strategy",
      "has_reference", "domain"};
  static const std::unordered_set<std::string> kGsFields = {"kind", "items"};
  static const std::unordered_set<std::string> kUttFields = {"speaker", "text"};

  if (!j.is_object()) line_fail(line_no, "sample is not a JSON object");
  check_fields(j, kTop, line_no, "sample");

  DialogSample s;
  try {
    s.dialog_id = j.at("dialog_id").get<std::string>();
    s.task = j.at("task").get<std::string>();

    const auto& gs = j.at("gs");
    if (!gs.is_object()) line_fail(line_no, "gs is not an object");
    check_fields(gs, kGsFields, line_no, "gs");
    const std::string kind = gs.at("kind").get<std::string>();
    if (kind == "text")
      s.gs.kind = GsKind::kText;
    else if (kind == "strategy")
      s.gs.kind = GsKind::kStrategy;
    else
      line_fail(line_no, "gs.kind must be 'text' or 'strategy'");
    for (const auto& item : gs.at("items"))
      s.gs.items.push_back(item.get<std::string>());

    for (const auto& u : j.at("context")) {
      if (!u.is_object()) line_fail(line_no, "context entry is not an object");
      check_fields(u, kUttFields, line_no, "context entry");
      Utterance utt;
      utt.speaker = speaker_from_name(u.at("speaker").get<std::string>());
      utt.text = u.at("text").get<std::string>();
      s.context.push_back(std::move(utt));
    }

    s.response = j.at("response").get<std::string>();
    if (j.contains("designated_strategy") && !j["designated_strategy"].is_null())
      s.designated_strategy = j["designated_strategy"].get<std::string>();
    if (j.contains("has_reference"))
      s.has_reference = j["has_reference"].get<bool>();
    if (j.contains("domain") && !j["domain"].is_null())
      s.domain = j["domain"].get<std::string>();
  } catch (const ordered_json::exception& e) {
    line_fail(line_no, std::string("malformed sample: ") + e.what());
  }

  if (s.dialog_id.empty()) line_fail(line_no, "dialog_id is empty");
  if (s.response.empty()) line_fail(line_no, "response is empty");

  if (s.gs.kind == GsKind::kText) {
    if (s.gs.items.empty())
      line_fail(line_no, "text grounding needs at least one item");
    for (const auto& it : s.gs.items)
      if (it.empty()) line_fail(line_no, "empty grounding item");
    if (s.designated_strategy)
      line_fail(line_no, "designated_strategy is only valid for strategy gs");
  } else {
    if (s.gs.items.size() != 1)
      line_fail(line_no, "strategy grounding needs exactly one item");
    if (!s.designated_strategy)
      line_fail(line_no, "strategy grounding needs designated_strategy");
    if (normalize_strategy(*s.designated_strategy) !=
        normalize_strategy(s.gs.items[0]))
      line_fail(line_no, "designated_strategy does not match gs item");
    if (!is_known_strategy(s.task, s.gs.items[0]))
      line_fail(line_no, "unknown strategy: " + s.gs.items[0]);
  }
  return s;
}

}  // namespace

DialogSample sample_from_json_line(const std::string& line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const ordered_json::exception& e) {
    fail(ErrorCode::kValidation, std::string("invalid JSON: ") + e.what());
  }
  return parse_sample(j, 1);
}

std::string sample_to_json_line(const DialogSample& s) {
  ordered_json j;
  j["dialog_id"] = s.dialog_id;
  j["task"] = s.task;
  j["gs"]["kind"] = s.gs.kind == GsKind::kText ? "text" : "strategy";
  j["gs"]["items"] = s.gs.items;
  j["context"] = ordered_json::array();
  for (const auto& u : s.context)
    j["context"].push_back({{"speaker", speaker_name(u.speaker)},
                            {"text", u.text}});
  j["response"] = s.response;
  if (s.designated_strategy)
    j["designated_strategy"] = *s.designated_strategy;
  else
    j["designated_strategy"] = nullptr;
  j["has_reference"] = s.has_reference;
  if (s.domain)
    j["domain"] = *s.domain;
  else
    j["domain"] = nullptr;
  return j.dump();
}

std::vector<DialogSample> load_corpus(const std::string& path,
                                      const std::string& expected_task) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open corpus: " + path);

  std::vector<DialogSample> samples;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const ordered_json::exception& e) {
      line_fail(line_no, std::string("invalid JSON: ") + e.what());
    }
    DialogSample s = parse_sample(j, line_no);
    if (!expected_task.empty() && s.task != expected_task)
      line_fail(line_no, "task '" + s.task + "' does not match expected '" +
                             expected_task + "'");
    if (!samples.empty() && s.task != samples.front().task)
      line_fail(line_no, "mixed tasks in one corpus file");
    if (!seen_ids.insert(s.dialog_id).second)
      line_fail(line_no, "duplicate dialog_id: " + s.dialog_id);
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_corpus(const std::string& path,
                 std::span<const DialogSample> samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write corpus: " + path);
  for (const auto& s : samples) out << sample_to_json_line(s) << '\n';
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

namespace {

// Lowercased word tokens with punctuation and stop words removed.
std::vector<std::string> content_words(const std::string& s,
                                       const text::StopWordList& stopwords) {
  std::vector<std::string> out;
  for (auto& tok : text::word_tokenize(s)) {
    const unsigned char c0 = static_cast<unsigned char>(tok[0]);
    if (std::isalnum(c0) == 0 && c0 < 0x80) continue;  // punctuation
    if (stopwords.contains(tok)) continue;
    out.push_back(std::move(tok));
  }
  return out;
}

}  // namespace

std::vector<DialogSample> filter_grounded(std::span<const DialogSample> samples,
                                          FilterPolicy policy,
                                          const text::StopWordList& stopwords) {
  std::vector<DialogSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    bool keep = true;
    switch (policy) {
      case FilterPolicy::kNone:
        break;
      case FilterPolicy::kReferenceFlag:
        keep = s.has_reference;
        break;
      case FilterPolicy::kOverlap: {
        if (s.gs.kind != GsKind::kText)
          fail(ErrorCode::kValidation,
               "overlap filter requires text grounding (sample " +
                   s.dialog_id + ")");
        const auto resp = content_words(s.response, stopwords);
        std::unordered_set<std::string> gs_words;
        for (const auto& item : s.gs.items)
          for (auto& w : content_words(item, stopwords))
            gs_words.insert(std::move(w));
        keep = std::any_of(resp.begin(), resp.end(), [&](const auto& w) {
          return gs_words.count(w) != 0;
        });
        break;
      }
    }
    if (keep) out.push_back(s);
  }
  return out;
}

namespace {

// Cuts a token list to [from, to) and renders it back to text. Returns the
// original string untouched when nothing is cut.
std::string cut_text(const std::string& original,
                     const std::vector<std::string>& tokens, std::size_t from,
                     std::size_t to) {
  if (from == 0 && to >= tokens.size()) return original;
  std::vector<std::string> kept(tokens.begin() + static_cast<long>(from),
                                tokens.begin() + static_cast<long>(to));
  return text::detokenize(kept);
}

}  // namespace

DialogSample truncate_sample(const DialogSample& s,
                             const TruncationLimits& limits) {
  if (limits.context_tokens == 0 || limits.gs_tokens == 0 ||
      limits.response_tokens == 0 || limits.context_window == 0)
    fail(ErrorCode::kConfig, "truncation limits must be positive");

  DialogSample out = s;

  // Context: keep the most recent utterances, then cut whole tokens from the
  // oldest side until the budget holds.
  if (out.context.size() > limits.context_window)
    out.context.erase(out.context.begin(),
                      out.context.end() -
                          static_cast<long>(limits.context_window));
  std::vector<std::vector<std::string>> ctx_tokens;
  std::size_t total = 0;
  for (const auto& u : out.context) {
    ctx_tokens.push_back(text::word_tokenize(u.text));
    total += ctx_tokens.back().size();
  }
  std::size_t excess = total > limits.context_tokens
                           ? total - limits.context_tokens
                           : 0;
  std::size_t drop_front = 0;
  for (std::size_t i = 0; i < out.context.size() && excess > 0; ++i) {
    const std::size_t n = ctx_tokens[i].size();
    if (n <= excess) {
      ++drop_front;
      excess -= n;
    } else {
      out.context[i].text =
          cut_text(out.context[i].text, ctx_tokens[i], excess, n);
      excess = 0;
    }
  }
  if (drop_front > 0)
    out.context.erase(out.context.begin(),
                      out.context.begin() + static_cast<long>(drop_front));

  // Grounding text: budget over items in order, cutting from the right.
  if (out.gs.kind == GsKind::kText) {
    std::vector<std::string> kept_items;
    std::size_t budget = limits.gs_tokens;
    for (const auto& item : out.gs.items) {
      if (budget == 0) break;
      const auto toks = text::word_tokenize(item);
      if (toks.size() <= budget) {
        kept_items.push_back(item);
        budget -= toks.size();
      } else {
        kept_items.push_back(cut_text(item, toks, 0, budget));
        budget = 0;
      }
    }
    out.gs.items = std::move(kept_items);
  }

  // Response: cut from the right.
  const auto resp_tokens = text::word_tokenize(out.response);
  if (resp_tokens.size() > limits.response_tokens)
    out.response = cut_text(out.response, resp_tokens, 0,
                            limits.response_tokens);

  return out;
}

std::vector<SplitSet> make_few_shot_splits(std::span<const DialogSample> pool,
                                           const FewShotPlan& plan) {
  if (plan.n_train == 0 || plan.n_subsets == 0 || plan.seeds_per_subset == 0)
    fail(ErrorCode::kConfig, "few-shot plan has a zero dimension");
  const std::size_t need = plan.n_train + plan.n_valid;
  if (pool.size() < need)
    fail(ErrorCode::kCapacity,
         "pool has " + std::to_string(pool.size()) + " samples, plan needs " +
             std::to_string(need));

  std::vector<SplitSet> out;
  const std::uint64_t subset_base = derive_seed(plan.master_seed, 1);
  const std::uint64_t run_base = derive_seed(plan.master_seed, 2);
  for (std::size_t i = 0; i < plan.n_subsets; ++i) {
    Rng rng(derive_seed(subset_base, i));
    const auto idx = rng.sample_indices(pool.size(), need);
    SplitSet base;
    base.subset_id = i;
    for (std::size_t k = 0; k < plan.n_train; ++k)
      base.train.push_back(pool[idx[k]]);
    for (std::size_t k = plan.n_train; k < need; ++k)
      base.valid.push_back(pool[idx[k]]);
    for (std::size_t j = 0; j < plan.seeds_per_subset; ++j) {
      SplitSet split = base;
      split.run_seed = derive_seed(run_base, i * plan.seeds_per_subset + j);
      out.push_back(std::move(split));
    }
  }
  return out;
}

}  // namespace gdg::corpus
