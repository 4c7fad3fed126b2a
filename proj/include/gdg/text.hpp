// SPDX-License-Identifier: Apache-2.0
//
// Word-level tokenization, vocabulary and stop word list.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace gdg::text {

// Lowercases ASCII letters and splits on whitespace; each ASCII punctuation
// character becomes its own token. Bytes >= 0x80 are treated as word
// characters so UTF-8 content passes through intact.
std::vector<std::string> word_tokenize(std::string_view s);

// Joins tokens with single spaces. word_tokenize(detokenize(t)) == t for any
// token list t produced by word_tokenize; truncation relies on this.
std::string detokenize(std::span<const std::string> tokens);

std::size_t count_tokens(std::string_view s);

// Stop word list, used by the overlap filter and the grounding F1 metric.
class StopWordList {
 public:
  static const StopWordList& builtin();  // compiled-in english list, v1
  static StopWordList load(const std::string& path);  // one word per line

  bool contains(const std::string& word) const {
    return words_.count(word) != 0;
  }
  std::size_t size() const { return words_.size(); }
  const std::string& version() const { return version_; }

  StopWordList(std::vector<std::string> words, std::string version);

 private:
  std::unordered_set<std::string> words_;
  std::string version_;
};

// Token <-> id mapping. Ids 0..4 are reserved control tokens; corpus tokens
// follow ordered by descending frequency (ties by token string ascending).
// Indicator tokens appended later keep their insertion order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kEos = 2;  // end of utterance / sequence
  static constexpr int kBor = 3;  // begin of response (decoder start)
  static constexpr int kNl = 4;   // newline, line separator in discrete mode

  Vocabulary();  // reserved tokens only

  // Frequency-ordered vocabulary over already tokenized documents.
  static Vocabulary build(const std::vector<std::vector<std::string>>& docs);
  // Rebuild from an explicit token list (checkpoint loading). The list must
  // start with the five reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // Appends a new entry; fails if the token is already present.
  int add_token(const std::string& token);

  std::vector<int> encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const int> ids) const;

  bool is_reserved(int id) const { return id >= 0 && id < kReservedCount; }
  static constexpr int kReservedCount = 5;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace gdg::text
