// SPDX-License-Identifier: Apache-2.0

#include "gdg/text.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>

#include "gdg/error.hpp"

namespace gdg::text {

namespace {

inline bool is_word_char(unsigned char c) {
  return std::isalnum(c) != 0 || c >= 0x80;
}

// English stop words, version 1. Keep in sync with data/stopwords_en_v1.txt;
// the unit tests compare the two.
const char* const kStopWordsV1[] = {
    "a", "about", "above", "after", "again", "against", "all", "am", "an",
    "and", "any", "are", "aren", "as", "at", "be", "because", "been",
    "before", "being", "below", "between", "both", "but", "by", "can",
    "cannot", "could", "couldn", "did", "didn", "do", "does", "doesn",
    "doing", "don", "down", "during", "each", "few", "for", "from",
    "further", "had", "hadn", "has", "hasn", "have", "haven", "having",
    "he", "her", "here", "hers", "herself", "him", "himself", "his", "how",
    "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just",
    "ll", "me", "more", "most", "mustn", "my", "myself", "no", "nor",
    "not", "now", "of", "off", "on", "once", "only", "or", "other",
    "ought", "our", "ours", "ourselves", "out", "over", "own", "re", "s",
    "same", "shan", "she", "should", "shouldn", "so", "some", "such", "t",
    "than", "that", "the", "their", "theirs", "them", "themselves", "then",
    "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "ve", "very", "was", "wasn", "we", "were",
    "weren", "what", "when", "where", "which", "while", "who", "whom",
    "why", "will", "with", "won", "would", "wouldn", "you", "your",
    "yours", "yourself", "yourselves",
};

}  // namespace

std::vector<std::string> word_tokenize(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (is_word_char(c)) {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
      continue;
    }
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
    if (std::isspace(c) == 0) {
      // punctuation: one token per character
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::size_t count_tokens(std::string_view s) { return word_tokenize(s).size(); }

StopWordList::StopWordList(std::vector<std::string> words, std::string version)
    : words_(words.begin(), words.end()), version_(std::move(version)) {}

const StopWordList& StopWordList::builtin() {
  static const StopWordList list(
      std::vector<std::string>(std::begin(kStopWordsV1),
                               std::end(kStopWordsV1)),
      "en_v1");
  return list;
}

StopWordList StopWordList::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open stop word list: " + path);
  std::vector<std::string> words;
  std::string version = "file";
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("version:");
      if (pos != std::string::npos) {
        version = line.substr(pos + 8);
        while (!version.empty() && version.front() == ' ')
          version.erase(version.begin());
      }
      continue;
    }
    words.push_back(line);
  }
  return StopWordList(std::move(words), std::move(version));
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<unk>", "<eos>", "<bor>", "<nl>"})
    add_token(t);
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& docs) {
  std::map<std::string, std::size_t> freq;  // ordered map: ties sort by token
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++freq[tok];

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::stable_sort(entries.begin(), entries.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;  // stable keeps ties sorted
                   });
  Vocabulary v;
  for (const auto& [tok, n] : entries) v.add_token(tok);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedCount)
    fail(ErrorCode::kValidation, "vocabulary token list too short");
  Vocabulary v;
  for (int i = 0; i < kReservedCount; ++i)
    if (tokens[i] != v.tokens_[i])
      fail(ErrorCode::kValidation,
           "vocabulary token list does not start with reserved tokens");
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i)
    v.add_token(tokens[i]);
  return v;
}

int Vocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) != 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
    fail(ErrorCode::kValidation,
         "token id out of range: " + std::to_string(id));
  return tokens_[static_cast<std::size_t>(id)];
}

int Vocabulary::add_token(const std::string& token) {
  if (index_.count(token))
    fail(ErrorCode::kValidation, "token already in vocabulary: " + token);
  const int id = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const int> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace gdg::text
