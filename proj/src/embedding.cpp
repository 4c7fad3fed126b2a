// SPDX-License-Identifier: Apache-2.0

#include "gdg/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include "gdg/error.hpp"

namespace gdg::embed {

const char* init_kind_name(InitKind k) {
  switch (k) {
    case InitKind::kRandom: return "random";
    case InitKind::kVocab: return "vocab";
    case InitKind::kFrequent: return "frequent";
    case InitKind::kSemantic: return "semantic";
  }
  return "random";
}

InitKind init_kind_from_name(const std::string& name) {
  if (name == "random") return InitKind::kRandom;
  if (name == "vocab") return InitKind::kVocab;
  if (name == "frequent") return InitKind::kFrequent;
  if (name == "semantic") return InitKind::kSemantic;
  fail(ErrorCode::kConfig, "unknown init method: " + name);
}

std::vector<std::string> top_frequent_tokens(
    std::span<const corpus::DialogSample> samples, std::size_t k,
    const text::Vocabulary& vocab) {
  std::unordered_map<std::string, std::size_t> freq;
  auto count = [&freq](const std::string& s) {
    for (auto& tok : text::word_tokenize(s)) ++freq[tok];
  };
  for (const auto& s : samples) {
    for (const auto& item : s.gs.items) count(item);
    for (const auto& u : s.context) count(u.text);
    count(s.response);
  }

  std::vector<std::pair<std::string, std::size_t>> entries(freq.begin(),
                                                           freq.end());
  std::sort(entries.begin(), entries.end(),
            [&vocab](const auto& a, const auto& b) {
              if (a.second != b.second) return a.second > b.second;
              return vocab.id(a.first) < vocab.id(b.first);
            });
  if (entries.size() > k) entries.resize(k);
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (auto& [tok, n] : entries) out.push_back(std::move(tok));
  return out;
}

std::vector<double> column_stddev(const EmbeddingTable& table) {
  const std::size_t v = table.rows();
  std::vector<double> mean(table.dim, 0.0), sd(table.dim, 0.0);
  if (v == 0) return sd;
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < table.dim; ++j) mean[j] += table.row(i)[j];
  for (std::size_t j = 0; j < table.dim; ++j) mean[j] /= static_cast<double>(v);
  for (std::size_t i = 0; i < v; ++i)
    for (std::size_t j = 0; j < table.dim; ++j) {
      const double d = table.row(i)[j] - mean[j];
      sd[j] += d * d;
    }
  for (std::size_t j = 0; j < table.dim; ++j)
    sd[j] = std::sqrt(sd[j] / static_cast<double>(v));
  return sd;
}

std::vector<double> compute_init_vector(
    const InitMethod& method, const EmbeddingTable& table,
    const text::Vocabulary& vocab,
    std::span<const corpus::DialogSample> train_samples, Rng& rng) {
  if (table.rows() == 0)
    fail(ErrorCode::kValidation, "cannot initialize from an empty table");

  std::vector<double> out(table.dim, 0.0);
  switch (method.kind) {
    case InitKind::kRandom: {
      const auto sd = column_stddev(table);
      for (std::size_t j = 0; j < table.dim; ++j)
        out[j] = rng.normal(0.0, sd[j]);
      break;
    }
    case InitKind::kVocab: {
      const std::size_t i = rng.below(table.rows());
      std::copy_n(table.row(i), table.dim, out.begin());
      break;
    }
    case InitKind::kFrequent: {
      const auto top = top_frequent_tokens(train_samples, 100, vocab);
      if (top.empty())
        fail(ErrorCode::kValidation, "no corpus tokens for frequent init");
      const std::string& tok = top[rng.below(top.size())];
      const std::size_t i = static_cast<std::size_t>(vocab.id(tok));
      std::copy_n(table.row(i), table.dim, out.begin());
      break;
    }
    case InitKind::kSemantic: {
      std::size_t n = 0;
      for (const auto& w : text::word_tokenize(method.explanation)) {
        if (!vocab.contains(w)) continue;
        const auto i = static_cast<std::size_t>(vocab.id(w));
        for (std::size_t j = 0; j < table.dim; ++j) out[j] += table.row(i)[j];
        ++n;
      }
      if (n == 0)
        fail(ErrorCode::kValidation,
             "semantic explanation has no in-vocabulary token: '" +
                 method.explanation + "'");
      for (auto& x : out) x /= static_cast<double>(n);
      break;
    }
  }
  return out;
}

std::pair<EmbeddingTable, std::vector<int>> extend_vocab(
    const EmbeddingTable& table, std::span<const std::string> new_tokens,
    std::span<const std::vector<double>> vectors) {
  if (new_tokens.size() != vectors.size())
    fail(ErrorCode::kValidation, "token/vector count mismatch");

  EmbeddingTable out = table;
  std::vector<int> ids;
  ids.reserve(new_tokens.size());
  std::unordered_map<std::string, bool> present;
  for (const auto& t : table.tokens) present[t] = true;

  for (std::size_t i = 0; i < new_tokens.size(); ++i) {
    if (present.count(new_tokens[i]))
      fail(ErrorCode::kValidation,
           "token already in table: " + new_tokens[i]);
    present[new_tokens[i]] = true;
    if (vectors[i].size() != table.dim)
      fail(ErrorCode::kValidation, "init vector has wrong dimension");
    ids.push_back(static_cast<int>(out.rows()));
    out.tokens.push_back(new_tokens[i]);
    out.weights.insert(out.weights.end(), vectors[i].begin(),
                       vectors[i].end());
  }
  return {std::move(out), std::move(ids)};
}

namespace {

constexpr char kMagic[4] = {'G', 'D', 'G', 'E'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T read_pod(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void save_table(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write embedding table: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint64_t>(table.rows()));
  write_pod(out, static_cast<std::uint64_t>(table.dim));
  for (const auto& t : table.tokens) {
    write_pod(out, static_cast<std::uint32_t>(t.size()));
    out.write(t.data(), static_cast<std::streamsize>(t.size()));
  }
  out.write(reinterpret_cast<const char*>(table.weights.data()),
            static_cast<std::streamsize>(table.weights.size() *
                                         sizeof(double)));
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

EmbeddingTable load_table(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open embedding table: " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    fail(ErrorCode::kIo, "not an embedding table file: " + path);
  if (read_pod<std::uint32_t>(in) != kVersion)
    fail(ErrorCode::kIo, "unsupported embedding table version: " + path);
  const auto rows = read_pod<std::uint64_t>(in);
  const auto dim = read_pod<std::uint64_t>(in);
  EmbeddingTable table;
  table.dim = static_cast<std::size_t>(dim);
  table.tokens.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const auto len = read_pod<std::uint32_t>(in);
    std::string t(len, '\0');
    in.read(t.data(), len);
    table.tokens.push_back(std::move(t));
  }
  table.weights.resize(static_cast<std::size_t>(rows * dim));
  in.read(reinterpret_cast<char*>(table.weights.data()),
          static_cast<std::streamsize>(table.weights.size() * sizeof(double)));
  if (!in) fail(ErrorCode::kIo, "truncated embedding table: " + path);
  return table;
}

}  // namespace gdg::embed
