// SPDX-License-Identifier: Apache-2.0
//
// Embedding table plus the four initialization methods for newly added
// indicator tokens: random (table statistics), vocab (copy a random row),
// frequent (copy the row of a frequent corpus token) and semantic (mean of
// the rows of a natural language explanation).

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gdg/corpus.hpp"
#include "gdg/rng.hpp"
#include "gdg/text.hpp"

namespace gdg::embed {

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> tokens;  // row i belongs to tokens[i]
  std::vector<double> weights;      // row major, tokens.size() x dim

  std::size_t rows() const { return tokens.size(); }
  double* row(std::size_t i) { return weights.data() + i * dim; }
  const double* row(std::size_t i) const { return weights.data() + i * dim; }
};

enum class InitKind { kRandom, kVocab, kFrequent, kSemantic };

const char* init_kind_name(InitKind k);
InitKind init_kind_from_name(const std::string& name);

struct InitMethod {
  InitKind kind = InitKind::kSemantic;
  std::string explanation;  // semantic only
};

// The k most frequent word tokens over grounding text, context and responses
// of the given samples. Ties break by vocabulary id ascending; tokens must be
// in the vocabulary (guaranteed when it was built over the same samples).
std::vector<std::string> top_frequent_tokens(
    std::span<const corpus::DialogSample> samples, std::size_t k,
    const text::Vocabulary& vocab);

// One init vector for a new token. Reads the rng only for the methods that
// sample (random, vocab, frequent).
std::vector<double> compute_init_vector(
    const InitMethod& method, const EmbeddingTable& table,
    const text::Vocabulary& vocab,
    std::span<const corpus::DialogSample> train_samples, Rng& rng);

// Appends rows for new tokens; existing rows are untouched. Returns the new
// table and the row ids of the added tokens.
std::pair<EmbeddingTable, std::vector<int>> extend_vocab(
    const EmbeddingTable& table, std::span<const std::string> new_tokens,
    std::span<const std::vector<double>> vectors);

// Per-coordinate population standard deviation over all rows.
std::vector<double> column_stddev(const EmbeddingTable& table);

// Binary serialization, little endian, bit exact across save/load.
void save_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_table(const std::string& path);

}  // namespace gdg::embed
