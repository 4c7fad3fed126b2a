// SPDX-License-Identifier: Apache-2.0
//
// Beam search and nucleus (top-p) sampling over a scoring backend.
//
// Shared conventions: a hypothesis is the list of generated content tokens,
// excluding the end token. The end token may only be emitted once min_len
// tokens exist; at max_len generation stops unconditionally (no end token
// bonus). A finished hypothesis scores the sum of the log probabilities of
// every emitted token, including the terminating end token when there is
// one. Ties break deterministically: higher score first, then
// lexicographically smaller token sequence.

#pragma once

#include <span>
#include <vector>

#include "gdg/model.hpp"
#include "gdg/prompting.hpp"
#include "gdg/rng.hpp"

namespace gdg::decode {

std::vector<int> generate_beam(const model::Backend& backend,
                               const prompting::AssembledInput& prompt,
                               const model::GenerationConfig& cfg);

std::vector<int> generate_top_p(const model::Backend& backend,
                                const prompting::AssembledInput& prompt,
                                const model::GenerationConfig& cfg, Rng& rng);

std::vector<int> generate(const model::Backend& backend,
                          const prompting::AssembledInput& prompt,
                          const model::GenerationConfig& cfg, Rng& rng);

// The renormalized nucleus distribution: tokens are ranked by probability
// (ties by id); the nucleus keeps tokens while the inclusive cumulative mass
// stays within p, and always keeps the top token. p >= 1 keeps everything.
// Exposed separately so tests can pin the cut rule.
std::vector<double> nucleus_distribution(std::span<const double> probs,
                                         double p);

}  // namespace gdg::decode
