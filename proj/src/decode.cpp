// SPDX-License-Identifier: Apache-2.0

#include "gdg/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gdg/error.hpp"

namespace gdg::decode {

namespace {

struct Hypothesis {
  std::vector<int> tokens;
  double score = 0.0;
};

// score desc, then token list ascending: a strict ordering that makes every
// selection deterministic
bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.tokens < b.tokens;
}

void check_cfg(const model::GenerationConfig& cfg) {
  if (cfg.max_len == 0) fail(ErrorCode::kConfig, "max_len must be > 0");
  if (cfg.min_len > cfg.max_len)
    fail(ErrorCode::kConfig, "min_len exceeds max_len");
}

}  // namespace

std::vector<int> generate_beam(const model::Backend& backend,
                               const prompting::AssembledInput& prompt,
                               const model::GenerationConfig& cfg) {
  check_cfg(cfg);
  if (cfg.beam_size == 0) fail(ErrorCode::kConfig, "beam_size must be > 0");
  const int end = prompt.end_token;
  const std::size_t vsz = backend.vocab_size();

  std::vector<Hypothesis> alive{Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (std::size_t step = 1; step <= cfg.max_len && !alive.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(alive.size() * vsz);
    for (const auto& hyp : alive) {
      const auto lp = backend.next_logprobs(prompt, hyp.tokens);
      for (std::size_t tok = 0; tok < vsz; ++tok) {
        if (static_cast<int>(tok) == end) {
          if (hyp.tokens.size() >= cfg.min_len) {
            Hypothesis done = hyp;
            done.score += lp[tok];
            finished.push_back(std::move(done));
          }
          continue;
        }
        Hypothesis next = hyp;
        next.tokens.push_back(static_cast<int>(tok));
        next.score += lp[tok];
        candidates.push_back(std::move(next));
      }
    }
    if (candidates.size() > cfg.beam_size) {
      std::partial_sort(candidates.begin(),
                        candidates.begin() + static_cast<long>(cfg.beam_size),
                        candidates.end(), better);
      candidates.resize(cfg.beam_size);
    } else {
      std::sort(candidates.begin(), candidates.end(), better);
    }
    alive = std::move(candidates);
  }

  // whatever is still alive has max_len tokens: forced stop, score as is
  for (auto& hyp : alive) finished.push_back(std::move(hyp));
  if (finished.empty())
    fail(ErrorCode::kInternal, "beam search produced no hypothesis");
  return std::min_element(finished.begin(), finished.end(),
                          better)->tokens;
}

std::vector<double> nucleus_distribution(std::span<const double> probs,
                                         double p) {
  const std::size_t n = probs.size();
  if (n == 0) fail(ErrorCode::kValidation, "empty distribution");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&probs](std::size_t a, std::size_t b) {
    if (probs[a] != probs[b]) return probs[a] > probs[b];
    return a < b;
  });

  std::vector<double> out(n, 0.0);
  double kept_mass = 0.0;
  double cum = 0.0;
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t i = order[rank];
    cum += probs[i];
    // keep while the running total stays within p; the top token always stays
    if (rank > 0 && p < 1.0 && cum > p) break;
    out[i] = probs[i];
    kept_mass += probs[i];
  }
  if (kept_mass <= 0.0)
    fail(ErrorCode::kValidation, "distribution has no probability mass");
  for (auto& x : out) x /= kept_mass;
  return out;
}

std::vector<int> generate_top_p(const model::Backend& backend,
                                const prompting::AssembledInput& prompt,
                                const model::GenerationConfig& cfg, Rng& rng) {
  check_cfg(cfg);
  if (cfg.top_p <= 0.0) fail(ErrorCode::kConfig, "top_p must be > 0");
  if (cfg.temperature <= 0.0)
    fail(ErrorCode::kConfig, "temperature must be > 0");
  const int end = prompt.end_token;
  const std::size_t vsz = backend.vocab_size();

  std::vector<int> tokens;
  while (tokens.size() < cfg.max_len) {
    auto lp = backend.next_logprobs(prompt, tokens);
    if (tokens.size() < cfg.min_len && end >= 0 &&
        static_cast<std::size_t>(end) < vsz)
      lp[static_cast<std::size_t>(end)] =
          -std::numeric_limits<double>::infinity();

    // temperature then softmax (log domain for stability)
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : lp) mx = std::max(mx, x / cfg.temperature);
    std::vector<double> probs(vsz);
    double sum = 0.0;
    for (std::size_t i = 0; i < vsz; ++i) {
      probs[i] = std::exp(lp[i] / cfg.temperature - mx);
      sum += probs[i];
    }
    for (auto& x : probs) x /= sum;

    const auto dist = nucleus_distribution(probs, cfg.top_p);
    const double u = rng.uniform();
    double acc = 0.0;
    std::size_t chosen = 0;
    bool picked = false;
    for (std::size_t i = 0; i < vsz; ++i) {
      if (dist[i] <= 0.0) continue;
      chosen = i;  // falls back to the last kept token on rounding slack
      acc += dist[i];
      if (u < acc) {
        picked = true;
        break;
      }
    }
    (void)picked;
    if (static_cast<int>(chosen) == end) break;
    tokens.push_back(static_cast<int>(chosen));
  }
  return tokens;
}

std::vector<int> generate(const model::Backend& backend,
                          const prompting::AssembledInput& prompt,
                          const model::GenerationConfig& cfg, Rng& rng) {
  if (cfg.mode == model::DecodeMode::kBeam)
    return generate_beam(backend, prompt, cfg);
  return generate_top_p(backend, prompt, cfg, rng);
}

}  // namespace gdg::decode
