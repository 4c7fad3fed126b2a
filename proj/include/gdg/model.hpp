// SPDX-License-Identifier: Apache-2.0
//
// Toy autoregressive language model with exact manual backpropagation, the
// AdamW optimizer, the training loop with perplexity based checkpoint
// selection, and checkpoint serialization.
//
// The model is a small pre-norm causal transformer in double precision:
// token + position embeddings, n_layers of (layernorm, multi-head causal
// attention, residual, layernorm, gelu mlp, residual), a final layernorm and
// a (optionally tied) projection onto the vocabulary. It is deliberately
// tiny: the point is exact, testable arithmetic, not capability.

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gdg/embedding.hpp"
#include "gdg/prompting.hpp"
#include "gdg/text.hpp"

namespace gdg::model {

struct Tensor {
  std::string name;
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;  // values, row major
  std::vector<double> g;  // accumulated gradients, same shape

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c)
      : name(std::move(n)), rows(r), cols(c), v(r * c, 0.0), g(r * c, 0.0) {}
  std::size_t size() const { return v.size(); }
};

struct ToyLMConfig {
  std::size_t dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t mlp_hidden = 0;  // 0 means 4 * dim
  std::size_t max_positions = 512;
  bool tie_embeddings = true;
  double init_std = 0.02;

  std::size_t mlp() const { return mlp_hidden ? mlp_hidden : 4 * dim; }
};

// Scoring interface the decoders and metrics run against. Implemented by
// ToyLM for single sequence inputs and by test doubles for the
// encoder/decoder layout.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::size_t vocab_size() const = 0;
  // Sum of negative log likelihood over the masked positions, with the
  // number of masked tokens (the perplexity denominator).
  virtual std::pair<double, std::size_t> masked_nll(
      const prompting::AssembledInput& input) const = 0;
  // Distribution over the next token given the conditioning part of the
  // prompt plus already generated tokens. Returns log probabilities, size
  // vocab_size().
  virtual std::vector<double> next_logprobs(
      const prompting::AssembledInput& prompt,
      std::span<const int> generated) const = 0;
};

class ToyLM : public Backend {
 public:
  ToyLM() = default;
  // Gaussian init of all weights and embeddings, zeros for biases, ones for
  // layernorm gains. Deterministic in the seed.
  ToyLM(const ToyLMConfig& cfg, text::Vocabulary vocab, std::uint64_t seed);
  static ToyLM zeros(const ToyLMConfig& cfg, text::Vocabulary vocab);

  const ToyLMConfig& config() const { return cfg_; }
  const text::Vocabulary& vocab() const { return vocab_; }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  Tensor& tok_embedding() { return tensors_[0]; }
  const Tensor& tok_embedding() const { return tensors_[0]; }

  void zero_grads();

  // Embedding table view and vocabulary extension. New tokens become extra
  // embedding rows; with an untied output head they get zero output rows and
  // stay input-only.
  embed::EmbeddingTable embedding_table() const;
  void extend_embedding(std::span<const std::string> new_tokens,
                        std::span<const std::vector<double>> vectors);

  // Row t holds log p(next | tokens[0..t]); shape [len x vocab].
  std::vector<double> forward_logprobs(std::span<const int> tokens) const;

  // Mean negative log likelihood over the masked positions.
  double loss(const prompting::AssembledInput& input) const;
  // Same, but also accumulates weight * d loss / d theta into the gradient
  // buffers. Returns the unweighted loss.
  double loss_backward(const prompting::AssembledInput& input, double weight);

  // Backend
  std::size_t vocab_size() const override { return vocab_.size(); }
  std::pair<double, std::size_t> masked_nll(
      const prompting::AssembledInput& input) const override;
  std::vector<double> next_logprobs(
      const prompting::AssembledInput& prompt,
      std::span<const int> generated) const override;

 private:
  ToyLMConfig cfg_;
  text::Vocabulary vocab_;
  std::vector<Tensor> tensors_;

  void build_tensors();
  std::size_t layer_base(std::size_t layer) const { return 2 + layer * 16; }
};

// ---------------------------------------------------------------------------
// optimization

struct AdamWConfig {
  double lr = 2e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// One decoupled AdamW update on a flat parameter array. t is the 1-based
// update count; lr_t the effective learning rate for this step.
void adamw_update(std::span<double> param, std::span<const double> grad,
                  std::span<double> m, std::span<double> v, std::size_t t,
                  const AdamWConfig& hp, double lr_t);

// Warmup then linear decay, as a multiplier on the base learning rate.
// step is 1-based; returns 0 once step reaches total.
double lr_schedule(std::size_t step, std::size_t warmup, std::size_t total);

class AdamW {
 public:
  AdamW(ToyLM& model, const AdamWConfig& hp);
  // Applies one update from the accumulated gradients; factor scales the
  // base learning rate (the schedule value). Fails on non-finite gradients.
  void step(double factor);
  std::size_t steps_taken() const { return t_; }

 private:
  ToyLM* model_;
  AdamWConfig hp_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// training

struct TrainConfig {
  std::size_t batch_size = 5;
  double learning_rate = 2e-5;
  std::size_t warmup_steps = 5;
  std::size_t epochs = 10;
  double weight_decay = 0.01;
  std::uint64_t run_seed = 0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_ppl = 0.0;
};

struct TrainResult {
  ToyLM model;             // parameters of the selected epoch
  double valid_ppl = 0.0;  // its validation perplexity
  std::size_t best_epoch = 0;  // 0 means the initial parameters (epochs == 0)
  std::vector<EpochStats> history;
};

// Epoch loop with per-epoch reshuffling, warmup + linear decay schedule and
// selection of the epoch with the lowest validation perplexity (ties go to
// the earlier epoch). Deterministic in (model, inputs, cfg).
TrainResult train(const ToyLM& initial,
                  std::span<const prompting::AssembledInput> train_inputs,
                  std::span<const prompting::AssembledInput> valid_inputs,
                  const TrainConfig& cfg);

// Token-weighted perplexity of a set of assembled inputs.
double validation_perplexity(
    const Backend& backend,
    std::span<const prompting::AssembledInput> inputs);

// ---------------------------------------------------------------------------
// generation settings (shared by the decoders)

enum class DecodeMode { kBeam, kTopP };

struct GenerationConfig {
  DecodeMode mode = DecodeMode::kBeam;
  std::size_t beam_size = 3;
  double top_p = 0.9;
  double temperature = 0.7;
  std::size_t min_len = 10;
  std::size_t max_len = 50;
};

// ---------------------------------------------------------------------------
// checkpoints

struct Checkpoint {
  ToyLM model;
  double valid_ppl = 0.0;
  std::size_t best_epoch = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

// ---------------------------------------------------------------------------
// gradient checking

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  std::string worst_tensor;
  std::size_t n_checked = 0;
};

// Compares analytic gradients against central finite differences on
// n_probes randomly chosen parameters. eps is the probe step.
GradCheckResult gradcheck(ToyLM& model, const prompting::AssembledInput& input,
                          std::size_t n_probes, double eps,
                          std::uint64_t seed);

}  // namespace gdg::model
