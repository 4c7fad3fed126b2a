// SPDX-License-Identifier: Apache-2.0

#include "gdg/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gdg/error.hpp"
#include "gdg/kernels.hpp"
#include "gdg/rng.hpp"

namespace gdg::model {

namespace {

void add_bias_rows(double* x, const double* b, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < cols; ++j) x[r * cols + j] += b[j];
}

void add_colsum(const double* dy, double* db, std::size_t rows,
                std::size_t cols) {
  for (std::size_t j = 0; j < cols; ++j) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += dy[r * cols + j];
    db[j] += s;
  }
}

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

void ToyLM::build_tensors() {
  const std::size_t d = cfg_.dim;
  const std::size_t f = cfg_.mlp();
  const std::size_t v = vocab_.size();
  if (d == 0 || cfg_.n_heads == 0 || d % cfg_.n_heads != 0)
    fail(ErrorCode::kConfig, "model dim must be a positive multiple of heads");

  tensors_.clear();
  tensors_.emplace_back("tok_emb", v, d);
  tensors_.emplace_back("pos_emb", cfg_.max_positions, d);
  for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
    const std::string p = "l" + std::to_string(l) + ".";
    tensors_.emplace_back(p + "ln1.g", 1, d);
    tensors_.emplace_back(p + "ln1.b", 1, d);
    tensors_.emplace_back(p + "wq", d, d);
    tensors_.emplace_back(p + "bq", 1, d);
    tensors_.emplace_back(p + "wk", d, d);
    tensors_.emplace_back(p + "bk", 1, d);
    tensors_.emplace_back(p + "wv", d, d);
    tensors_.emplace_back(p + "bv", 1, d);
    tensors_.emplace_back(p + "wo", d, d);
    tensors_.emplace_back(p + "bo", 1, d);
    tensors_.emplace_back(p + "ln2.g", 1, d);
    tensors_.emplace_back(p + "ln2.b", 1, d);
    tensors_.emplace_back(p + "w1", d, f);
    tensors_.emplace_back(p + "b1", 1, f);
    tensors_.emplace_back(p + "w2", f, d);
    tensors_.emplace_back(p + "b2", 1, d);
  }
  tensors_.emplace_back("lnf.g", 1, d);
  tensors_.emplace_back("lnf.b", 1, d);
  if (!cfg_.tie_embeddings) tensors_.emplace_back("w_out", v, d);
}

ToyLM::ToyLM(const ToyLMConfig& cfg, text::Vocabulary vocab,
             std::uint64_t seed)
    : cfg_(cfg), vocab_(std::move(vocab)) {
  build_tensors();
  Rng rng(seed);
  for (auto& t : tensors_) {
    if (t.name.ends_with(".g")) {
      std::fill(t.v.begin(), t.v.end(), 1.0);  // layernorm gains
    } else if (t.rows == 1) {
      std::fill(t.v.begin(), t.v.end(), 0.0);  // biases, layernorm shifts
    } else {
      for (auto& x : t.v) x = rng.normal(0.0, cfg_.init_std);
    }
  }
}

ToyLM ToyLM::zeros(const ToyLMConfig& cfg, text::Vocabulary vocab) {
  ToyLM m;
  m.cfg_ = cfg;
  m.vocab_ = std::move(vocab);
  m.build_tensors();
  for (auto& t : m.tensors_) std::fill(t.v.begin(), t.v.end(), 0.0);
  return m;
}

void ToyLM::zero_grads() {
  for (auto& t : tensors_) std::fill(t.g.begin(), t.g.end(), 0.0);
}

embed::EmbeddingTable ToyLM::embedding_table() const {
  embed::EmbeddingTable table;
  table.dim = cfg_.dim;
  table.tokens = vocab_.tokens();
  table.weights = tok_embedding().v;
  return table;
}

void ToyLM::extend_embedding(std::span<const std::string> new_tokens,
                             std::span<const std::vector<double>> vectors) {
  auto [table, ids] = embed::extend_vocab(embedding_table(), new_tokens,
                                          vectors);
  Tensor& emb = tok_embedding();
  emb.rows = table.rows();
  emb.v = std::move(table.weights);
  emb.g.assign(emb.v.size(), 0.0);
  for (const auto& tok : new_tokens) vocab_.add_token(tok);

  if (!cfg_.tie_embeddings) {
    Tensor& w_out = tensors_.back();
    // output rows for input-only tokens stay zero
    w_out.v.resize(vocab_.size() * cfg_.dim, 0.0);
    w_out.g.assign(w_out.v.size(), 0.0);
    w_out.rows = vocab_.size();
  }
}

// ---------------------------------------------------------------------------
// forward / backward

namespace {

struct LayerCache {
  std::vector<double> x_in, a, q, k, v, attn, ctx, o, x_mid, m, u, gu, z;
  std::vector<double> mean1, rstd1, mean2, rstd2;
};

struct ForwardCache {
  std::size_t t = 0;
  std::vector<LayerCache> layers;
  std::vector<double> x_final, h, logits, logprobs;
  std::vector<double> meanf, rstdf;
};

}  // namespace

// Runs the transformer over the token ids. When cache is non-null the
// intermediate activations are kept for the backward pass.
static void forward_pass(const ToyLM& model, const std::vector<Tensor>& ts,
                         std::span<const int> tokens, ForwardCache& fc) {
  const auto& cfg = model.config();
  const std::size_t t = tokens.size();
  const std::size_t d = cfg.dim;
  const std::size_t f = cfg.mlp();
  const std::size_t vsz = model.vocab_size();
  const std::size_t heads = cfg.n_heads;
  const std::size_t dh = d / heads;

  if (t == 0) fail(ErrorCode::kValidation, "empty input sequence");
  if (t > cfg.max_positions)
    fail(ErrorCode::kValidation,
         "input length " + std::to_string(t) + " exceeds max positions " +
             std::to_string(cfg.max_positions));
  for (int id : tokens)
    if (id < 0 || static_cast<std::size_t>(id) >= vsz)
      fail(ErrorCode::kValidation, "token id out of range: " +
                                       std::to_string(id));

  fc.t = t;
  fc.layers.resize(cfg.n_layers);

  const Tensor& emb = ts[0];
  const Tensor& pos = ts[1];
  std::vector<double> x(t * d);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j)
      x[i * d + j] = emb.v[static_cast<std::size_t>(tokens[i]) * d + j] +
                     pos.v[i * d + j];

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    LayerCache& lc = fc.layers[l];
    const std::size_t base = 2 + l * 16;
    const Tensor& ln1g = ts[base + 0];
    const Tensor& ln1b = ts[base + 1];
    const Tensor& wq = ts[base + 2];
    const Tensor& bq = ts[base + 3];
    const Tensor& wk = ts[base + 4];
    const Tensor& bk = ts[base + 5];
    const Tensor& wv = ts[base + 6];
    const Tensor& bv = ts[base + 7];
    const Tensor& wo = ts[base + 8];
    const Tensor& bo = ts[base + 9];
    const Tensor& ln2g = ts[base + 10];
    const Tensor& ln2b = ts[base + 11];
    const Tensor& w1 = ts[base + 12];
    const Tensor& b1 = ts[base + 13];
    const Tensor& w2 = ts[base + 14];
    const Tensor& b2 = ts[base + 15];

    lc.x_in = x;
    lc.a.resize(t * d);
    lc.mean1.resize(t);
    lc.rstd1.resize(t);
    kernels::layernorm(lc.x_in.data(), ln1g.v.data(), ln1b.v.data(),
                       lc.a.data(), lc.mean1.data(), lc.rstd1.data(), t, d);

    lc.q.resize(t * d);
    lc.k.resize(t * d);
    lc.v.resize(t * d);
    kernels::matmul(lc.a.data(), wq.v.data(), lc.q.data(), t, d, d);
    kernels::matmul(lc.a.data(), wk.v.data(), lc.k.data(), t, d, d);
    kernels::matmul(lc.a.data(), wv.v.data(), lc.v.data(), t, d, d);
    add_bias_rows(lc.q.data(), bq.v.data(), t, d);
    add_bias_rows(lc.k.data(), bk.v.data(), t, d);
    add_bias_rows(lc.v.data(), bv.v.data(), t, d);

    lc.attn.resize(heads * t * t);
    lc.ctx.resize(t * d);
    kernels::attention(lc.q.data(), lc.k.data(), lc.v.data(), lc.attn.data(),
                       lc.ctx.data(), t, heads, dh);

    lc.o.resize(t * d);
    kernels::matmul(lc.ctx.data(), wo.v.data(), lc.o.data(), t, d, d);
    add_bias_rows(lc.o.data(), bo.v.data(), t, d);

    lc.x_mid.resize(t * d);
    for (std::size_t i = 0; i < t * d; ++i)
      lc.x_mid[i] = lc.x_in[i] + lc.o[i];

    lc.m.resize(t * d);
    lc.mean2.resize(t);
    lc.rstd2.resize(t);
    kernels::layernorm(lc.x_mid.data(), ln2g.v.data(), ln2b.v.data(),
                       lc.m.data(), lc.mean2.data(), lc.rstd2.data(), t, d);

    lc.u.resize(t * f);
    kernels::matmul(lc.m.data(), w1.v.data(), lc.u.data(), t, d, f);
    add_bias_rows(lc.u.data(), b1.v.data(), t, f);
    lc.gu.resize(t * f);
    kernels::gelu(lc.u.data(), lc.gu.data(), t * f);
    lc.z.resize(t * d);
    kernels::matmul(lc.gu.data(), w2.v.data(), lc.z.data(), t, f, d);
    add_bias_rows(lc.z.data(), b2.v.data(), t, d);

    x.resize(t * d);
    for (std::size_t i = 0; i < t * d; ++i) x[i] = lc.x_mid[i] + lc.z[i];
  }

  fc.x_final = x;
  const std::size_t base = 2 + cfg.n_layers * 16;
  const Tensor& lnfg = ts[base + 0];
  const Tensor& lnfb = ts[base + 1];
  fc.h.resize(t * d);
  fc.meanf.resize(t);
  fc.rstdf.resize(t);
  kernels::layernorm(fc.x_final.data(), lnfg.v.data(), lnfb.v.data(),
                     fc.h.data(), fc.meanf.data(), fc.rstdf.data(), t, d);

  const Tensor& wout = cfg.tie_embeddings ? ts[0] : ts[base + 2];
  fc.logits.resize(t * vsz);
  kernels::matmul_nt(fc.h.data(), wout.v.data(), fc.logits.data(), t, d, vsz);
  fc.logprobs.resize(t * vsz);
  kernels::log_softmax_rows(fc.logits.data(), fc.logprobs.data(), t, vsz);
}

std::vector<double> ToyLM::forward_logprobs(std::span<const int> tokens) const {
  ForwardCache fc;
  forward_pass(*this, tensors_, tokens, fc);
  return std::move(fc.logprobs);
}

namespace {

// masked target positions; validates the mask shape
std::vector<std::size_t> target_positions(
    const prompting::AssembledInput& input) {
  if (input.layout != prompting::Layout::kSingleSequence)
    fail(ErrorCode::kValidation,
         "this model scores single sequence inputs only");
  if (input.loss_mask.size() != input.tokens.size())
    fail(ErrorCode::kValidation, "loss mask length mismatch");
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < input.loss_mask.size(); ++i)
    if (input.loss_mask[i]) {
      if (i == 0)
        fail(ErrorCode::kValidation,
             "masked position 0 has no preceding token");
      targets.push_back(i);
    }
  if (targets.empty())
    fail(ErrorCode::kValidation, "input has no masked positions");
  return targets;
}

}  // namespace

double ToyLM::loss(const prompting::AssembledInput& input) const {
  const auto [nll, n] = masked_nll(input);
  return nll / static_cast<double>(n);
}

std::pair<double, std::size_t> ToyLM::masked_nll(
    const prompting::AssembledInput& input) const {
  const auto targets = target_positions(input);
  ForwardCache fc;
  forward_pass(*this, tensors_, input.tokens, fc);
  const std::size_t vsz = vocab_.size();
  double nll = 0.0;
  for (const std::size_t t : targets)
    nll -= fc.logprobs[(t - 1) * vsz +
                       static_cast<std::size_t>(input.tokens[t])];
  return {nll, targets.size()};
}

double ToyLM::loss_backward(const prompting::AssembledInput& input,
                            double weight) {
  const auto targets = target_positions(input);
  ForwardCache fc;
  forward_pass(*this, tensors_, input.tokens, fc);

  const std::size_t t = fc.t;
  const std::size_t d = cfg_.dim;
  const std::size_t f = cfg_.mlp();
  const std::size_t vsz = vocab_.size();
  const std::size_t heads = cfg_.n_heads;
  const std::size_t dh = d / heads;
  const auto& tokens = input.tokens;

  double loss_sum = 0.0;
  for (const std::size_t p : targets)
    loss_sum -=
        fc.logprobs[(p - 1) * vsz + static_cast<std::size_t>(tokens[p])];
  const double loss = loss_sum / static_cast<double>(targets.size());

  // softmax cross entropy gradient, only rows preceding a masked target are
  // non-zero
  const double scale = weight / static_cast<double>(targets.size());
  std::vector<double> dlogits(t * vsz, 0.0);
  for (const std::size_t p : targets) {
    const std::size_t r = p - 1;
    for (std::size_t j = 0; j < vsz; ++j)
      dlogits[r * vsz + j] += scale * std::exp(fc.logprobs[r * vsz + j]);
    dlogits[r * vsz + static_cast<std::size_t>(tokens[p])] -= scale;
  }

  const std::size_t base_f = 2 + cfg_.n_layers * 16;
  Tensor& emb = tensors_[0];
  Tensor& pos = tensors_[1];
  Tensor& lnfg = tensors_[base_f + 0];
  Tensor& lnfb = tensors_[base_f + 1];

  // output projection
  std::vector<double> dh_buf(t * d);
  if (cfg_.tie_embeddings) {
    kernels::matmul(dlogits.data(), emb.v.data(), dh_buf.data(), t, vsz, d);
    kernels::matmul_tn_acc(dlogits.data(), fc.h.data(), emb.g.data(), t, vsz,
                           d);
  } else {
    Tensor& wout = tensors_[base_f + 2];
    kernels::matmul(dlogits.data(), wout.v.data(), dh_buf.data(), t, vsz, d);
    kernels::matmul_tn_acc(dlogits.data(), fc.h.data(), wout.g.data(), t, vsz,
                           d);
  }

  // final layernorm
  std::vector<double> dx(t * d);
  kernels::layernorm_backward(fc.x_final.data(), lnfg.v.data(),
                              fc.meanf.data(), fc.rstdf.data(), dh_buf.data(),
                              dx.data(), lnfg.g.data(), lnfb.g.data(), t, d);

  std::vector<double> tmp(t * d), dq(t * d), dk(t * d), dv(t * d);
  std::vector<double> dgu(t * f), du(t * f), dm(t * d);
  for (std::size_t l = cfg_.n_layers; l-- > 0;) {
    LayerCache& lc = fc.layers[l];
    const std::size_t base = 2 + l * 16;
    Tensor& ln1g = tensors_[base + 0];
    Tensor& ln1b = tensors_[base + 1];
    Tensor& wq = tensors_[base + 2];
    Tensor& bq = tensors_[base + 3];
    Tensor& wk = tensors_[base + 4];
    Tensor& bk = tensors_[base + 5];
    Tensor& wv = tensors_[base + 6];
    Tensor& bv = tensors_[base + 7];
    Tensor& wo = tensors_[base + 8];
    Tensor& bo = tensors_[base + 9];
    Tensor& ln2g = tensors_[base + 10];
    Tensor& ln2b = tensors_[base + 11];
    Tensor& w1 = tensors_[base + 12];
    Tensor& b1 = tensors_[base + 13];
    Tensor& w2 = tensors_[base + 14];
    Tensor& b2 = tensors_[base + 15];

    // dx arrives as the gradient at x_out = x_mid + z
    std::vector<double>& dxmid = dx;  // alias: residual passes through

    // mlp branch
    kernels::matmul_nt(dx.data(), w2.v.data(), dgu.data(), t, d, f);
    kernels::matmul_tn_acc(lc.gu.data(), dx.data(), w2.g.data(), t, f, d);
    add_colsum(dx.data(), b2.g.data(), t, d);
    kernels::gelu_backward(lc.u.data(), dgu.data(), du.data(), t * f);
    kernels::matmul_nt(du.data(), w1.v.data(), dm.data(), t, f, d);
    kernels::matmul_tn_acc(lc.m.data(), du.data(), w1.g.data(), t, d, f);
    add_colsum(du.data(), b1.g.data(), t, f);

    // ln2 feeds from x_mid; add its gradient to the residual flow
    kernels::layernorm_backward(lc.x_mid.data(), ln2g.v.data(),
                                lc.mean2.data(), lc.rstd2.data(), dm.data(),
                                tmp.data(), ln2g.g.data(), ln2b.g.data(), t,
                                d);
    add_into(dxmid, tmp);

    // attention output projection
    std::vector<double>& do_buf = dm;  // reuse as [t x d] scratch
    kernels::matmul_nt(dxmid.data(), wo.v.data(), do_buf.data(), t, d, d);
    kernels::matmul_tn_acc(lc.ctx.data(), dxmid.data(), wo.g.data(), t, d, d);
    add_colsum(dxmid.data(), bo.g.data(), t, d);

    kernels::attention_backward(lc.q.data(), lc.k.data(), lc.v.data(),
                                lc.attn.data(), do_buf.data(), dq.data(),
                                dk.data(), dv.data(), t, heads, dh);

    // back through the qkv projections into the ln1 output
    std::vector<double> da(t * d);
    kernels::matmul_nt(dq.data(), wq.v.data(), da.data(), t, d, d);
    kernels::matmul_nt(dk.data(), wk.v.data(), tmp.data(), t, d, d);
    add_into(da, tmp);
    kernels::matmul_nt(dv.data(), wv.v.data(), tmp.data(), t, d, d);
    add_into(da, tmp);
    kernels::matmul_tn_acc(lc.a.data(), dq.data(), wq.g.data(), t, d, d);
    kernels::matmul_tn_acc(lc.a.data(), dk.data(), wk.g.data(), t, d, d);
    kernels::matmul_tn_acc(lc.a.data(), dv.data(), wv.g.data(), t, d, d);
    add_colsum(dq.data(), bq.g.data(), t, d);
    add_colsum(dk.data(), bk.g.data(), t, d);
    add_colsum(dv.data(), bv.g.data(), t, d);

    kernels::layernorm_backward(lc.x_in.data(), ln1g.v.data(),
                                lc.mean1.data(), lc.rstd1.data(), da.data(),
                                tmp.data(), ln1g.g.data(), ln1b.g.data(), t,
                                d);
    add_into(dx, tmp);  // dx now holds the gradient at the layer input
  }

  // embeddings: scatter-add per token, plain add for positions
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      emb.g[static_cast<std::size_t>(tokens[i]) * d + j] += dx[i * d + j];
      pos.g[i * d + j] += dx[i * d + j];
    }

  return loss;
}

std::vector<double> ToyLM::next_logprobs(
    const prompting::AssembledInput& prompt,
    std::span<const int> generated) const {
  if (prompt.layout != prompting::Layout::kSingleSequence)
    fail(ErrorCode::kValidation,
         "this model scores single sequence inputs only");
  // conditioning = everything before the first masked position
  std::size_t cond = prompt.tokens.size();
  for (std::size_t i = 0; i < prompt.loss_mask.size(); ++i)
    if (prompt.loss_mask[i]) {
      cond = i;
      break;
    }
  std::vector<int> seq(prompt.tokens.begin(),
                       prompt.tokens.begin() + static_cast<long>(cond));
  seq.insert(seq.end(), generated.begin(), generated.end());
  if (seq.empty())
    fail(ErrorCode::kValidation, "cannot predict from an empty prefix");
  const auto lp = forward_logprobs(seq);
  const std::size_t vsz = vocab_.size();
  return std::vector<double>(lp.end() - static_cast<long>(vsz), lp.end());
}

// ---------------------------------------------------------------------------
// optimizer

void adamw_update(std::span<double> param, std::span<const double> grad,
                  std::span<double> m, std::span<double> v, std::size_t t,
                  const AdamWConfig& hp, double lr_t) {
  const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * grad[i];
    v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= lr_t * (mhat / (std::sqrt(vhat) + hp.eps) +
                        hp.weight_decay * param[i]);
  }
}

double lr_schedule(std::size_t step, std::size_t warmup, std::size_t total) {
  if (step >= total) return 0.0;
  if (warmup > 0 && step < warmup)
    return static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup) return 0.0;
  return static_cast<double>(total - step) /
         static_cast<double>(total - warmup);
}

AdamW::AdamW(ToyLM& model, const AdamWConfig& hp) : model_(&model), hp_(hp) {
  for (const auto& t : model.tensors()) {
    m_.emplace_back(t.size(), 0.0);
    v_.emplace_back(t.size(), 0.0);
  }
}

void AdamW::step(double factor) {
  ++t_;
  auto& tensors = model_->tensors();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    for (double g : tensors[i].g)
      if (!std::isfinite(g))
        fail(ErrorCode::kDivergence,
             "non-finite gradient in " + tensors[i].name);
    adamw_update(tensors[i].v, tensors[i].g, m_[i], v_[i], t_, hp_,
                 hp_.lr * factor);
  }
}

// ---------------------------------------------------------------------------
// training loop

double validation_perplexity(
    const Backend& backend,
    std::span<const prompting::AssembledInput> inputs) {
  double nll = 0.0;
  std::size_t count = 0;
  for (const auto& in : inputs) {
    const auto [s, n] = backend.masked_nll(in);
    nll += s;
    count += n;
  }
  if (count == 0)
    fail(ErrorCode::kValidation, "no masked tokens to evaluate");
  return std::exp(nll / static_cast<double>(count));
}

TrainResult train(const ToyLM& initial,
                  std::span<const prompting::AssembledInput> train_inputs,
                  std::span<const prompting::AssembledInput> valid_inputs,
                  const TrainConfig& cfg) {
  if (cfg.batch_size == 0) fail(ErrorCode::kConfig, "batch_size must be > 0");
  if (train_inputs.empty())
    fail(ErrorCode::kValidation, "no training inputs");
  if (cfg.epochs > 0 && valid_inputs.empty())
    fail(ErrorCode::kValidation, "no validation inputs for selection");

  TrainResult result;
  result.model = initial;
  if (cfg.epochs == 0) {
    result.valid_ppl = valid_inputs.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : validation_perplexity(initial, valid_inputs);
    result.best_epoch = 0;
    return result;
  }

  ToyLM model = initial;
  AdamWConfig hp;
  hp.lr = cfg.learning_rate;
  hp.weight_decay = cfg.weight_decay;
  AdamW opt(model, hp);

  const std::size_t n = train_inputs.size();
  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;

  Rng rng(cfg.run_seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  double best_ppl = std::numeric_limits<double>::infinity();
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double inv = 1.0 / static_cast<double>(end - start);
      model.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i)
        batch_loss += model.loss_backward(train_inputs[order[i]], inv) * inv;
      if (!std::isfinite(batch_loss))
        fail(ErrorCode::kDivergence,
             "training loss diverged at epoch " + std::to_string(epoch) +
                 " step " + std::to_string(step + 1));
      ++step;
      opt.step(lr_schedule(step, cfg.warmup_steps, total_steps));
      epoch_loss += batch_loss;
      ++batches;
    }

    const double ppl = validation_perplexity(model, valid_inputs);
    result.history.push_back(
        {epoch, epoch_loss / static_cast<double>(batches), ppl});
    if (ppl < best_ppl) {
      best_ppl = ppl;
      result.model = model;
      result.valid_ppl = ppl;
      result.best_epoch = epoch;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kCkptMagic[4] = {'G', 'D', 'G', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

template <class T>
void wr(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <class T>
T rd(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void wr_string(std::ofstream& out, const std::string& s) {
  wr(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string rd_string(std::ifstream& in) {
  const auto len = rd<std::uint32_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint: " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic));
  wr(out, kCkptVersion);
  const auto& cfg = ckpt.model.config();
  wr(out, static_cast<std::uint64_t>(cfg.dim));
  wr(out, static_cast<std::uint64_t>(cfg.n_layers));
  wr(out, static_cast<std::uint64_t>(cfg.n_heads));
  wr(out, static_cast<std::uint64_t>(cfg.mlp_hidden));
  wr(out, static_cast<std::uint64_t>(cfg.max_positions));
  wr(out, static_cast<std::uint8_t>(cfg.tie_embeddings ? 1 : 0));
  wr(out, cfg.init_std);
  wr(out, ckpt.valid_ppl);
  wr(out, static_cast<std::uint64_t>(ckpt.best_epoch));

  const auto& toks = ckpt.model.vocab().tokens();
  wr(out, static_cast<std::uint64_t>(toks.size()));
  for (const auto& t : toks) wr_string(out, t);

  wr(out, static_cast<std::uint64_t>(ckpt.model.tensors().size()));
  for (const auto& t : ckpt.model.tensors()) {
    wr_string(out, t.name);
    wr(out, static_cast<std::uint64_t>(t.rows));
    wr(out, static_cast<std::uint64_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!out) fail(ErrorCode::kIo, "write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(kCkptMagic)) != 0)
    fail(ErrorCode::kIo, "not a checkpoint file: " + path);
  if (rd<std::uint32_t>(in) != kCkptVersion)
    fail(ErrorCode::kIo, "unsupported checkpoint version: " + path);

  ToyLMConfig cfg;
  cfg.dim = static_cast<std::size_t>(rd<std::uint64_t>(in));
  cfg.n_layers = static_cast<std::size_t>(rd<std::uint64_t>(in));
  cfg.n_heads = static_cast<std::size_t>(rd<std::uint64_t>(in));
  cfg.mlp_hidden = static_cast<std::size_t>(rd<std::uint64_t>(in));
  cfg.max_positions = static_cast<std::size_t>(rd<std::uint64_t>(in));
  cfg.tie_embeddings = rd<std::uint8_t>(in) != 0;
  cfg.init_std = rd<double>(in);

  Checkpoint ckpt;
  ckpt.valid_ppl = rd<double>(in);
  ckpt.best_epoch = static_cast<std::size_t>(rd<std::uint64_t>(in));

  const auto n_toks = rd<std::uint64_t>(in);
  std::vector<std::string> toks;
  toks.reserve(n_toks);
  for (std::uint64_t i = 0; i < n_toks; ++i) toks.push_back(rd_string(in));

  ckpt.model = ToyLM::zeros(cfg, text::Vocabulary::from_tokens(std::move(toks)));
  const auto n_tensors = rd<std::uint64_t>(in);
  if (n_tensors != ckpt.model.tensors().size())
    fail(ErrorCode::kIo, "checkpoint tensor count mismatch: " + path);
  for (auto& t : ckpt.model.tensors()) {
    const std::string name = rd_string(in);
    const auto rows = rd<std::uint64_t>(in);
    const auto cols = rd<std::uint64_t>(in);
    if (name != t.name || rows != t.rows || cols != t.cols)
      fail(ErrorCode::kIo, "checkpoint tensor mismatch at " + t.name);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  }
  if (!in) fail(ErrorCode::kIo, "truncated checkpoint: " + path);
  return ckpt;
}

// ---------------------------------------------------------------------------
// gradient checking

GradCheckResult gradcheck(ToyLM& model, const prompting::AssembledInput& input,
                          std::size_t n_probes, double eps,
                          std::uint64_t seed) {
  model.zero_grads();
  model.loss_backward(input, 1.0);

  Rng rng(seed);
  GradCheckResult res;
  auto& tensors = model.tensors();

  // flat index over all parameters
  std::size_t total = 0;
  for (const auto& t : tensors) total += t.size();

  for (std::size_t probe = 0; probe < n_probes; ++probe) {
    std::size_t flat = static_cast<std::size_t>(rng.below(total));
    std::size_t ti = 0;
    while (flat >= tensors[ti].size()) {
      flat -= tensors[ti].size();
      ++ti;
    }
    Tensor& t = tensors[ti];
    const double saved = t.v[flat];
    t.v[flat] = saved + eps;
    const double lp = model.loss(input);
    t.v[flat] = saved - eps;
    const double lm = model.loss(input);
    t.v[flat] = saved;

    const double num = (lp - lm) / (2.0 * eps);
    const double ana = t.g[flat];
    const double abs_err = std::fabs(num - ana);
    const double rel =
        abs_err / std::max(1e-8, std::fabs(num) + std::fabs(ana));
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_tensor = t.name;
    }
    res.max_abs_err = std::max(res.max_abs_err, abs_err);
    ++res.n_checked;
  }
  return res;
}

}  // namespace gdg::model
