// SPDX-License-Identifier: Apache-2.0
//
// Numeric kernels behind the toy language model.
//
// Every kernel exists twice: a plain serial version in kernels::ref, which is
// the ground truth the tests check against, and an OpenMP version in
// kernels::omp. The parallel versions split work so that each output element
// is produced by exactly one thread with the same serial reduction order as
// the reference, so the two produce bit-identical doubles and results do not
// depend on the thread count. The top-level functions dispatch between them.
//
// Matrices are dense row major double buffers; the caller owns all memory.

#pragma once

#include <cstddef>

namespace gdg::kernels {

// Toggle for the parallel path (on by default when compiled with OpenMP).
void set_parallel(bool enabled);
bool parallel_enabled();
bool compiled_with_openmp();
int max_threads();

namespace ref {

// c[m x n] = a[m x k] * b[k x n]
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
// c[m x n] += a[k x m]^T * b[k x n]  (accumulates, used for weight grads)
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n);

// in-place row-wise softmax
void softmax_rows(double* x, std::size_t rows, std::size_t cols);
// out = log softmax per row
void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols);

// y = (x - mean) / sqrt(var + eps) * g + b per row; mean and rstd are saved
// for the backward pass
void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows, std::size_t cols);
void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols);

// exact gelu: 0.5 * x * (1 + erf(x / sqrt(2)))
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n);

// Causal multi-head attention over one sequence. q, k, v are [t x (h * dh)]
// with head slices contiguous; attn is [h x t x t] row-stochastic on the
// causal lower triangle; ctx is [t x (h * dh)].
void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh);

}  // namespace ref

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n);
void softmax_rows(double* x, std::size_t rows, std::size_t cols);
void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols);
void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows, std::size_t cols);
void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n);
void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh);

}  // namespace omp

// Dispatching entry points used by the model.
void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n);
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n);
void softmax_rows(double* x, std::size_t rows, std::size_t cols);
void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols);
void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows, std::size_t cols);
void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols);
void gelu(const double* x, double* y, std::size_t n);
void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n);
void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh);
void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh);

}  // namespace gdg::kernels
