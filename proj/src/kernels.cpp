// SPDX-License-Identifier: Apache-2.0
//
// The omp:: variants reuse the per-row helpers of the serial reference, so
// both paths run the same arithmetic in the same order; the pragmas only
// distribute whole output rows across threads.

#include "gdg/kernels.hpp"

#include <atomic>
#include <cmath>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gdg::kernels {

namespace {

std::atomic<bool> g_parallel{
#ifdef _OPENMP
    true
#else
    false
#endif
};

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline void softmax_row(double* x, std::size_t n) {
  double mx = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > mx) mx = x[i];
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = std::exp(x[i] - mx);
    sum += x[i];
  }
  for (std::size_t i = 0; i < n; ++i) x[i] /= sum;
}

inline void log_softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t i = 1; i < n; ++i)
    if (in[i] > mx) mx = in[i];
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::exp(in[i] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t i = 0; i < n; ++i) out[i] = in[i] - lse;
}

inline void layernorm_row(const double* x, const double* g, const double* b,
                          double* y, double* mean, double* rstd,
                          std::size_t n) {
  double m = 0.0;
  for (std::size_t j = 0; j < n; ++j) m += x[j];
  m /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double d = x[j] - m;
    var += d * d;
  }
  var /= static_cast<double>(n);
  const double r = 1.0 / std::sqrt(var + kLnEps);
  for (std::size_t j = 0; j < n; ++j) y[j] = (x[j] - m) * r * g[j] + b[j];
  *mean = m;
  *rstd = r;
}

inline void layernorm_backward_dx_row(const double* x, const double* g,
                                      double mean, double rstd,
                                      const double* dy, double* dx,
                                      std::size_t n) {
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double xhat = (x[j] - mean) * rstd;
    const double dxhat = dy[j] * g[j];
    m1 += dxhat;
    m2 += dxhat * xhat;
  }
  m1 /= static_cast<double>(n);
  m2 /= static_cast<double>(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double xhat = (x[j] - mean) * rstd;
    dx[j] = (dy[j] * g[j] - m1 - xhat * m2) * rstd;
  }
}

inline double gelu_one(double x) {
  return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

inline double gelu_grad_one(double x) {
  return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

// one (head, query-row) pair of the attention forward
inline void attention_row(const double* q, const double* k, const double* v,
                          double* attn_row, double* ctx_row, std::size_t t,
                          std::size_t row, std::size_t head, std::size_t h,
                          std::size_t dh) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t stride = h * dh;
  const double* qr = q + row * stride + head * dh;
  for (std::size_t s = 0; s <= row; ++s)
    attn_row[s] = dot(qr, k + s * stride + head * dh, dh) * scale;
  for (std::size_t s = row + 1; s < t; ++s) attn_row[s] = 0.0;
  softmax_row(attn_row, row + 1);
  for (std::size_t d = 0; d < dh; ++d) {
    double acc = 0.0;
    for (std::size_t s = 0; s <= row; ++s)
      acc += attn_row[s] * v[s * stride + head * dh + d];
    ctx_row[head * dh + d] = acc;
  }
}

}  // namespace

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

bool compiled_with_openmp() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// ---------------------------------------------------------------------------
// serial reference

namespace ref {

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c[i * n + j] = dot(a + i * k, b + j * k, k);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[t * m + i] * b[t * n + j];
      c[i * n + j] += s;
    }
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x + r * cols, cols);
}

void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    log_softmax_row(in + r * cols, out + r * cols, cols);
}

void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    layernorm_row(x + r * cols, g, b, y + r * cols, mean + r, rstd + r, cols);
}

void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    layernorm_backward_dx_row(x + r * cols, g, mean[r], rstd[r], dy + r * cols,
                              dx + r * cols, cols);
  for (std::size_t j = 0; j < cols; ++j) {
    double sg = 0.0, sb = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double xhat = (x[r * cols + j] - mean[r]) * rstd[r];
      sg += dy[r * cols + j] * xhat;
      sb += dy[r * cols + j];
    }
    dg[j] += sg;
    db[j] += sb;
  }
}

void gelu(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_one(x[i]);
}

void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh) {
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t row = 0; row < t; ++row)
      attention_row(q, k, v, attn + (head * t + row) * t, ctx + row * h * dh,
                    t, row, head, h, dh);
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t stride = h * dh;
  std::vector<double> dscores(t * t);

  for (std::size_t head = 0; head < h; ++head) {
    const std::size_t off = head * dh;
    // dattn then softmax backward, row by row
    for (std::size_t row = 0; row < t; ++row) {
      double inner = 0.0;
      for (std::size_t s = 0; s <= row; ++s) {
        const double da =
            dot(dctx + row * stride + off, v + s * stride + off, dh);
        dscores[row * t + s] = da;
        inner += attn[(head * t + row) * t + s] * da;
      }
      for (std::size_t s = 0; s <= row; ++s)
        dscores[row * t + s] =
            attn[(head * t + row) * t + s] * (dscores[row * t + s] - inner);
    }
    // dq[row] = sum_s dscores[row][s] * k[s] * scale
    for (std::size_t row = 0; row < t; ++row)
      for (std::size_t d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (std::size_t s = 0; s <= row; ++s)
          acc += dscores[row * t + s] * k[s * stride + off + d];
        dq[row * stride + off + d] = acc * scale;
      }
    // dk[s] = sum_{row >= s} dscores[row][s] * q[row] * scale
    // dv[s] = sum_{row >= s} attn[row][s] * dctx[row]
    for (std::size_t s = 0; s < t; ++s)
      for (std::size_t d = 0; d < dh; ++d) {
        double ak = 0.0, av = 0.0;
        for (std::size_t row = s; row < t; ++row) {
          ak += dscores[row * t + s] * q[row * stride + off + d];
          av += attn[(head * t + row) * t + s] * dctx[row * stride + off + d];
        }
        dk[s * stride + off + d] = ak * scale;
        dv[s * stride + off + d] = av;
      }
  }
}

}  // namespace ref

// ---------------------------------------------------------------------------
// OpenMP variants: same element arithmetic, rows distributed across threads

namespace omp {

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t l = 0; l < k; ++l) s += a[i * k + l] * b[l * n + j];
      c[i * n + j] = s;
    }
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      c[i * n + j] = dot(a + i * k, b + j * k, k);
}

void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[t * m + i] * b[t * n + j];
      c[i * n + j] += s;
    }
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x + r * cols, cols);
}

void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t r = 0; r < rows; ++r)
    log_softmax_row(in + r * cols, out + r * cols, cols);
}

void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows,
               std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t r = 0; r < rows; ++r)
    layernorm_row(x + r * cols, g, b, y + r * cols, mean + r, rstd + r, cols);
}

void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t r = 0; r < rows; ++r)
    layernorm_backward_dx_row(x + r * cols, g, mean[r], rstd[r], dy + r * cols,
                              dx + r * cols, cols);
  // dg/db reduce over rows; parallelize over columns so each output element
  // keeps the serial accumulation order
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t j = 0; j < cols; ++j) {
    double sg = 0.0, sb = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double xhat = (x[r * cols + j] - mean[r]) * rstd[r];
      sg += dy[r * cols + j] * xhat;
      sb += dy[r * cols + j];
    }
    dg[j] += sg;
    db[j] += sb;
  }
}

void gelu(const double* x, double* y, std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < n; ++i) y[i] = gelu_one(x[i]);
}

void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * gelu_grad_one(x[i]);
}

void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh) {
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t row = 0; row < t; ++row)
      attention_row(q, k, v, attn + (head * t + row) * t, ctx + row * h * dh,
                    t, row, head, h, dh);
}

void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t stride = h * dh;
  std::vector<double> dscores(h * t * t);

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t row = 0; row < t; ++row) {
      const std::size_t off = head * dh;
      double* ds = dscores.data() + (head * t + row) * t;
      double inner = 0.0;
      for (std::size_t s = 0; s <= row; ++s) {
        const double da =
            dot(dctx + row * stride + off, v + s * stride + off, dh);
        ds[s] = da;
        inner += attn[(head * t + row) * t + s] * da;
      }
      for (std::size_t s = 0; s <= row; ++s)
        ds[s] = attn[(head * t + row) * t + s] * (ds[s] - inner);
    }

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t row = 0; row < t; ++row) {
      const std::size_t off = head * dh;
      for (std::size_t d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (std::size_t s = 0; s <= row; ++s)
          acc += dscores[(head * t + row) * t + s] * k[s * stride + off + d];
        dq[row * stride + off + d] = acc * scale;
      }
    }

#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(static)
#endif
  for (std::size_t head = 0; head < h; ++head)
    for (std::size_t s = 0; s < t; ++s) {
      const std::size_t off = head * dh;
      for (std::size_t d = 0; d < dh; ++d) {
        double ak = 0.0, av = 0.0;
        for (std::size_t row = s; row < t; ++row) {
          ak += dscores[(head * t + row) * t + s] * q[row * stride + off + d];
          av += attn[(head * t + row) * t + s] * dctx[row * stride + off + d];
        }
        dk[s * stride + off + d] = ak * scale;
        dv[s * stride + off + d] = av;
      }
    }
}

}  // namespace omp

// ---------------------------------------------------------------------------
// dispatch

#define GDG_DISPATCH(fn, ...)            \
  do {                                   \
    if (parallel_enabled())              \
      omp::fn(__VA_ARGS__);              \
    else                                 \
      ref::fn(__VA_ARGS__);              \
  } while (0)

void matmul(const double* a, const double* b, double* c, std::size_t m,
            std::size_t k, std::size_t n) {
  GDG_DISPATCH(matmul, a, b, c, m, k, n);
}
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  GDG_DISPATCH(matmul_nt, a, b, c, m, k, n);
}
void matmul_tn_acc(const double* a, const double* b, double* c, std::size_t k,
                   std::size_t m, std::size_t n) {
  GDG_DISPATCH(matmul_tn_acc, a, b, c, k, m, n);
}
void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  GDG_DISPATCH(softmax_rows, x, rows, cols);
}
void log_softmax_rows(const double* in, double* out, std::size_t rows,
                      std::size_t cols) {
  GDG_DISPATCH(log_softmax_rows, in, out, rows, cols);
}
void layernorm(const double* x, const double* g, const double* b, double* y,
               double* mean, double* rstd, std::size_t rows,
               std::size_t cols) {
  GDG_DISPATCH(layernorm, x, g, b, y, mean, rstd, rows, cols);
}
void layernorm_backward(const double* x, const double* g, const double* mean,
                        const double* rstd, const double* dy, double* dx,
                        double* dg, double* db, std::size_t rows,
                        std::size_t cols) {
  GDG_DISPATCH(layernorm_backward, x, g, mean, rstd, dy, dx, dg, db, rows,
               cols);
}
void gelu(const double* x, double* y, std::size_t n) {
  GDG_DISPATCH(gelu, x, y, n);
}
void gelu_backward(const double* x, const double* dy, double* dx,
                   std::size_t n) {
  GDG_DISPATCH(gelu_backward, x, dy, dx, n);
}
void attention(const double* q, const double* k, const double* v, double* attn,
               double* ctx, std::size_t t, std::size_t h, std::size_t dh) {
  GDG_DISPATCH(attention, q, k, v, attn, ctx, t, h, dh);
}
void attention_backward(const double* q, const double* k, const double* v,
                        const double* attn, const double* dctx, double* dq,
                        double* dk, double* dv, std::size_t t, std::size_t h,
                        std::size_t dh) {
  GDG_DISPATCH(attention_backward, q, k, v, attn, dctx, dq, dk, dv, t, h, dh);
}

#undef GDG_DISPATCH

}  // namespace gdg::kernels
