#pragma once

// Dense kernels shared by the network implementations. Weights are stored
// [in][out] so the forward pass is a sequence of contiguous axpy updates.

#include <cmath>
#include <cstddef>

namespace privdistill::policy::kernels {

inline void axpy(double a, const double* __restrict x, double* __restrict y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += a * x[i];
  }
}

inline double dot(const double* __restrict a, const double* __restrict b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) {
    s0 += a[i] * b[i];
  }
  return (s0 + s1) + (s2 + s3);
}

// Y[rows x out] = X[rows x in] * W[in x out] + b
inline void linear_forward(const double* X, std::size_t rows, std::size_t in, const double* W,
                           const double* b, std::size_t out, double* Y) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* y = Y + r * out;
    const double* x = X + r * in;
    for (std::size_t o = 0; o < out; ++o) {
      y[o] = b[o];
    }
    for (std::size_t i = 0; i < in; ++i) {
      if (x[i] != 0.0) {
        axpy(x[i], W + i * out, y, out);
      }
    }
  }
}

// Accumulates dW, db and (when dX is non-null) dX for Y = X W + b.
inline void linear_backward(const double* X, std::size_t rows, std::size_t in, const double* W,
                            std::size_t out, const double* dY, double* dX, double* dW, double* db) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* dy = dY + r * out;
    const double* x = X + r * in;
    axpy(1.0, dy, db, out);
    for (std::size_t i = 0; i < in; ++i) {
      if (x[i] != 0.0) {
        axpy(x[i], dy, dW + i * out, out);
      }
      if (dX != nullptr) {
        dX[r * in + i] += dot(W + i * out, dy, out);
      }
    }
  }
}

inline constexpr double kRmsEps = 1e-5;

// y = g * x / sqrt(mean(x^2) + eps); returns the inverse rms.
inline double rmsnorm_forward(const double* x, const double* g, std::size_t d, double* y) {
  const double ms = dot(x, x, d) / static_cast<double>(d);
  const double inv = 1.0 / std::sqrt(ms + kRmsEps);
  for (std::size_t i = 0; i < d; ++i) {
    y[i] = g[i] * x[i] * inv;
  }
  return inv;
}

inline void rmsnorm_backward(const double* x, const double* g, double inv, std::size_t d,
                             const double* dy, double* dx, double* dg) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dg[i] += dy[i] * x[i] * inv;
    s += g[i] * dy[i] * x[i];
  }
  const double coef = inv * inv * inv * s / static_cast<double>(d);
  for (std::size_t i = 0; i < d; ++i) {
    dx[i] += inv * g[i] * dy[i] - coef * x[i];
  }
}

inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

inline double gelu(double u) {
  const double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
  return 0.5 * u * (1.0 + t);
}

inline double gelu_grad(double u) {
  const double t = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
  return 0.5 * (1.0 + t) + 0.5 * u * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

}  // namespace privdistill::policy::kernels
