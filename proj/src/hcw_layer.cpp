#include "hastcw/hcw_layer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hastcw/errors.hpp"
#include "hastcw/linalg.hpp"

namespace hastcw {

namespace {

void check_feature_batch(const FeatureBatch& z) {
  if (z.shape.size() != 4) throw ValidationError("feature batch must be (n, d, h, w)");
  if (shape_product(z.shape) == 0) throw ValidationError("feature batch is empty");
}

}  // namespace

WhiteningState WhiteningState::initial(size_t d, double decay, double eps) {
  WhiteningState s;
  s.mu.assign(d, 0.0);
  s.w = Matrix::identity(d);
  s.decay = decay;
  s.eps = eps;
  return s;
}

void RotationMatrix::set(const Matrix& q) {
  if (q.rows() != q.cols()) throw ValidationError("rotation matrix must be square");
  if (orthogonality_residual(q) > 1e-8) throw NumericError("rotation matrix lost orthogonality");
  q_ = q;
}

BatchStats batch_statistics(const FeatureBatch& z, double eps) {
  check_feature_batch(z);
  size_t n = z.dim(0), d = z.dim(1), h = z.dim(2), w = z.dim(3);
  size_t m = n * h * w;
  if (m < 2) throw ValidationError("batch_statistics: need at least 2 spatial samples");

  BatchStats out;
  out.mu.assign(d, 0.0);
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) acc += z.at4(i, c, y, x);
      out.mu[c] += acc;
    }
  for (size_t c = 0; c < d; ++c) out.mu[c] /= static_cast<double>(m);

  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (size_t i = 0; i < n; ++i)
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x) {
        for (size_t c = 0; c < d; ++c) centered[c] = z.at4(i, c, y, x) - out.mu[c];
        for (size_t a = 0; a < d; ++a) {
          double ca = centered[a];
          for (size_t b = a; b < d; ++b) cov(a, b) += ca * centered[b];
        }
      }
  double inv_m = 1.0 / static_cast<double>(m);
  for (size_t a = 0; a < d; ++a)
    for (size_t b = a; b < d; ++b) {
      cov(a, b) *= inv_m;
      cov(b, a) = cov(a, b);
    }

  out.w = psd_inverse_sqrt(cov, eps);
  return out;
}

FeatureBatch whiten_transform(const FeatureBatch& z, const std::vector<double>& mu, const Matrix& w,
                              const Matrix& q) {
  check_feature_batch(z);
  size_t n = z.dim(0), d = z.dim(1), h = z.dim(2), x_dim = z.dim(3);
  if (mu.size() != d || w.rows() != d || q.rows() != d)
    throw ValidationError("whiten_transform: dimension mismatch");

  Matrix m = multiply(transpose(q), w);  // effective map
  FeatureBatch out(z.shape);
  std::vector<double> centered(d);
  for (size_t i = 0; i < n; ++i)
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < x_dim; ++x) {
        for (size_t c = 0; c < d; ++c) centered[c] = z.at4(i, c, y, x) - mu[c];
        for (size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          for (size_t c = 0; c < d; ++c) acc += m(r, c) * centered[c];
          out.at4(i, r, y, x) = acc;
        }
      }
  return out;
}

FeatureBatch hcw_forward(const FeatureBatch& z, const WhiteningState& state, const RotationMatrix& q,
                         HcwMode mode) {
  if (mode == HcwMode::train) {
    BatchStats stats = batch_statistics(z, state.eps);
    return whiten_transform(z, stats.mu, stats.w, q.q());
  }
  return whiten_transform(z, state.mu, state.w, q.q());
}

WhiteningState ema_update(const WhiteningState& state, const BatchStats& batch) {
  if (batch.mu.size() != state.mu.size() || !batch.w.same_shape(state.w))
    throw ValidationError("ema_update: shape mismatch");
  WhiteningState out = state;
  double a = state.decay, b = 1.0 - state.decay;
  for (size_t i = 0; i < out.mu.size(); ++i) out.mu[i] = a * state.mu[i] + b * batch.mu[i];
  for (size_t i = 0; i < out.w.data().size(); ++i)
    out.w.data()[i] = a * state.w.data()[i] + b * batch.w.data()[i];
  return out;
}

Matrix reduce_activation(const FeatureBatch& features, size_t pool_window) {
  check_feature_batch(features);
  size_t n = features.dim(0), d = features.dim(1), h = features.dim(2), w = features.dim(3);
  if (pool_window == 0) throw ValidationError("reduce_activation: pool window must be positive");
  if (pool_window > h || pool_window > w)
    throw ValidationError("reduce_activation: pool window larger than feature map");

  size_t wy = (h + pool_window - 1) / pool_window;
  size_t wx = (w + pool_window - 1) / pool_window;
  double inv_windows = 1.0 / static_cast<double>(wy * wx);

  Matrix out(n, d);
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < d; ++c) {
      double sum = 0.0;
      for (size_t by = 0; by < wy; ++by)
        for (size_t bx = 0; bx < wx; ++bx) {
          double best = -std::numeric_limits<double>::infinity();
          size_t y_end = std::min(h, (by + 1) * pool_window);
          size_t x_end = std::min(w, (bx + 1) * pool_window);
          for (size_t y = by * pool_window; y < y_end; ++y)
            for (size_t x = bx * pool_window; x < x_end; ++x)
              best = std::max(best, features.at4(i, c, y, x));
          sum += best;
        }
      out(i, c) = sum * inv_windows;
    }
  return out;
}

Matrix spatial_mean(const FeatureBatch& features) {
  check_feature_batch(features);
  size_t n = features.dim(0), d = features.dim(1), h = features.dim(2), w = features.dim(3);
  double inv = 1.0 / static_cast<double>(h * w);
  Matrix out(n, d);
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < w; ++x) acc += features.at4(i, c, y, x);
      out(i, c) = acc * inv;
    }
  return out;
}

}  // namespace hastcw
