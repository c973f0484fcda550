#pragma once

#include <vector>

#include "hastcw/matrix.hpp"
#include "hastcw/tensor.hpp"

namespace hastcw {

// A feature batch is a (n, d, h, w) tensor; its reduced form is (n, d).
using FeatureBatch = Tensor;

struct WhiteningState {
  std::vector<double> mu;  // length d
  Matrix w;                // d x d, symmetric
  double decay = 0.9;      // EMA coefficient
  double eps = 1e-5;       // covariance regularizer

  static WhiteningState initial(size_t d, double decay, double eps);
};

// Orthogonal rotation whose columns are concept axes. Assignment checks
// the orthogonality residual and rejects drifted matrices.
class RotationMatrix {
public:
  explicit RotationMatrix(size_t d) : q_(Matrix::identity(d)) {}
  explicit RotationMatrix(const Matrix& q) { set(q); }

  const Matrix& q() const { return q_; }
  size_t dim() const { return q_.rows(); }
  void set(const Matrix& q);  // throws NumericError if ||Q^T Q - I||_max > 1e-8

private:
  Matrix q_;
};

struct BatchStats {
  std::vector<double> mu;
  Matrix w;
};

enum class HcwMode { train, eval };

// Sample mean and ZCA whitening matrix over the n*h*w spatial samples of a
// (n, d, h, w) batch. Covariance uses the population divisor.
BatchStats batch_statistics(const FeatureBatch& z, double eps);

// y = Q^T W (z - mu) applied per spatial location.
FeatureBatch whiten_transform(const FeatureBatch& z, const std::vector<double>& mu, const Matrix& w,
                              const Matrix& q);

// Train mode computes batch statistics; eval mode uses the EMA state.
FeatureBatch hcw_forward(const FeatureBatch& z, const WhiteningState& state, const RotationMatrix& q,
                         HcwMode mode);

// new = decay * old + (1 - decay) * batch, elementwise.
WhiteningState ema_update(const WhiteningState& state, const BatchStats& batch);

// Per channel: max pool (window = stride) then mean of the pooled map.
// Trailing partial windows are included. Returns an (n, d) matrix.
Matrix reduce_activation(const FeatureBatch& features, size_t pool_window);

// Plain spatial mean per channel, used for concept axis scoring. (n, d).
Matrix spatial_mean(const FeatureBatch& features);

}  // namespace hastcw
