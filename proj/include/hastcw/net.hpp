#pragma once

#include <map>
#include <string>
#include <vector>

#include "hastcw/matrix.hpp"
#include "hastcw/rng.hpp"
#include "hastcw/tensor.hpp"

namespace hastcw {

// Backbone: three conv blocks (3x3, stride 1, pad 1, ReLU, 2x2 max pool)
// with channel widths 16 -> 32 -> latent_dim. Head: linear over the
// flattened whitened maps. image_size must be divisible by 8.
class NetworkParams {
public:
  static NetworkParams create(size_t in_channels, size_t image_size, size_t latent_dim, size_t num_classes,
                              SeededRng& rng);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::vector<std::pair<std::string, Tensor>> entries;  // fixed order

  size_t in_channels = 0;
  size_t image_size = 0;
  size_t latent_dim = 0;
  size_t num_classes = 0;
  size_t map_size = 0;  // spatial side of the backbone output (image_size / 8)
};

enum class OpKind { conv3x3, relu, maxpool2, whiten_affine, reduce_act, flatten, linear };

struct TapeNode {
  OpKind kind;
  int input = -1;
  int output = -1;
  std::string weight_name;
  std::string bias_name;
  Matrix affine;            // whiten_affine map (treated as constant)
  std::vector<double> mu;   // whiten_affine offset (constant)
  size_t pool_window = 0;   // reduce_act
  std::vector<size_t> argmax;  // maxpool2 / reduce_act routing
};

// Recorded forward pass; one backward() consumes it.
struct TapeCache {
  std::vector<Tensor> values;
  std::vector<TapeNode> nodes;
  bool consumed = false;

  int features_slot = -1;
  int whitened_slot = -1;
  int reduced_slot = -1;
  int logits_slot = -1;

  int push_value(Tensor t);
  const Tensor& value(int slot) const { return values[static_cast<size_t>(slot)]; }
};

// images: (n, in_channels, image_size, image_size). Returns the backbone
// feature maps (n, latent_dim, map, map) and records the pass in cache.
Tensor backbone_forward(const NetworkParams& params, const Tensor& images, TapeCache& cache);

// Records y = M (z - mu) per spatial location on top of the backbone
// features. M and mu are constants on the tape (no gradient flows to them).
Tensor apply_whitening(TapeCache& cache, const Matrix& m, const std::vector<double>& mu);

// Records max-pool-then-mean reduction of the whitened maps; returns (n, d).
Matrix tape_reduce(TapeCache& cache, size_t pool_window);

// Flatten + linear head over the whitened maps. `whitened` must be the batch
// produced by apply_whitening on this cache (or, for a fresh cache, any
// feature batch to run the head standalone).
Tensor head_forward(const NetworkParams& params, const Tensor& whitened, TapeCache& cache);

struct CrossEntropyResult {
  double loss = 0.0;
  Tensor grad_logits;  // (softmax - onehot) / batch
};

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels);

using ParamGrads = std::map<std::string, Tensor>;

// Reverse pass. grad_reduced (n, d) seeds the reduced-activation output when
// a loss term is attached there. Throws UsageError on a consumed cache.
ParamGrads backward(TapeCache& cache, const NetworkParams& params, const Tensor& grad_logits,
                    const Matrix* grad_reduced = nullptr);

struct AdamState {
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
  int64_t step = 0;

  static AdamState create(const NetworkParams& params);
};

// Bias-corrected Adam with decoupled weight decay.
void adam_step(NetworkParams& params, const ParamGrads& grads, AdamState& state, double lr, double beta1,
               double beta2, double weight_decay);

struct EvalOutput {
  Tensor logits;   // (n, classes)
  Matrix reduced;  // (n, d)
};

// Tape-free convenience forward with fixed whitening map M = Q^T W.
EvalOutput eval_forward(const NetworkParams& params, const Tensor& images, const Matrix& m,
                        const std::vector<double>& mu, size_t pool_window);

}  // namespace hastcw
