#include "hastcw/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hastcw/errors.hpp"
#include "hastcw/hcw_layer.hpp"

namespace hastcw {

namespace {

constexpr size_t kWidth1 = 16;
constexpr size_t kWidth2 = 32;

Tensor he_uniform(std::vector<size_t> shape, size_t fan_in, SeededRng& rng) {
  Tensor t(std::move(shape));
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& x : t.v) x = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

NetworkParams NetworkParams::create(size_t in_channels, size_t image_size, size_t latent_dim,
                                    size_t num_classes, SeededRng& rng) {
  if (image_size == 0 || image_size % 8 != 0)
    throw ValidationError("network: image size must be a positive multiple of 8");
  if (in_channels == 0 || latent_dim == 0 || num_classes == 0)
    throw ValidationError("network: zero-sized dimension");

  NetworkParams p;
  p.in_channels = in_channels;
  p.image_size = image_size;
  p.latent_dim = latent_dim;
  p.num_classes = num_classes;
  p.map_size = image_size / 8;

  p.entries.emplace_back("conv1.weight", he_uniform({kWidth1, in_channels, 3, 3}, in_channels * 9, rng));
  p.entries.emplace_back("conv1.bias", Tensor({kWidth1}));
  p.entries.emplace_back("conv2.weight", he_uniform({kWidth2, kWidth1, 3, 3}, kWidth1 * 9, rng));
  p.entries.emplace_back("conv2.bias", Tensor({kWidth2}));
  p.entries.emplace_back("conv3.weight", he_uniform({latent_dim, kWidth2, 3, 3}, kWidth2 * 9, rng));
  p.entries.emplace_back("conv3.bias", Tensor({latent_dim}));
  size_t flat = latent_dim * p.map_size * p.map_size;
  p.entries.emplace_back("head.weight", he_uniform({num_classes, flat}, flat, rng));
  p.entries.emplace_back("head.bias", Tensor({num_classes}));
  return p;
}

Tensor& NetworkParams::at(const std::string& name) {
  for (auto& [n, t] : entries)
    if (n == name) return t;
  throw ValidationError("unknown parameter '" + name + "'");
}

const Tensor& NetworkParams::at(const std::string& name) const {
  for (const auto& [n, t] : entries)
    if (n == name) return t;
  throw ValidationError("unknown parameter '" + name + "'");
}

int TapeCache::push_value(Tensor t) {
  values.push_back(std::move(t));
  return static_cast<int>(values.size()) - 1;
}

namespace {

Tensor conv3x3_forward(const Tensor& in, const Tensor& w, const Tensor& b) {
  size_t n = in.dim(0), ic = in.dim(1), h = in.dim(2), wd = in.dim(3);
  size_t oc = w.dim(0);
  Tensor out({n, oc, h, wd});
  for (size_t i = 0; i < n; ++i)
    for (size_t o = 0; o < oc; ++o) {
      double bias = b.v[o];
      for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < wd; ++x) {
          double acc = bias;
          for (size_t c = 0; c < ic; ++c)
            for (size_t ky = 0; ky < 3; ++ky) {
              size_t iy = y + ky;
              if (iy < 1 || iy > h) continue;  // pad 1
              iy -= 1;
              for (size_t kx = 0; kx < 3; ++kx) {
                size_t ix = x + kx;
                if (ix < 1 || ix > wd) continue;
                acc += in.at4(i, c, iy, ix - 1) * w.at4(o, c, ky, kx);
              }
            }
          out.at4(i, o, y, x) = acc;
        }
    }
  return out;
}

void conv3x3_backward(const Tensor& in, const Tensor& w, const Tensor& go, Tensor& gi, Tensor& gw,
                      Tensor& gb) {
  size_t n = in.dim(0), ic = in.dim(1), h = in.dim(2), wd = in.dim(3);
  size_t oc = w.dim(0);
  for (size_t i = 0; i < n; ++i)
    for (size_t o = 0; o < oc; ++o)
      for (size_t y = 0; y < h; ++y)
        for (size_t x = 0; x < wd; ++x) {
          double g = go.at4(i, o, y, x);
          if (g == 0.0) continue;
          gb.v[o] += g;
          for (size_t c = 0; c < ic; ++c)
            for (size_t ky = 0; ky < 3; ++ky) {
              size_t iy = y + ky;
              if (iy < 1 || iy > h) continue;
              iy -= 1;
              for (size_t kx = 0; kx < 3; ++kx) {
                size_t ix = x + kx;
                if (ix < 1 || ix > wd) continue;
                gw.at4(o, c, ky, kx) += g * in.at4(i, c, iy, ix - 1);
                gi.at4(i, c, iy, ix - 1) += g * w.at4(o, c, ky, kx);
              }
            }
        }
}

Tensor relu_forward(const Tensor& in) {
  Tensor out = in;
  for (double& x : out.v) x = std::max(0.0, x);
  return out;
}

Tensor maxpool2_forward(const Tensor& in, std::vector<size_t>& argmax) {
  size_t n = in.dim(0), c = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (h % 2 != 0 || w % 2 != 0) throw ValidationError("maxpool2: odd spatial size");
  Tensor out({n, c, h / 2, w / 2});
  argmax.assign(out.size(), 0);
  size_t idx = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t ch = 0; ch < c; ++ch)
      for (size_t y = 0; y < h; y += 2)
        for (size_t x = 0; x < w; x += 2) {
          double best = -std::numeric_limits<double>::infinity();
          size_t best_at = 0;
          for (size_t dy = 0; dy < 2; ++dy)
            for (size_t dx = 0; dx < 2; ++dx) {
              size_t flat = ((i * c + ch) * h + y + dy) * w + x + dx;
              if (in.v[flat] > best) {
                best = in.v[flat];
                best_at = flat;
              }
            }
          out.v[idx] = best;
          argmax[idx] = best_at;
          ++idx;
        }
  return out;
}

Tensor reduce_forward(const Tensor& in, size_t window, std::vector<size_t>& argmax) {
  size_t n = in.dim(0), d = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (window == 0 || window > h || window > w)
    throw ValidationError("reduce: pool window larger than feature map");
  size_t wy = (h + window - 1) / window;
  size_t wx = (w + window - 1) / window;
  double inv_windows = 1.0 / static_cast<double>(wy * wx);
  Tensor out({n, d});
  argmax.assign(n * d * wy * wx, 0);
  size_t slot = 0;
  for (size_t i = 0; i < n; ++i)
    for (size_t c = 0; c < d; ++c) {
      double sum = 0.0;
      for (size_t by = 0; by < wy; ++by)
        for (size_t bx = 0; bx < wx; ++bx) {
          double best = -std::numeric_limits<double>::infinity();
          size_t best_at = 0;
          size_t y_end = std::min(h, (by + 1) * window);
          size_t x_end = std::min(w, (bx + 1) * window);
          for (size_t y = by * window; y < y_end; ++y)
            for (size_t x = bx * window; x < x_end; ++x) {
              size_t flat = ((i * d + c) * h + y) * w + x;
              if (in.v[flat] > best) {
                best = in.v[flat];
                best_at = flat;
              }
            }
          sum += best;
          argmax[slot++] = best_at;
        }
      out.at2(i, c) = sum * inv_windows;
    }
  return out;
}

Tensor linear_forward(const Tensor& in, const Tensor& w, const Tensor& b) {
  size_t n = in.dim(0), f = in.dim(1), k = w.dim(0);
  Tensor out({n, k});
  for (size_t i = 0; i < n; ++i)
    for (size_t o = 0; o < k; ++o) {
      double acc = b.v[o];
      const double* wrow = &w.v[o * f];
      const double* irow = &in.v[i * f];
      for (size_t j = 0; j < f; ++j) acc += wrow[j] * irow[j];
      out.at2(i, o) = acc;
    }
  return out;
}

}  // namespace

Tensor backbone_forward(const NetworkParams& params, const Tensor& images, TapeCache& cache) {
  if (images.shape.size() != 4 || images.dim(1) != params.in_channels ||
      images.dim(2) != params.image_size || images.dim(3) != params.image_size)
    throw ValidationError("backbone_forward: image batch shape mismatch");

  int slot = cache.push_value(images);
  const char* convs[3][2] = {{"conv1.weight", "conv1.bias"},
                             {"conv2.weight", "conv2.bias"},
                             {"conv3.weight", "conv3.bias"}};
  for (auto& [wname, bname] : convs) {
    TapeNode conv;
    conv.kind = OpKind::conv3x3;
    conv.weight_name = wname;
    conv.bias_name = bname;
    conv.input = slot;
    conv.output = cache.push_value(conv3x3_forward(cache.value(slot), params.at(wname), params.at(bname)));
    slot = conv.output;
    cache.nodes.push_back(std::move(conv));

    TapeNode act;
    act.kind = OpKind::relu;
    act.input = slot;
    act.output = cache.push_value(relu_forward(cache.value(slot)));
    slot = act.output;
    cache.nodes.push_back(std::move(act));

    TapeNode pool;
    pool.kind = OpKind::maxpool2;
    pool.input = slot;
    pool.output = cache.push_value(maxpool2_forward(cache.value(slot), pool.argmax));
    slot = pool.output;
    cache.nodes.push_back(std::move(pool));
  }
  cache.features_slot = slot;
  return cache.value(slot);
}

Tensor apply_whitening(TapeCache& cache, const Matrix& m, const std::vector<double>& mu) {
  if (cache.features_slot < 0) throw UsageError("apply_whitening: run backbone_forward first");
  const Tensor& in = cache.value(cache.features_slot);
  size_t n = in.dim(0), d = in.dim(1), h = in.dim(2), w = in.dim(3);
  if (m.rows() != d || m.cols() != d || mu.size() != d)
    throw ValidationError("apply_whitening: map dimension mismatch");

  Tensor out({n, d, h, w});
  std::vector<double> centered(d);
  for (size_t i = 0; i < n; ++i)
    for (size_t y = 0; y < h; ++y)
      for (size_t x = 0; x < w; ++x) {
        for (size_t c = 0; c < d; ++c) centered[c] = in.at4(i, c, y, x) - mu[c];
        for (size_t r = 0; r < d; ++r) {
          double acc = 0.0;
          for (size_t c = 0; c < d; ++c) acc += m(r, c) * centered[c];
          out.at4(i, r, y, x) = acc;
        }
      }

  TapeNode node;
  node.kind = OpKind::whiten_affine;
  node.affine = m;
  node.mu = mu;
  node.input = cache.features_slot;
  node.output = cache.push_value(std::move(out));
  cache.whitened_slot = node.output;
  cache.nodes.push_back(std::move(node));
  return cache.value(cache.whitened_slot);
}

Matrix tape_reduce(TapeCache& cache, size_t pool_window) {
  if (cache.whitened_slot < 0) throw UsageError("tape_reduce: run apply_whitening first");
  TapeNode node;
  node.kind = OpKind::reduce_act;
  node.pool_window = pool_window;
  node.input = cache.whitened_slot;
  node.output = cache.push_value(reduce_forward(cache.value(cache.whitened_slot), pool_window, node.argmax));
  cache.reduced_slot = node.output;
  cache.nodes.push_back(std::move(node));

  const Tensor& red = cache.value(cache.reduced_slot);
  Matrix out(red.dim(0), red.dim(1));
  out.data() = red.v;
  return out;
}

Tensor head_forward(const NetworkParams& params, const Tensor& whitened, TapeCache& cache) {
  int in_slot = cache.whitened_slot;
  if (in_slot < 0) in_slot = cache.whitened_slot = cache.push_value(whitened);
  const Tensor& in = cache.value(in_slot);
  if (in.shape.size() != 4 || in.dim(1) != params.latent_dim || in.dim(2) != params.map_size ||
      in.dim(3) != params.map_size)
    throw ValidationError("head_forward: whitened batch shape mismatch");

  size_t n = in.dim(0);
  size_t flat = params.latent_dim * params.map_size * params.map_size;
  Tensor flat_t({n, flat});
  flat_t.v = in.v;

  TapeNode fl;
  fl.kind = OpKind::flatten;
  fl.input = in_slot;
  fl.output = cache.push_value(std::move(flat_t));
  int flat_slot = fl.output;
  cache.nodes.push_back(std::move(fl));

  TapeNode lin;
  lin.kind = OpKind::linear;
  lin.weight_name = "head.weight";
  lin.bias_name = "head.bias";
  lin.input = flat_slot;
  lin.output = cache.push_value(
      linear_forward(cache.value(flat_slot), params.at("head.weight"), params.at("head.bias")));
  cache.logits_slot = lin.output;
  cache.nodes.push_back(std::move(lin));
  return cache.value(cache.logits_slot);
}

CrossEntropyResult cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.shape.size() != 2) throw ValidationError("cross_entropy: logits must be (n, classes)");
  size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) throw ValidationError("cross_entropy: one label per sample required");

  CrossEntropyResult res;
  res.grad_logits = Tensor({n, k});
  double inv_n = 1.0 / static_cast<double>(n);
  for (size_t i = 0; i < n; ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<size_t>(y) >= k) throw ValidationError("cross_entropy: label out of range");
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t j = 0; j < k; ++j) mx = std::max(mx, logits.at2(i, j));
    double denom = 0.0;
    for (size_t j = 0; j < k; ++j) denom += std::exp(logits.at2(i, j) - mx);
    double log_denom = std::log(denom);
    res.loss += inv_n * (log_denom - (logits.at2(i, static_cast<size_t>(y)) - mx));
    for (size_t j = 0; j < k; ++j) {
      double p = std::exp(logits.at2(i, j) - mx) / denom;
      res.grad_logits.at2(i, j) = inv_n * (p - (static_cast<size_t>(y) == j ? 1.0 : 0.0));
    }
  }
  return res;
}

ParamGrads backward(TapeCache& cache, const NetworkParams& params, const Tensor& grad_logits,
                    const Matrix* grad_reduced) {
  if (cache.consumed) throw UsageError("backward: tape already consumed");
  cache.consumed = true;

  ParamGrads grads;
  for (const auto& [name, t] : params.entries) grads.emplace(name, Tensor(t.shape));

  std::vector<Tensor> slot_grads(cache.values.size());
  for (size_t i = 0; i < cache.values.size(); ++i) slot_grads[i] = Tensor(cache.values[i].shape);

  if (cache.logits_slot >= 0) {
    if (!same_shape(grad_logits, cache.values[static_cast<size_t>(cache.logits_slot)]))
      throw ValidationError("backward: logits gradient shape mismatch");
    slot_grads[static_cast<size_t>(cache.logits_slot)] = grad_logits;
  }
  if (grad_reduced != nullptr) {
    if (cache.reduced_slot < 0) throw UsageError("backward: no reduced output on this tape");
    Tensor& g = slot_grads[static_cast<size_t>(cache.reduced_slot)];
    if (grad_reduced->rows() != g.dim(0) || grad_reduced->cols() != g.dim(1))
      throw ValidationError("backward: reduced gradient shape mismatch");
    for (size_t i = 0; i < g.size(); ++i) g.v[i] += grad_reduced->data()[i];
  }

  for (size_t ni = cache.nodes.size(); ni-- > 0;) {
    const TapeNode& node = cache.nodes[ni];
    const Tensor& go = slot_grads[static_cast<size_t>(node.output)];
    Tensor& gi = slot_grads[static_cast<size_t>(node.input)];
    const Tensor& in = cache.values[static_cast<size_t>(node.input)];

    switch (node.kind) {
      case OpKind::conv3x3:
        conv3x3_backward(in, params.at(node.weight_name), go, gi, grads.at(node.weight_name),
                         grads.at(node.bias_name));
        break;
      case OpKind::relu: {
        const Tensor& out = cache.values[static_cast<size_t>(node.output)];
        for (size_t i = 0; i < gi.size(); ++i)
          if (out.v[i] > 0.0) gi.v[i] += go.v[i];
        break;
      }
      case OpKind::maxpool2:
        for (size_t i = 0; i < go.size(); ++i) gi.v[node.argmax[i]] += go.v[i];
        break;
      case OpKind::whiten_affine: {
        size_t n = in.dim(0), d = in.dim(1), h = in.dim(2), w = in.dim(3);
        std::vector<double> g(d);
        for (size_t i = 0; i < n; ++i)
          for (size_t y = 0; y < h; ++y)
            for (size_t x = 0; x < w; ++x) {
              for (size_t c = 0; c < d; ++c) g[c] = go.at4(i, c, y, x);
              for (size_t c = 0; c < d; ++c) {
                double acc = 0.0;
                for (size_t r = 0; r < d; ++r) acc += node.affine(r, c) * g[r];
                gi.at4(i, c, y, x) += acc;
              }
            }
        break;
      }
      case OpKind::reduce_act: {
        size_t d = go.dim(1);
        size_t windows = node.argmax.size() / (go.dim(0) * d);
        double inv_windows = 1.0 / static_cast<double>(windows);
        size_t slot = 0;
        for (size_t i = 0; i < go.dim(0); ++i)
          for (size_t c = 0; c < d; ++c) {
            double g = go.at2(i, c) * inv_windows;
            for (size_t b = 0; b < windows; ++b) gi.v[node.argmax[slot++]] += g;
          }
        break;
      }
      case OpKind::flatten:
        for (size_t i = 0; i < gi.size(); ++i) gi.v[i] += go.v[i];
        break;
      case OpKind::linear: {
        const Tensor& w = params.at(node.weight_name);
        Tensor& gw = grads.at(node.weight_name);
        Tensor& gb = grads.at(node.bias_name);
        size_t n = in.dim(0), f = in.dim(1), k = w.dim(0);
        for (size_t i = 0; i < n; ++i)
          for (size_t o = 0; o < k; ++o) {
            double g = go.at2(i, o);
            if (g == 0.0) continue;
            gb.v[o] += g;
            for (size_t j = 0; j < f; ++j) {
              gw.v[o * f + j] += g * in.at2(i, j);
              gi.at2(i, j) += g * w.v[o * f + j];
            }
          }
        break;
      }
    }
  }
  return grads;
}

AdamState AdamState::create(const NetworkParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.entries) {
    s.m.emplace(name, Tensor(t.shape));
    s.v.emplace(name, Tensor(t.shape));
  }
  return s;
}

void adam_step(NetworkParams& params, const ParamGrads& grads, AdamState& state, double lr, double beta1,
               double beta2, double weight_decay) {
  constexpr double kEps = 1e-8;
  state.step += 1;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (auto& [name, p] : params.entries) {
    auto git = grads.find(name);
    if (git == grads.end()) throw ValidationError("adam_step: missing gradient for '" + name + "'");
    const Tensor& g = git->second;
    if (!same_shape(g, p)) throw ValidationError("adam_step: gradient shape mismatch for '" + name + "'");
    for (double x : g.v)
      if (!std::isfinite(x)) throw NumericError("adam_step: non-finite gradient in '" + name + "'");

    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    for (size_t i = 0; i < p.size(); ++i) {
      m.v[i] = beta1 * m.v[i] + (1.0 - beta1) * g.v[i];
      v.v[i] = beta2 * v.v[i] + (1.0 - beta2) * g.v[i] * g.v[i];
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      p.v[i] -= lr * (mhat / (std::sqrt(vhat) + kEps)) + lr * weight_decay * p.v[i];
    }
  }
}

EvalOutput eval_forward(const NetworkParams& params, const Tensor& images, const Matrix& m,
                        const std::vector<double>& mu, size_t pool_window) {
  TapeCache cache;
  backbone_forward(params, images, cache);
  Tensor whitened = apply_whitening(cache, m, mu);
  EvalOutput out;
  out.reduced = tape_reduce(cache, pool_window);
  out.logits = head_forward(params, whitened, cache);
  return out;
}

}  // namespace hastcw
