#include "hastcw/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hastcw/errors.hpp"
#include "hastcw/linalg.hpp"

namespace hastcw {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad numeric value for '" + key + "': " + value);
  }
}

uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: bad integer value for '" + key + "': " + value);
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

uint64_t fnv1a(const void* data, size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

const char* train_mode_name(TrainMode mode) {
  switch (mode) {
    case TrainMode::plain_cw: return "plain_cw";
    case TrainMode::hastcw: return "hastcw";
    case TrainMode::hastcw_sc: return "hastcw_sc";
  }
  throw ValidationError("invalid train mode");
}

TrainMode train_mode_from_name(const std::string& name) {
  if (name == "plain_cw") return TrainMode::plain_cw;
  if (name == "hastcw") return TrainMode::hastcw;
  if (name == "hastcw_sc") return TrainMode::hastcw_sc;
  throw ValidationError("unknown mode '" + name + "' (expected plain_cw|hastcw|hastcw_sc)");
}

void TrainConfig::apply(const std::string& key, const std::string& value) {
  if (key == "epochs") epochs = parse_uint(key, value);
  else if (key == "batch_size") batch_size = parse_uint(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "weight_decay") weight_decay = parse_double(key, value);
  else if (key == "beta1") beta1 = parse_double(key, value);
  else if (key == "beta2") beta2 = parse_double(key, value);
  else if (key == "t_thre") t_thre = parse_uint(key, value);
  else if (key == "ema_decay") ema_decay = parse_double(key, value);
  else if (key == "eps") eps = parse_double(key, value);
  else if (key == "mode") mode = train_mode_from_name(value);
  else if (key == "seed") seed = parse_uint(key, value);
  else if (key == "sc.alpha") sc.alpha = parse_double(key, value);
  else if (key == "sc.beta") sc.beta = parse_double(key, value);
  else if (key == "sc.margin_brother") sc.margin_brother = parse_double(key, value);
  else if (key == "sc.margin_cousin") sc.margin_cousin = parse_double(key, value);
  else if (key == "pool_window") pool_window = parse_uint(key, value);
  else if (key == "latent_dim") latent_dim = parse_uint(key, value);
  else throw ValidationError("config: unknown key '" + key + "'");
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  TrainConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

std::string TrainConfig::to_text() const {
  std::ostringstream out;
  out << "epochs = " << epochs << '\n'
      << "batch_size = " << batch_size << '\n'
      << "lr = " << fmt(lr) << '\n'
      << "weight_decay = " << fmt(weight_decay) << '\n'
      << "beta1 = " << fmt(beta1) << '\n'
      << "beta2 = " << fmt(beta2) << '\n'
      << "t_thre = " << t_thre << '\n'
      << "ema_decay = " << fmt(ema_decay) << '\n'
      << "eps = " << fmt(eps) << '\n'
      << "mode = " << train_mode_name(mode) << '\n'
      << "seed = " << seed << '\n'
      << "sc.alpha = " << fmt(sc.alpha) << '\n'
      << "sc.beta = " << fmt(sc.beta) << '\n'
      << "sc.margin_brother = " << fmt(sc.margin_brother) << '\n'
      << "sc.margin_cousin = " << fmt(sc.margin_cousin) << '\n'
      << "pool_window = " << pool_window << '\n'
      << "latent_dim = " << latent_dim << '\n';
  return out.str();
}

void TrainConfig::validate() const {
  if (t_thre < 1) throw ValidationError("config: t_thre must be >= 1");
  if (batch_size < 2) throw ValidationError("config: batch_size must be >= 2");
  if (ema_decay < 0.0 || ema_decay > 1.0) throw ValidationError("config: ema_decay must be in [0, 1]");
  if (sc.alpha < 0.0 || sc.beta < 0.0) throw ValidationError("config: sc weights must be >= 0");
  if (sc.margin_brother < 0.0 || sc.margin_cousin < 0.0)
    throw ValidationError("config: sc margins must be >= 0");
  if (pool_window < 1) throw ValidationError("config: pool_window must be >= 1");
  if (latent_dim < 1) throw ValidationError("config: latent_dim must be >= 1");
}

std::string TrainReport::to_csv(const TrainConfig& config) const {
  std::ostringstream out;
  std::string cfg = config.to_text();
  std::replace(cfg.begin(), cfg.end(), '\n', ' ');
  out << "# " << cfg << '\n';
  out << "# note: default lr is 0.01 for this desk-scale network; set lr = 0.1 to match the original "
         "recipe\n";
  out << "epoch,train_loss,train_acc,val_loss,val_acc,align_obj,q_accepts\n";
  for (const EpochRecord& e : epochs)
    out << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.train_acc) << ',' << fmt(e.val_loss) << ','
        << fmt(e.val_acc) << ',' << fmt(e.align_obj) << ',' << e.q_accepts << '\n';
  return out.str();
}

// --- checkpoint ------------------------------------------------------------

namespace {

RawTensor matrix_to_raw(const Matrix& m) {
  RawTensor r;
  r.dtype = Dtype::f32;
  r.dims = {static_cast<uint32_t>(m.rows()), static_cast<uint32_t>(m.cols())};
  r.f32.resize(m.data().size());
  for (size_t i = 0; i < m.data().size(); ++i) r.f32[i] = static_cast<float>(m.data()[i]);
  return r;
}

Matrix raw_to_matrix(const RawTensor& r, const std::string& what) {
  if (r.dtype != Dtype::f32 || r.dims.size() != 2) throw FormatError(what + ": expected 2-d float tensor");
  Matrix m(r.dims[0], r.dims[1]);
  for (size_t i = 0; i < r.f32.size(); ++i) m.data()[i] = r.f32[i];
  return m;
}

// Newton-Schulz polar iteration; restores orthogonality lost to f32 storage.
Matrix reorthonormalize(Matrix q) {
  for (int it = 0; it < 8 && orthogonality_residual(q) > 1e-12; ++it) {
    Matrix qtq = multiply(transpose(q), q);
    Matrix three_i = scale(Matrix::identity(q.rows()), 3.0);
    q = scale(multiply(q, subtract(three_i, qtq)), 0.5);
  }
  return q;
}

}  // namespace

void Checkpoint::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir + "/meta.txt");
  if (!meta) throw IoError("cannot write checkpoint meta in " + dir);
  meta << config.to_text();
  meta << "in_channels = " << params.in_channels << '\n';
  meta << "image_size = " << params.image_size << '\n';
  meta << "num_classes = " << params.num_classes << '\n';

  std::ofstream tree_file(dir + "/tree.txt");
  if (!tree_file) throw IoError("cannot write checkpoint tree in " + dir);
  tree_file << tree.to_text();

  for (const auto& [name, t] : params.entries) write_tensor(dir + "/" + name + ".hcwt", to_raw_f32(t));

  RawTensor mu;
  mu.dtype = Dtype::f32;
  mu.dims = {static_cast<uint32_t>(whitening.mu.size())};
  mu.f32.assign(whitening.mu.begin(), whitening.mu.end());
  write_tensor(dir + "/mu.hcwt", mu);
  write_tensor(dir + "/w.hcwt", matrix_to_raw(whitening.w));
  write_tensor(dir + "/q.hcwt", matrix_to_raw(q.q()));
}

Checkpoint Checkpoint::load(const std::string& dir) {
  std::ifstream meta(dir + "/meta.txt");
  if (!meta) throw IoError("cannot open checkpoint meta: " + dir + "/meta.txt");

  Checkpoint cp;
  size_t in_channels = 0, image_size = 0, num_classes = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(meta, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw FormatError("checkpoint meta line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key == "in_channels") in_channels = parse_uint(key, value);
    else if (key == "image_size") image_size = parse_uint(key, value);
    else if (key == "num_classes") num_classes = parse_uint(key, value);
    else cp.config.apply(key, value);
  }
  if (in_channels == 0 || image_size == 0 || num_classes == 0)
    throw FormatError("checkpoint meta is missing model dimensions");

  cp.tree = ConceptTree::load(dir + "/tree.txt");
  if (cp.tree.leaves().size() != num_classes)
    throw FormatError("checkpoint tree leaf count disagrees with num_classes");

  SeededRng init_rng(cp.config.seed);
  cp.params = NetworkParams::create(in_channels, image_size, cp.config.latent_dim, num_classes, init_rng);
  for (auto& [name, t] : cp.params.entries) {
    RawTensor raw = read_tensor(dir + "/" + name + ".hcwt");
    Tensor loaded = from_raw_f32(raw);
    if (!same_shape(loaded, t)) throw FormatError("checkpoint tensor '" + name + "' has unexpected shape");
    t = std::move(loaded);
  }

  RawTensor mu = read_tensor(dir + "/mu.hcwt");
  if (mu.dtype != Dtype::f32 || mu.dims.size() != 1 || mu.dims[0] != cp.config.latent_dim)
    throw FormatError("checkpoint mu has unexpected shape");
  cp.whitening = WhiteningState::initial(cp.config.latent_dim, cp.config.ema_decay, cp.config.eps);
  cp.whitening.mu.assign(mu.f32.begin(), mu.f32.end());
  cp.whitening.w = raw_to_matrix(read_tensor(dir + "/w.hcwt"), "checkpoint W");
  if (cp.whitening.w.rows() != cp.config.latent_dim) throw FormatError("checkpoint W has unexpected shape");

  Matrix q = raw_to_matrix(read_tensor(dir + "/q.hcwt"), "checkpoint Q");
  if (q.rows() != cp.config.latent_dim) throw FormatError("checkpoint Q has unexpected shape");
  cp.q = RotationMatrix(reorthonormalize(q));
  return cp;
}

// --- training --------------------------------------------------------------

namespace {

Tensor gather_images(const Dataset& ds, const std::vector<size_t>& indices) {
  size_t s = ds.images.dim(2);
  Tensor out({indices.size(), ds.images.dim(1), s, ds.images.dim(3)});
  size_t per = ds.images.dim(1) * s * ds.images.dim(3);
  for (size_t i = 0; i < indices.size(); ++i)
    std::copy_n(ds.images.v.begin() + static_cast<long>(indices[i] * per), per,
                out.v.begin() + static_cast<long>(i * per));
  return out;
}

size_t argmax_row(const Tensor& logits, size_t row) {
  size_t best = 0;
  for (size_t j = 1; j < logits.dim(1); ++j)
    if (logits.at2(row, j) > logits.at2(row, best)) best = j;
  return best;
}

struct SplitEval {
  double loss = 0.0;
  double acc = 0.0;
  std::vector<size_t> per_class_correct;
  std::vector<size_t> per_class_total;
};

SplitEval evaluate_split(const NetworkParams& params, const WhiteningState& state, const RotationMatrix& rot,
                         const Dataset& ds, const std::vector<size_t>& indices,
                         const std::vector<int>& leaf_index_of, size_t num_classes, size_t pool_window) {
  SplitEval ev;
  ev.per_class_correct.assign(num_classes, 0);
  ev.per_class_total.assign(num_classes, 0);
  if (indices.empty()) return ev;

  Matrix m = multiply(transpose(rot.q()), state.w);
  size_t correct = 0;
  double loss_sum = 0.0;
  const size_t chunk = 64;
  for (size_t start = 0; start < indices.size(); start += chunk) {
    std::vector<size_t> part(indices.begin() + static_cast<long>(start),
                             indices.begin() + static_cast<long>(std::min(indices.size(), start + chunk)));
    Tensor images = gather_images(ds, part);
    std::vector<int> labels(part.size());
    for (size_t i = 0; i < part.size(); ++i) labels[i] = leaf_index_of[ds.labels[part[i]]];

    EvalOutput out = eval_forward(params, images, m, state.mu, pool_window);
    CrossEntropyResult ce = cross_entropy(out.logits, labels);
    loss_sum += ce.loss * static_cast<double>(part.size());
    for (size_t i = 0; i < part.size(); ++i) {
      size_t cls = static_cast<size_t>(labels[i]);
      ev.per_class_total[cls] += 1;
      if (argmax_row(out.logits, i) == cls) {
        ++correct;
        ev.per_class_correct[cls] += 1;
      }
    }
  }
  ev.loss = loss_sum / static_cast<double>(indices.size());
  ev.acc = static_cast<double>(correct) / static_cast<double>(indices.size());
  return ev;
}

}  // namespace

StepResult stage1_step(NetworkParams& params, AdamState& adam, WhiteningState& state,
                       const RotationMatrix& rot, const Tensor& images,
                       const std::vector<int>& class_labels, const std::vector<int>& concept_labels,
                       const ConceptTree& tree, const TrainConfig& config) {
  TapeCache cache;
  Tensor features = backbone_forward(params, images, cache);
  BatchStats stats = batch_statistics(features, config.eps);
  Matrix m = multiply(transpose(rot.q()), stats.w);
  apply_whitening(cache, m, stats.mu);
  Matrix reduced = tape_reduce(cache, config.pool_window);
  Tensor logits = head_forward(params, cache.value(cache.whitened_slot), cache);

  CrossEntropyResult ce = cross_entropy(logits, class_labels);
  StepResult res;
  res.ce_loss = ce.loss;
  res.loss = ce.loss;

  SCLossResult sc;
  bool use_sc = config.mode == TrainMode::hastcw_sc && (config.sc.alpha > 0.0 || config.sc.beta > 0.0);
  if (use_sc) {
    sc = sc_loss(reduced, concept_labels, tree, config.sc);
    res.loss += sc.value;
  }

  ParamGrads grads = backward(cache, params, ce.grad_logits, use_sc ? &sc.grad : nullptr);
  adam_step(params, grads, adam, config.lr, config.beta1, config.beta2, config.weight_decay);
  state = ema_update(state, stats);

  for (size_t i = 0; i < class_labels.size(); ++i)
    if (argmax_row(logits, i) == static_cast<size_t>(class_labels[i])) ++res.correct;
  return res;
}

ConceptBatchSet build_concept_batches(const NetworkParams& params, const WhiteningState& state,
                                      const Dataset& ds, const std::vector<size_t>& pool_indices,
                                      size_t per_concept_cap, SeededRng& rng) {
  std::vector<int> pool_labels(pool_indices.size());
  for (size_t i = 0; i < pool_indices.size(); ++i) pool_labels[i] = ds.labels[pool_indices[i]];

  ConceptBatchSet batches;
  batches.per_concept.resize(static_cast<size_t>(ds.tree.size()));
  Matrix identity_q = Matrix::identity(params.latent_dim);
  for (int c = 0; c < ds.tree.size(); ++c) {
    std::vector<size_t> members = ds.tree.concept_samples(c, pool_labels);
    if (members.empty())
      throw ValidationError("concept pool has no samples for concept '" + ds.tree.name(c) + "'");
    rng.shuffle(members);
    if (members.size() > per_concept_cap) members.resize(per_concept_cap);
    std::vector<size_t> sample_indices(members.size());
    for (size_t i = 0; i < members.size(); ++i) sample_indices[i] = pool_indices[members[i]];

    Tensor images = gather_images(ds, sample_indices);
    TapeCache cache;
    Tensor features = backbone_forward(params, images, cache);
    // psi(Z) = W (Z - mu): alignment scores apply Q explicitly
    FeatureBatch whitened = whiten_transform(features, state.mu, state.w, identity_q);
    batches.per_concept[c] = spatial_mean(whitened);
  }
  return batches;
}

TrainReport train(const TrainConfig& config, const std::string& data_dir, const std::string& out_dir) {
  config.validate();
  Dataset ds = load_dataset(data_dir);
  if (static_cast<size_t>(ds.tree.size()) > config.latent_dim)
    throw ValidationError("tree declares more concepts than latent dimensions (" +
                          std::to_string(ds.tree.size()) + " > " + std::to_string(config.latent_dim) + ")");
  size_t image_size = ds.images.dim(2);
  if (image_size % 8 != 0) throw ValidationError("image size must be a multiple of 8 for this backbone");

  std::vector<int> leaves = ds.tree.leaves();
  std::vector<int> leaf_index_of(static_cast<size_t>(ds.tree.size()), -1);
  for (size_t i = 0; i < leaves.size(); ++i) leaf_index_of[static_cast<size_t>(leaves[i])] = static_cast<int>(i);
  for (int l : ds.labels)
    if (leaf_index_of[static_cast<size_t>(l)] < 0)
      throw ValidationError("dataset label '" + ds.tree.name(l) + "' is not a leaf concept");

  std::vector<size_t> train_idx = ds.indices_with_tag(SplitTag::train);
  std::vector<size_t> val_idx = ds.indices_with_tag(SplitTag::val);
  std::vector<size_t> concept_idx = ds.indices_with_tag(SplitTag::concept_pool);
  if (train_idx.empty()) throw ValidationError("dataset has no training samples");
  if (concept_idx.empty()) throw ValidationError("dataset has no concept-pool samples");
  {
    std::vector<int> pool_labels(concept_idx.size());
    for (size_t i = 0; i < concept_idx.size(); ++i) pool_labels[i] = ds.labels[concept_idx[i]];
    for (int c = 0; c < ds.tree.size(); ++c)
      if (ds.tree.concept_samples(c, pool_labels).empty())
        throw ValidationError("concept pool has no samples for concept '" + ds.tree.name(c) + "'");
  }

  SeededRng rng(config.seed);
  NetworkParams params =
      NetworkParams::create(ds.images.dim(1), image_size, config.latent_dim, leaves.size(), rng);
  WhiteningState state = WhiteningState::initial(config.latent_dim, config.ema_decay, config.eps);
  RotationMatrix rot(config.latent_dim);
  AdamState adam = AdamState::create(params);

  Checkpoint best;
  best.params = params;
  best.whitening = state;
  best.q = rot;
  best.tree = ds.tree;
  best.config = config;

  TrainReport report;
  double best_val = -1.0;
  double last_align_obj = std::nan("");
  const bool include_children = config.mode != TrainMode::plain_cw;
  const size_t stage2_batch_cap = 8;
  size_t global_step = 0;
  uint64_t q_hash = fnv1a(rot.q().data().data(), rot.q().data().size() * sizeof(double));

  for (size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<size_t> order = train_idx;
    rng.shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    double loss_sum = 0.0;
    size_t correct = 0, seen = 0;

    for (size_t start = 0; start + 1 < order.size(); start += config.batch_size) {
      size_t end = std::min(order.size(), start + config.batch_size);
      if (end - start < 2) break;  // whitening needs at least two samples
      std::vector<size_t> part(order.begin() + static_cast<long>(start),
                               order.begin() + static_cast<long>(end));
      Tensor images = gather_images(ds, part);
      std::vector<int> class_labels(part.size()), concept_labels(part.size());
      for (size_t i = 0; i < part.size(); ++i) {
        concept_labels[i] = ds.labels[part[i]];
        class_labels[i] = leaf_index_of[static_cast<size_t>(concept_labels[i])];
      }

      // stage 1 never touches Q
      uint64_t h = fnv1a(rot.q().data().data(), rot.q().data().size() * sizeof(double));
      if (h != q_hash) throw UsageError("internal: Q changed outside a stage-2 trigger");

      StepResult sr = stage1_step(params, adam, state, rot, images, class_labels, concept_labels, ds.tree,
                                  config);
      loss_sum += sr.loss * static_cast<double>(part.size());
      correct += sr.correct;
      seen += part.size();
      ++global_step;

      if (global_step % config.t_thre == 0) {
        ConceptBatchSet cbs = build_concept_batches(params, state, ds, concept_idx, stage2_batch_cap, rng);
        CurvilinearResult cr = curvilinear_update(rot, cbs, ds.tree, 1.0, 0.5, 20, include_children);
        rot.set(cr.q);
        q_hash = fnv1a(rot.q().data().data(), rot.q().data().size() * sizeof(double));

        TriggerRecord tr;
        tr.step = global_step;
        tr.eta_used = cr.eta_used;
        tr.objective_before = cr.objective_before;
        tr.objective_after = cr.objective_after;
        tr.accepted = cr.eta_used > 0.0;
        tr.ortho_residual = orthogonality_residual(rot.q());
        report.triggers.push_back(tr);
        if (tr.accepted) rec.q_accepts += 1;
        last_align_obj = cr.objective_after;
      }
    }

    rec.train_loss = seen > 0 ? loss_sum / static_cast<double>(seen) : 0.0;
    rec.train_acc = seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen) : 0.0;

    SplitEval val = evaluate_split(params, state, rot, ds, val_idx, leaf_index_of, leaves.size(),
                                   config.pool_window);
    rec.val_loss = val.loss;
    rec.val_acc = val.acc;
    rec.align_obj = last_align_obj;
    report.epochs.push_back(rec);

    if (rec.val_acc > best_val) {
      best_val = rec.val_acc;
      best.params = params;
      best.whitening = state;
      best.q = rot;
      report.best_epoch = epoch;
      report.best_val_acc = rec.val_acc;
    }
  }

  std::filesystem::create_directories(out_dir);
  best.save(out_dir);
  std::ofstream csv(out_dir + "/report.csv");
  if (!csv) throw IoError("cannot write report.csv in " + out_dir);
  csv << report.to_csv(config);
  return report;
}

// --- evaluation ------------------------------------------------------------

Matrix reduced_activations(const Checkpoint& cp, const Dataset& ds, const std::vector<size_t>& indices) {
  Matrix m = multiply(transpose(cp.q.q()), cp.whitening.w);
  Matrix out(indices.size(), cp.params.latent_dim);
  const size_t chunk = 64;
  for (size_t start = 0; start < indices.size(); start += chunk) {
    std::vector<size_t> part(indices.begin() + static_cast<long>(start),
                             indices.begin() + static_cast<long>(std::min(indices.size(), start + chunk)));
    Tensor images = gather_images(ds, part);
    EvalOutput eo = eval_forward(cp.params, images, m, cp.whitening.mu, cp.config.pool_window);
    for (size_t i = 0; i < part.size(); ++i)
      for (size_t c = 0; c < cp.params.latent_dim; ++c) out(start + i, c) = eo.reduced(i, c);
  }
  return out;
}

EvalMetrics evaluate(const Checkpoint& cp, const Dataset& ds, SplitTag split) {
  if (ds.images.dim(1) != cp.params.in_channels || ds.images.dim(2) != cp.params.image_size)
    throw ValidationError("evaluate: dataset shape is incompatible with the checkpoint");
  if (ds.tree.size() != cp.tree.size()) throw ValidationError("evaluate: dataset tree disagrees with checkpoint");

  std::vector<int> leaves = cp.tree.leaves();
  std::vector<int> leaf_index_of(static_cast<size_t>(cp.tree.size()), -1);
  for (size_t i = 0; i < leaves.size(); ++i) leaf_index_of[static_cast<size_t>(leaves[i])] = static_cast<int>(i);

  std::vector<size_t> indices = ds.indices_with_tag(split);
  EvalMetrics metrics;
  metrics.samples = indices.size();
  if (indices.empty()) throw ValidationError("evaluate: split has no samples");

  SplitEval ev = evaluate_split(cp.params, cp.whitening, cp.q, ds, indices, leaf_index_of, leaves.size(),
                                cp.config.pool_window);
  metrics.accuracy = ev.acc;
  metrics.loss = ev.loss;
  for (size_t i = 0; i < leaves.size(); ++i) {
    double a = ev.per_class_total[i] > 0
                   ? static_cast<double>(ev.per_class_correct[i]) / static_cast<double>(ev.per_class_total[i])
                   : std::nan("");
    metrics.per_class.emplace_back(cp.tree.name(leaves[i]), a);
  }

  // brother/cousin geometry on reduced vectors
  Matrix reduced = reduced_activations(cp, ds, indices);
  std::vector<std::vector<size_t>> rows_of_leaf(leaves.size());
  for (size_t i = 0; i < indices.size(); ++i)
    rows_of_leaf[static_cast<size_t>(leaf_index_of[static_cast<size_t>(ds.labels[indices[i]])])].push_back(i);

  std::vector<std::pair<size_t, size_t>> brother_pairs, cousin_pairs;
  for (size_t a = 0; a < leaves.size(); ++a) {
    RelationSet rel = cp.tree.relations(leaves[a]);
    for (size_t b = a + 1; b < leaves.size(); ++b) {
      if (rows_of_leaf[a].empty() || rows_of_leaf[b].empty()) continue;
      if (rel.brothers.count(leaves[b])) brother_pairs.emplace_back(a, b);
      else if (rel.cousins.count(leaves[b])) cousin_pairs.emplace_back(a, b);
    }
  }

  auto row_dist = [&](size_t r1, size_t r2) {
    double s = 0.0;
    for (size_t c = 0; c < reduced.cols(); ++c) {
      double diff = reduced(r1, c) - reduced(r2, c);
      s += diff * diff;
    }
    return std::sqrt(s);
  };

  const size_t draws = 2000;
  SeededRng pair_rng(0x5eedULL);  // fixed: metrics are a pure function of the inputs
  auto sampled_mean = [&](const std::vector<std::pair<size_t, size_t>>& pairs) {
    if (pairs.empty()) return std::nan("");
    double sum = 0.0;
    for (size_t k = 0; k < draws; ++k) {
      const auto& [ca, cb] = pairs[pair_rng.uniform_int(pairs.size())];
      size_t r1 = rows_of_leaf[ca][pair_rng.uniform_int(rows_of_leaf[ca].size())];
      size_t r2 = rows_of_leaf[cb][pair_rng.uniform_int(rows_of_leaf[cb].size())];
      sum += row_dist(r1, r2);
    }
    return sum / static_cast<double>(draws);
  };
  metrics.mean_brother_distance = sampled_mean(brother_pairs);
  metrics.mean_cousin_distance = sampled_mean(cousin_pairs);

  Matrix centroids(leaves.size(), reduced.cols());
  for (size_t a = 0; a < leaves.size(); ++a) {
    for (size_t r : rows_of_leaf[a])
      for (size_t c = 0; c < reduced.cols(); ++c) centroids(a, c) += reduced(r, c);
    if (!rows_of_leaf[a].empty())
      for (size_t c = 0; c < reduced.cols(); ++c) centroids(a, c) /= static_cast<double>(rows_of_leaf[a].size());
  }
  auto centroid_mean = [&](const std::vector<std::pair<size_t, size_t>>& pairs) {
    if (pairs.empty()) return std::nan("");
    double sum = 0.0;
    for (const auto& [ca, cb] : pairs) {
      double s = 0.0;
      for (size_t c = 0; c < centroids.cols(); ++c) {
        double diff = centroids(ca, c) - centroids(cb, c);
        s += diff * diff;
      }
      sum += std::sqrt(s);
    }
    return sum / static_cast<double>(pairs.size());
  };
  metrics.centroid_brother_distance = centroid_mean(brother_pairs);
  metrics.centroid_cousin_distance = centroid_mean(cousin_pairs);
  return metrics;
}

EvalMetrics evaluate(const std::string& model_dir, const std::string& data_dir, SplitTag split) {
  Checkpoint cp = Checkpoint::load(model_dir);
  Dataset ds = load_dataset(data_dir);
  return evaluate(cp, ds, split);
}

std::string EvalMetrics::to_text() const {
  std::ostringstream out;
  out << "samples=" << samples << '\n';
  out << "accuracy=" << fmt(accuracy) << '\n';
  out << "loss=" << fmt(loss) << '\n';
  out << "mean_brother_distance=" << fmt(mean_brother_distance) << '\n';
  out << "mean_cousin_distance=" << fmt(mean_cousin_distance) << '\n';
  out << "centroid_brother_distance=" << fmt(centroid_brother_distance) << '\n';
  out << "centroid_cousin_distance=" << fmt(centroid_cousin_distance) << '\n';
  for (const auto& [name, acc] : per_class) out << "class_accuracy," << name << ',' << fmt(acc) << '\n';
  return out.str();
}

}  // namespace hastcw
