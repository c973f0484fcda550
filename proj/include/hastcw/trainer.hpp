#pragma once

#include <string>
#include <vector>

#include "hastcw/concept_tree.hpp"
#include "hastcw/dataset.hpp"
#include "hastcw/hcw_layer.hpp"
#include "hastcw/net.hpp"
#include "hastcw/q_optimizer.hpp"
#include "hastcw/sc_loss.hpp"

namespace hastcw {

enum class TrainMode { plain_cw, hastcw, hastcw_sc };

const char* train_mode_name(TrainMode mode);
TrainMode train_mode_from_name(const std::string& name);

struct TrainConfig {
  size_t epochs = 30;
  size_t batch_size = 16;
  double lr = 0.01;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  size_t t_thre = 5;  // stage-2 trigger period, in mini-batches
  double ema_decay = 0.9;
  double eps = 1e-5;
  TrainMode mode = TrainMode::hastcw_sc;
  uint64_t seed = 7;
  SCLossConfig sc;
  size_t pool_window = 2;
  size_t latent_dim = 32;

  static TrainConfig load(const std::string& path);
  // Applies one "key = value" assignment; throws ValidationError on unknown
  // keys or unparsable values.
  void apply(const std::string& key, const std::string& value);
  std::string to_text() const;
  void validate() const;
};

struct TriggerRecord {
  size_t step = 0;  // global mini-batch counter at the trigger
  double eta_used = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
  bool accepted = false;
  double ortho_residual = 0.0;
};

struct EpochRecord {
  size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double align_obj = 0.0;  // objective after the most recent trigger; NaN before the first
  size_t q_accepts = 0;    // accepted triggers within this epoch
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::vector<TriggerRecord> triggers;
  size_t best_epoch = 0;  // 0 = initialization
  double best_val_acc = 0.0;

  std::string to_csv(const TrainConfig& config) const;
};

struct Checkpoint {
  NetworkParams params;
  WhiteningState whitening;
  RotationMatrix q;
  ConceptTree tree;
  TrainConfig config;

  Checkpoint() : q(1) {}

  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);
};

// One stage-1 update: forward through backbone + whitening (batch statistics)
// + head, cross-entropy (+ semantic constraint in hastcw_sc mode), backward,
// Adam step, then EMA update of the whitening state.
struct StepResult {
  double loss = 0.0;     // total optimized loss
  double ce_loss = 0.0;  // cross-entropy part
  size_t correct = 0;
};

StepResult stage1_step(NetworkParams& params, AdamState& adam, WhiteningState& state,
                       const RotationMatrix& rot, const Tensor& images,
                       const std::vector<int>& class_labels, const std::vector<int>& concept_labels,
                       const ConceptTree& tree, const TrainConfig& config);

// Per-concept whitened batches (descendant closure over the concept pool),
// reduced by spatial mean; used for the alignment objective and its gradient.
ConceptBatchSet build_concept_batches(const NetworkParams& params, const WhiteningState& state,
                                      const Dataset& ds, const std::vector<size_t>& pool_indices,
                                      size_t per_concept_cap, SeededRng& rng);

// Runs the alternating scheme and writes <out_dir>/report.csv plus the
// best-validation checkpoint into out_dir.
TrainReport train(const TrainConfig& config, const std::string& data_dir, const std::string& out_dir);

struct EvalMetrics {
  size_t samples = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::vector<std::pair<std::string, double>> per_class;  // leaf name -> accuracy
  double mean_brother_distance = 0.0;
  double mean_cousin_distance = 0.0;
  double centroid_brother_distance = 0.0;
  double centroid_cousin_distance = 0.0;

  std::string to_text() const;
};

EvalMetrics evaluate(const Checkpoint& cp, const Dataset& ds, SplitTag split);
EvalMetrics evaluate(const std::string& model_dir, const std::string& data_dir, SplitTag split);

// Reduced activation vectors (max-pool-then-mean) for the given samples,
// eval-mode statistics. Rows follow the order of `indices`.
Matrix reduced_activations(const Checkpoint& cp, const Dataset& ds, const std::vector<size_t>& indices);

}  // namespace hastcw
