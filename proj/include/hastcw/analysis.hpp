#pragma once

#include <string>
#include <vector>

#include "hastcw/trainer.hpp"

namespace hastcw {

struct ActivationRecord {
  size_t rank = 0;          // 1-based
  size_t sample_index = 0;  // global dataset index
  std::string label_name;
  double activation = 0.0;
};

// Scores every test image by the reduced activation at the concept's axis;
// top-k by value, ties broken by ascending sample index.
std::vector<ActivationRecord> top_k_activations(const Checkpoint& cp, const Dataset& ds,
                                                const std::string& concept_name, size_t k);

struct ProjectionRow {
  size_t sample_index = 0;
  std::string label_name;
  double activation_x = 0.0;
  double activation_y = 0.0;
};

// Test-split activations at two concept axes.
std::vector<ProjectionRow> concept_pair_projection(const Checkpoint& cp, const Dataset& ds,
                                                   const std::string& concept_x,
                                                   const std::string& concept_y);
std::string projection_to_csv(const std::vector<ProjectionRow>& rows);

struct ActivationTreeEntry {
  int concept_id = 0;
  double normalized = 0.0;  // min-max over all concepts; constant vector -> all 0
};

// Per-concept activations of one sample, min-max normalized to [0, 1].
std::vector<ActivationTreeEntry> activation_tree(const Checkpoint& cp, const Dataset& ds,
                                                 size_t sample_index);
// Indented rendering that mirrors the concept tree, values to 3 decimals.
std::string activation_tree_text(const ConceptTree& tree, const std::vector<ActivationTreeEntry>& entries);

}  // namespace hastcw
