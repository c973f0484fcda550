#pragma once

#include <array>
#include <string>
#include <vector>

#include "hastcw/concept_tree.hpp"
#include "hastcw/tensor.hpp"

namespace hastcw {

// Split tags, one per sample. "concept" marks the per-class pool reserved
// for rotation updates; the remaining training images carry "train".
enum class SplitTag : uint8_t { train = 0, val = 1, test = 2, concept_pool = 3 };

const char* split_tag_name(SplitTag tag);
SplitTag split_tag_from_name(const std::string& name);

// Default 3-level hierarchy: 2 shape families, 5 fill-pattern groups,
// 9 size-band leaf classes.
std::string default_tree_text();

struct DatasetSpec {
  std::string tree_text;     // empty -> default tree
  size_t per_leaf = 60;      // images per leaf class (>= 10)
  size_t image_size = 32;    // square, >= 16
  double noise_sigma = 0.02; // additive pixel noise scale
  uint64_t seed = 1;
};

struct Dataset {
  ConceptTree tree;
  Tensor images;            // (n, 1, s, s) in [0, 1]
  std::vector<int> labels;  // leaf concept ids
  std::vector<SplitTag> split;

  size_t size() const { return labels.size(); }
  std::vector<size_t> indices_with_tag(SplitTag tag) const;
};

// Image i is a pure function of (spec.seed, i): leaf class determines shape
// family / fill pattern / size band; position jitter and pixel noise are
// drawn from a per-image stream.
Dataset generate_dataset(const DatasetSpec& spec);

// Stratified per-leaf split (floor of each ratio; remainder goes to train),
// then concept_per_class images per leaf move from train to the concept pool.
void split_dataset(Dataset& ds, const std::array<double, 3>& ratios, size_t concept_per_class,
                   uint64_t seed);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

}  // namespace hastcw
