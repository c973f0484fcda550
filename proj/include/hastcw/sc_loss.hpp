#pragma once

#include <vector>

#include "hastcw/concept_tree.hpp"
#include "hastcw/matrix.hpp"

namespace hastcw {

struct SCLossConfig {
  double alpha = 1.0;           // weight of the brother contrastive term
  double beta = 1.0;            // weight of the brother-vs-cousin triplet term
  double margin_brother = 1.0;  // m_B
  double margin_cousin = 0.5;   // m_C
  size_t pairs_per_batch = 16;  // anchor cap per concept
};

double pair_distance(const std::vector<double>& u, const std::vector<double>& v);

struct PairLossResult {
  double value = 0.0;
  Matrix grad_anchor;   // same shape as the anchor batch
  Matrix grad_brother;  // same shape as the brother batch
};

// Contrastive term: sum over anchor x brother pairs of max{0, m_B - d(a, b)}.
// Rows are samples. The hinge subgradient is 0 at the boundary.
PairLossResult brother_loss(const Matrix& anchors, const Matrix& brothers, double margin_brother);

struct TripletLossResult {
  double value = 0.0;
  Matrix grad_anchor;
  Matrix grad_brother;
  Matrix grad_cousin;
};

// Triplet term: sum over anchor x brother x cousin of
// max{0, d(a, b) - d(a, c) + m_C}.
TripletLossResult cousin_triplet_loss(const Matrix& anchors, const Matrix& brothers, const Matrix& cousins,
                                      double margin_cousin);

struct SCLossResult {
  double value = 0.0;
  Matrix grad;  // (n, d), gradient w.r.t. the reduced batch
};

// Combined loss alpha*L_B + beta*L_C over the reduced activation vectors of
// one mini-batch, grouped by concept label; brother/cousin groups are taken
// from within the batch. Anchors per concept are capped at pairs_per_batch
// (first occurrences in batch order).
SCLossResult sc_loss(const Matrix& reduced_batch, const std::vector<int>& labels, const ConceptTree& tree,
                     const SCLossConfig& cfg);

}  // namespace hastcw
