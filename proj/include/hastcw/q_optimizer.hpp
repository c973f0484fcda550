#pragma once

#include <vector>

#include "hastcw/concept_tree.hpp"
#include "hastcw/hcw_layer.hpp"
#include "hastcw/matrix.hpp"

namespace hastcw {

// Whitened representations per concept, reduced to length-d row vectors
// (spatial mean), indexed by concept id.
struct ConceptBatchSet {
  std::vector<Matrix> per_concept;  // each (n_i, d), all non-empty

  size_t concept_count() const { return per_concept.size(); }
};

// Concept axis alignment score:
//   sum_i [ (1/n_i) q_i^T s_i + sum_{c in children(i)} 1/(n_i * |children(i)|) q_c^T s_i ]
// with s_i the column sum of concept i's batch. include_children = false
// drops the child terms (flat whitening baseline).
double alignment_objective(const RotationMatrix& q, const ConceptBatchSet& batches, const ConceptTree& tree,
                           bool include_children = true);

// Raw evaluation without the orthogonality precondition; the objective is
// linear in Q, which directional-derivative checks exploit.
double alignment_objective(const Matrix& q, const ConceptBatchSet& batches, const ConceptTree& tree,
                           bool include_children = true);

// Negative Euclidean gradient of the objective: column for axis i is
//   -(1/n_i) s_i - sum over parents p with i in children(p) of s_p/(n_p*|children(p)|).
// Axes without a concept get zero columns.
Matrix alignment_gradient(const ConceptBatchSet& batches, const ConceptTree& tree, size_t d,
                          bool include_children = true);

// One Cayley-transform update along the descent direction of -objective:
//   A = G Q^T - Q G^T,  Q' = (I + eta/2 A)^{-1} (I - eta/2 A) Q.
Matrix cayley_step(const Matrix& q, const Matrix& g, double eta);

struct CurvilinearResult {
  Matrix q;
  double eta_used = 0.0;        // 0 when no step was accepted
  double objective_delta = 0.0;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

// Backtracking search over eta in {eta0, eta0*shrink, ...}; accepts the first
// step satisfying the sufficient-increase rule
//   f(Q') >= f(Q) + c1 * eta * ||A||_F^2 / 2   (c1 = 1e-4).
// Degrades to a no-op (eta_used = 0) when every candidate is rejected.
CurvilinearResult curvilinear_update(const RotationMatrix& q, const ConceptBatchSet& batches,
                                     const ConceptTree& tree, double eta0 = 1.0, double shrink = 0.5,
                                     int max_backtracks = 20, bool include_children = true);

}  // namespace hastcw
