#include "hastcw/q_optimizer.hpp"

#include <cmath>

#include "hastcw/errors.hpp"
#include "hastcw/linalg.hpp"

namespace hastcw {

namespace {

void check_batches(const ConceptBatchSet& batches, const ConceptTree& tree, size_t d) {
  if (batches.per_concept.size() != static_cast<size_t>(tree.size()))
    throw ValidationError("alignment: one batch per tree concept required");
  for (int i = 0; i < tree.size(); ++i) {
    const Matrix& b = batches.per_concept[i];
    if (b.rows() == 0) throw ValidationError("alignment: empty batch for concept '" + tree.name(i) + "'");
    if (d != 0 && b.cols() != d) throw ValidationError("alignment: batch vector length mismatch");
  }
}

// Column sum of a (n, d) batch.
std::vector<double> column_sum(const Matrix& b) {
  std::vector<double> s(b.cols(), 0.0);
  for (size_t r = 0; r < b.rows(); ++r)
    for (size_t c = 0; c < b.cols(); ++c) s[c] += b(r, c);
  return s;
}

}  // namespace

double alignment_objective(const Matrix& q, const ConceptBatchSet& batches, const ConceptTree& tree,
                           bool include_children) {
  size_t d = q.rows();
  check_batches(batches, tree, d);

  double total = 0.0;
  for (int i = 0; i < tree.size(); ++i) {
    const Matrix& batch = batches.per_concept[i];
    double inv_n = 1.0 / static_cast<double>(batch.rows());
    std::vector<double> s = column_sum(batch);

    size_t axis = static_cast<size_t>(tree.axis_of(i));
    double own = 0.0;
    for (size_t r = 0; r < d; ++r) own += q(r, axis) * s[r];
    total += inv_n * own;

    const std::vector<int>& kids = tree.children(i);
    if (include_children && !kids.empty()) {
      double weight = inv_n / static_cast<double>(kids.size());
      for (int child : kids) {
        size_t child_axis = static_cast<size_t>(tree.axis_of(child));
        double dot = 0.0;
        for (size_t r = 0; r < d; ++r) dot += q(r, child_axis) * s[r];
        total += weight * dot;
      }
    }
  }
  return total;
}

double alignment_objective(const RotationMatrix& q, const ConceptBatchSet& batches, const ConceptTree& tree,
                           bool include_children) {
  return alignment_objective(q.q(), batches, tree, include_children);
}

Matrix alignment_gradient(const ConceptBatchSet& batches, const ConceptTree& tree, size_t d,
                          bool include_children) {
  check_batches(batches, tree, d);
  Matrix g(d, d);
  for (int i = 0; i < tree.size(); ++i) {
    const Matrix& batch = batches.per_concept[i];
    double inv_n = 1.0 / static_cast<double>(batch.rows());
    std::vector<double> s = column_sum(batch);

    size_t axis = static_cast<size_t>(tree.axis_of(i));
    for (size_t r = 0; r < d; ++r) g(r, axis) -= inv_n * s[r];

    const std::vector<int>& kids = tree.children(i);
    if (include_children && !kids.empty()) {
      double weight = inv_n / static_cast<double>(kids.size());
      for (int child : kids) {
        size_t child_axis = static_cast<size_t>(tree.axis_of(child));
        for (size_t r = 0; r < d; ++r) g(r, child_axis) -= weight * s[r];
      }
    }
  }
  return g;
}

Matrix cayley_step(const Matrix& q, const Matrix& g, double eta) {
  if (q.rows() != q.cols() || !q.same_shape(g)) throw ValidationError("cayley_step: shape mismatch");
  size_t d = q.rows();

  Matrix a = subtract(multiply(g, transpose(q)), multiply(q, transpose(g)));
  Matrix lhs = Matrix::identity(d);
  Matrix rhs_mat = Matrix::identity(d);
  double half = 0.5 * eta;
  for (size_t i = 0; i < d; ++i)
    for (size_t j = 0; j < d; ++j) {
      lhs(i, j) += half * a(i, j);
      rhs_mat(i, j) -= half * a(i, j);
    }
  return solve_linear(lhs, multiply(rhs_mat, q));
}

CurvilinearResult curvilinear_update(const RotationMatrix& q, const ConceptBatchSet& batches,
                                     const ConceptTree& tree, double eta0, double shrink, int max_backtracks,
                                     bool include_children) {
  size_t d = q.dim();
  Matrix g = alignment_gradient(batches, tree, d, include_children);
  Matrix a = subtract(multiply(g, transpose(q.q())), multiply(q.q(), transpose(g)));
  double a_norm2 = frobenius_norm(a);
  a_norm2 *= a_norm2;

  CurvilinearResult res;
  res.q = q.q();
  res.objective_before = alignment_objective(q, batches, tree, include_children);
  res.objective_after = res.objective_before;
  if (a_norm2 == 0.0) return res;

  const double c1 = 1e-4;
  double eta = eta0;
  for (int k = 0; k < max_backtracks; ++k, eta *= shrink) {
    Matrix candidate;
    try {
      candidate = cayley_step(q.q(), g, eta);
    } catch (const NumericError&) {
      continue;  // singular (I + eta/2 A); shrink and retry
    }
    if (orthogonality_residual(candidate) > 1e-8) continue;
    RotationMatrix rq(candidate);
    double f = alignment_objective(rq, batches, tree, include_children);
    if (f >= res.objective_before + c1 * eta * a_norm2 / 2.0) {
      res.q = candidate;
      res.eta_used = eta;
      res.objective_after = f;
      res.objective_delta = f - res.objective_before;
      return res;
    }
  }
  return res;
}

}  // namespace hastcw
