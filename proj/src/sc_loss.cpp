#include "hastcw/sc_loss.hpp"

#include <cmath>
#include <map>

#include "hastcw/errors.hpp"

namespace hastcw {

namespace {

double row_distance(const Matrix& a, size_t i, const Matrix& b, size_t j) {
  double s = 0.0;
  for (size_t c = 0; c < a.cols(); ++c) {
    double diff = a(i, c) - b(j, c);
    s += diff * diff;
  }
  return std::sqrt(s);
}

// Adds scale * (a_row - b_row) / dist to grad row g_i (no-op when dist == 0).
void add_distance_grad(Matrix& grad, size_t g_i, const Matrix& a, size_t i, const Matrix& b, size_t j,
                       double dist, double scale) {
  if (dist <= 0.0) return;
  double f = scale / dist;
  for (size_t c = 0; c < grad.cols(); ++c) grad(g_i, c) += f * (a(i, c) - b(j, c));
}

Matrix take_rows(const Matrix& m, const std::vector<size_t>& rows) {
  Matrix out(rows.size(), m.cols());
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < m.cols(); ++c) out(r, c) = m(rows[r], c);
  return out;
}

void scatter_rows(Matrix& dst, const std::vector<size_t>& rows, const Matrix& src, double weight) {
  for (size_t r = 0; r < rows.size(); ++r)
    for (size_t c = 0; c < dst.cols(); ++c) dst(rows[r], c) += weight * src(r, c);
}

}  // namespace

double pair_distance(const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != v.size()) throw ValidationError("pair_distance: length mismatch");
  double s = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    double diff = u[i] - v[i];
    s += diff * diff;
  }
  return std::sqrt(s);
}

PairLossResult brother_loss(const Matrix& anchors, const Matrix& brothers, double margin_brother) {
  if (anchors.rows() == 0 || brothers.rows() == 0) throw ValidationError("brother_loss: empty batch");
  if (anchors.cols() != brothers.cols()) throw ValidationError("brother_loss: vector length mismatch");

  PairLossResult res;
  res.grad_anchor = Matrix(anchors.rows(), anchors.cols());
  res.grad_brother = Matrix(brothers.rows(), brothers.cols());
  for (size_t j = 0; j < anchors.rows(); ++j)
    for (size_t k = 0; k < brothers.rows(); ++k) {
      double dist = row_distance(anchors, j, brothers, k);
      double hinge = margin_brother - dist;
      if (hinge <= 0.0) continue;
      res.value += hinge;
      // d(hinge)/da = -(a-b)/dist
      add_distance_grad(res.grad_anchor, j, anchors, j, brothers, k, dist, -1.0);
      add_distance_grad(res.grad_brother, k, brothers, k, anchors, j, dist, -1.0);
    }
  return res;
}

TripletLossResult cousin_triplet_loss(const Matrix& anchors, const Matrix& brothers, const Matrix& cousins,
                                      double margin_cousin) {
  if (anchors.rows() == 0 || brothers.rows() == 0 || cousins.rows() == 0)
    throw ValidationError("cousin_triplet_loss: empty batch");
  if (anchors.cols() != brothers.cols() || anchors.cols() != cousins.cols())
    throw ValidationError("cousin_triplet_loss: vector length mismatch");

  TripletLossResult res;
  res.grad_anchor = Matrix(anchors.rows(), anchors.cols());
  res.grad_brother = Matrix(brothers.rows(), brothers.cols());
  res.grad_cousin = Matrix(cousins.rows(), cousins.cols());
  for (size_t j = 0; j < anchors.rows(); ++j)
    for (size_t k = 0; k < brothers.rows(); ++k) {
      double d_ab = row_distance(anchors, j, brothers, k);
      for (size_t l = 0; l < cousins.rows(); ++l) {
        double d_ac = row_distance(anchors, j, cousins, l);
        double hinge = d_ab - d_ac + margin_cousin;
        if (hinge <= 0.0) continue;
        res.value += hinge;
        add_distance_grad(res.grad_anchor, j, anchors, j, brothers, k, d_ab, 1.0);
        add_distance_grad(res.grad_anchor, j, anchors, j, cousins, l, d_ac, -1.0);
        add_distance_grad(res.grad_brother, k, brothers, k, anchors, j, d_ab, 1.0);
        add_distance_grad(res.grad_cousin, l, cousins, l, anchors, j, d_ac, -1.0);
      }
    }
  return res;
}

SCLossResult sc_loss(const Matrix& reduced_batch, const std::vector<int>& labels, const ConceptTree& tree,
                     const SCLossConfig& cfg) {
  if (labels.size() != reduced_batch.rows()) throw ValidationError("sc_loss: one label per row required");

  SCLossResult res;
  res.grad = Matrix(reduced_batch.rows(), reduced_batch.cols());
  if (cfg.alpha == 0.0 && cfg.beta == 0.0) return res;

  std::map<int, std::vector<size_t>> by_concept;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= tree.size()) throw ValidationError("sc_loss: label outside tree");
    by_concept[labels[i]].push_back(i);
  }

  for (const auto& [concept_id, rows] : by_concept) {
    RelationSet rel = tree.relations(concept_id);
    std::vector<size_t> anchor_rows = rows;
    if (anchor_rows.size() > cfg.pairs_per_batch) anchor_rows.resize(cfg.pairs_per_batch);
    Matrix anchors = take_rows(reduced_batch, anchor_rows);

    for (int b : rel.brothers) {
      auto bit = by_concept.find(b);
      if (bit == by_concept.end()) continue;
      Matrix brothers = take_rows(reduced_batch, bit->second);

      if (cfg.alpha > 0.0) {
        PairLossResult lb = brother_loss(anchors, brothers, cfg.margin_brother);
        res.value += cfg.alpha * lb.value;
        scatter_rows(res.grad, anchor_rows, lb.grad_anchor, cfg.alpha);
        scatter_rows(res.grad, bit->second, lb.grad_brother, cfg.alpha);
      }

      if (cfg.beta > 0.0) {
        for (int c : rel.cousins) {
          auto cit = by_concept.find(c);
          if (cit == by_concept.end()) continue;
          Matrix cousins = take_rows(reduced_batch, cit->second);
          TripletLossResult lc = cousin_triplet_loss(anchors, brothers, cousins, cfg.margin_cousin);
          res.value += cfg.beta * lc.value;
          scatter_rows(res.grad, anchor_rows, lc.grad_anchor, cfg.beta);
          scatter_rows(res.grad, bit->second, lc.grad_brother, cfg.beta);
          scatter_rows(res.grad, cit->second, lc.grad_cousin, cfg.beta);
        }
      }
    }
  }
  return res;
}

}  // namespace hastcw
