#include "hastcw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "hastcw/errors.hpp"

namespace hastcw {

namespace {

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[40];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

std::vector<ActivationRecord> top_k_activations(const Checkpoint& cp, const Dataset& ds,
                                                const std::string& concept_name, size_t k) {
  if (k < 1) throw ValidationError("top_k_activations: k must be >= 1");
  int concept_id = cp.tree.id_of(concept_name);
  size_t axis = static_cast<size_t>(cp.tree.axis_of(concept_id));

  std::vector<size_t> test_idx = ds.indices_with_tag(SplitTag::test);
  if (test_idx.empty()) throw ValidationError("top_k_activations: empty test split");
  Matrix reduced = reduced_activations(cp, ds, test_idx);

  std::vector<size_t> order(test_idx.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (reduced(a, axis) != reduced(b, axis)) return reduced(a, axis) > reduced(b, axis);
    return test_idx[a] < test_idx[b];
  });

  size_t take = std::min(k, order.size());
  std::vector<ActivationRecord> out;
  out.reserve(take);
  for (size_t r = 0; r < take; ++r) {
    ActivationRecord rec;
    rec.rank = r + 1;
    rec.sample_index = test_idx[order[r]];
    rec.label_name = ds.tree.name(ds.labels[rec.sample_index]);
    rec.activation = reduced(order[r], axis);
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<ProjectionRow> concept_pair_projection(const Checkpoint& cp, const Dataset& ds,
                                                   const std::string& concept_x,
                                                   const std::string& concept_y) {
  size_t axis_x = static_cast<size_t>(cp.tree.axis_of(cp.tree.id_of(concept_x)));
  size_t axis_y = static_cast<size_t>(cp.tree.axis_of(cp.tree.id_of(concept_y)));

  std::vector<size_t> test_idx = ds.indices_with_tag(SplitTag::test);
  if (test_idx.empty()) throw ValidationError("concept_pair_projection: empty test split");
  Matrix reduced = reduced_activations(cp, ds, test_idx);

  std::vector<ProjectionRow> rows;
  rows.reserve(test_idx.size());
  for (size_t i = 0; i < test_idx.size(); ++i) {
    ProjectionRow row;
    row.sample_index = test_idx[i];
    row.label_name = ds.tree.name(ds.labels[test_idx[i]]);
    row.activation_x = reduced(i, axis_x);
    row.activation_y = reduced(i, axis_y);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string projection_to_csv(const std::vector<ProjectionRow>& rows) {
  std::ostringstream out;
  out << "sample_index,label_name,activation_x,activation_y\n";
  for (const ProjectionRow& r : rows)
    out << r.sample_index << ',' << r.label_name << ',' << fmt(r.activation_x) << ','
        << fmt(r.activation_y) << '\n';
  return out.str();
}

std::vector<ActivationTreeEntry> activation_tree(const Checkpoint& cp, const Dataset& ds,
                                                 size_t sample_index) {
  if (sample_index >= ds.size()) throw ValidationError("activation_tree: sample index out of range");
  Matrix reduced = reduced_activations(cp, ds, {sample_index});

  int n = cp.tree.size();
  double lo = reduced(0, static_cast<size_t>(cp.tree.axis_of(0)));
  double hi = lo;
  for (int c = 1; c < n; ++c) {
    double v = reduced(0, static_cast<size_t>(cp.tree.axis_of(c)));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  double range = hi - lo;

  std::vector<ActivationTreeEntry> out(static_cast<size_t>(n));
  for (int c = 0; c < n; ++c) {
    out[static_cast<size_t>(c)].concept_id = c;
    double v = reduced(0, static_cast<size_t>(cp.tree.axis_of(c)));
    // degenerate range: all values defined as 0
    out[static_cast<size_t>(c)].normalized = range > 0.0 ? (v - lo) / range : 0.0;
  }
  return out;
}

std::string activation_tree_text(const ConceptTree& tree,
                                 const std::vector<ActivationTreeEntry>& entries) {
  std::vector<double> value(entries.size(), 0.0);
  for (const ActivationTreeEntry& e : entries) value[static_cast<size_t>(e.concept_id)] = e.normalized;

  std::ostringstream out;
  // depth-first in declaration order
  std::vector<int> stack = tree.roots();
  std::reverse(stack.begin(), stack.end());
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    for (int i = 1; i < tree.depth(id); ++i) out << "  ";
    out << tree.name(id) << ": " << fmt(value[static_cast<size_t>(id)], "%.3f") << '\n';
    const std::vector<int>& kids = tree.children(id);
    for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
  }
  return out.str();
}

}  // namespace hastcw
