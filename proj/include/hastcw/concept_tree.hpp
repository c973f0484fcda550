#pragma once

#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace hastcw {

// One node per line: "name,parent_name"; roots use "-"; '#' starts a comment.
// Parents must be declared before children. Concept ordinals and latent axes
// are both assigned in file order, so axis_of(id) == id.
struct RelationSet {
  std::optional<int> parent;
  std::set<int> children;
  std::set<int> brothers;     // same parent, excluding self; for roots: the other roots
  std::set<int> cousins;      // children of the parent's brothers
  std::set<int> descendants;  // transitive closure of children, excluding self
};

class ConceptTree {
public:
  static ConceptTree parse(const std::string& text);
  static ConceptTree load(const std::string& path);

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const;
  int id_of(const std::string& name) const;  // throws ValidationError if unknown
  std::optional<int> find(const std::string& name) const;
  std::optional<int> parent(int id) const;
  const std::vector<int>& children(int id) const;
  int depth(int id) const;  // roots have depth 1

  int axis_of(int id) const;
  int concept_of(int axis) const;

  RelationSet relations(int id) const;

  std::vector<int> roots() const;
  std::vector<int> leaves() const;  // nodes without children, in file order

  // Indices of samples labeled c or a descendant of c.
  std::vector<size_t> concept_samples(int c, const std::vector<int>& labels) const;

  std::string to_text() const;

private:
  void check_id(int id) const;

  std::vector<std::string> names_;
  std::vector<int> parents_;  // -1 for roots
  std::vector<int> depths_;
  std::vector<std::vector<int>> children_;
  std::unordered_map<std::string, int> by_name_;
};

}  // namespace hastcw
