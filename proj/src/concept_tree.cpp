#include "hastcw/concept_tree.hpp"

#include <fstream>
#include <sstream>

#include "hastcw/errors.hpp"

namespace hastcw {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConceptTree ConceptTree::parse(const std::string& text) {
  ConceptTree tree;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t comma = t.find(',');
    if (comma == std::string::npos || t.find(',', comma + 1) != std::string::npos)
      throw ValidationError("tree line " + std::to_string(line_no) + ": expected 'name,parent'");
    std::string name = trim(t.substr(0, comma));
    std::string parent_name = trim(t.substr(comma + 1));
    if (name.empty())
      throw ValidationError("tree line " + std::to_string(line_no) + ": empty concept name");
    if (parent_name.empty())
      throw ValidationError("tree line " + std::to_string(line_no) + ": empty parent field");
    if (tree.by_name_.count(name))
      throw ValidationError("tree line " + std::to_string(line_no) + ": duplicate concept name '" + name + "'");

    int parent_id = -1;
    if (parent_name != "-") {
      auto it = tree.by_name_.find(parent_name);
      if (it == tree.by_name_.end())
        throw ValidationError("tree line " + std::to_string(line_no) + ": unknown parent '" + parent_name +
                              "' (parents must be declared first)");
      parent_id = it->second;
    }

    int id = static_cast<int>(tree.names_.size());
    tree.names_.push_back(name);
    tree.parents_.push_back(parent_id);
    tree.depths_.push_back(parent_id < 0 ? 1 : tree.depths_[parent_id] + 1);
    tree.children_.emplace_back();
    if (parent_id >= 0) tree.children_[parent_id].push_back(id);
    tree.by_name_.emplace(name, id);
  }
  if (tree.names_.empty()) throw ValidationError("tree: no concepts declared");
  return tree;
}

ConceptTree ConceptTree::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open tree file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

void ConceptTree::check_id(int id) const {
  if (id < 0 || id >= size()) throw ValidationError("unknown concept id " + std::to_string(id));
}

const std::string& ConceptTree::name(int id) const {
  check_id(id);
  return names_[id];
}

int ConceptTree::id_of(const std::string& nm) const {
  auto it = by_name_.find(nm);
  if (it == by_name_.end()) throw ValidationError("unknown concept '" + nm + "'");
  return it->second;
}

std::optional<int> ConceptTree::find(const std::string& nm) const {
  auto it = by_name_.find(nm);
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> ConceptTree::parent(int id) const {
  check_id(id);
  if (parents_[id] < 0) return std::nullopt;
  return parents_[id];
}

const std::vector<int>& ConceptTree::children(int id) const {
  check_id(id);
  return children_[id];
}

int ConceptTree::depth(int id) const {
  check_id(id);
  return depths_[id];
}

int ConceptTree::axis_of(int id) const {
  check_id(id);
  return id;
}

int ConceptTree::concept_of(int axis) const {
  check_id(axis);
  return axis;
}

RelationSet ConceptTree::relations(int id) const {
  check_id(id);
  RelationSet rel;
  int p = parents_[id];
  if (p >= 0) rel.parent = p;

  if (p >= 0) {
    for (int sib : children_[p])
      if (sib != id) rel.brothers.insert(sib);
  } else {
    for (int i = 0; i < size(); ++i)
      if (parents_[i] < 0 && i != id) rel.brothers.insert(i);
  }
  for (int c : children_[id]) rel.children.insert(c);

  if (p >= 0) {
    RelationSet parent_rel = relations(p);
    for (int uncle : parent_rel.brothers)
      for (int cz : children_[uncle]) rel.cousins.insert(cz);
  }

  std::vector<int> stack(children_[id].begin(), children_[id].end());
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    rel.descendants.insert(cur);
    for (int c : children_[cur]) stack.push_back(c);
  }
  return rel;
}

std::vector<int> ConceptTree::roots() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (parents_[i] < 0) out.push_back(i);
  return out;
}

std::vector<int> ConceptTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (children_[i].empty()) out.push_back(i);
  return out;
}

std::vector<size_t> ConceptTree::concept_samples(int c, const std::vector<int>& labels) const {
  check_id(c);
  RelationSet rel = relations(c);
  std::vector<size_t> out;
  for (size_t i = 0; i < labels.size(); ++i) {
    int l = labels[i];
    if (l == c || rel.descendants.count(l)) out.push_back(i);
  }
  return out;
}

std::string ConceptTree::to_text() const {
  std::ostringstream out;
  for (int i = 0; i < size(); ++i)
    out << names_[i] << ',' << (parents_[i] < 0 ? std::string("-") : names_[parents_[i]]) << '\n';
  return out.str();
}

}  // namespace hastcw
