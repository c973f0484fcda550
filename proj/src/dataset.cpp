#include "hastcw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hastcw/errors.hpp"
#include "hastcw/rng.hpp"

namespace hastcw {

const char* split_tag_name(SplitTag tag) {
  switch (tag) {
    case SplitTag::train: return "train";
    case SplitTag::val: return "val";
    case SplitTag::test: return "test";
    case SplitTag::concept_pool: return "concept";
  }
  throw ValidationError("invalid split tag");
}

SplitTag split_tag_from_name(const std::string& name) {
  if (name == "train") return SplitTag::train;
  if (name == "val") return SplitTag::val;
  if (name == "test") return SplitTag::test;
  if (name == "concept") return SplitTag::concept_pool;
  throw FormatError("unknown split tag '" + name + "'");
}

std::string default_tree_text() {
  return "# synthetic shape hierarchy: family / fill pattern / size band\n"
         "ellipse,-\n"
         "polygon,-\n"
         "ellipse_solid,ellipse\n"
         "ellipse_striped,ellipse\n"
         "polygon_solid,polygon\n"
         "polygon_striped,polygon\n"
         "polygon_ring,polygon\n"
         "ellipse_solid_small,ellipse_solid\n"
         "ellipse_solid_large,ellipse_solid\n"
         "ellipse_striped_small,ellipse_striped\n"
         "polygon_solid_small,polygon_solid\n"
         "polygon_solid_medium,polygon_solid\n"
         "polygon_solid_large,polygon_solid\n"
         "polygon_striped_small,polygon_striped\n"
         "polygon_striped_large,polygon_striped\n"
         "polygon_ring_small,polygon_ring\n";
}

std::vector<size_t> Dataset::indices_with_tag(SplitTag tag) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < split.size(); ++i)
    if (split[i] == tag) out.push_back(i);
  return out;
}

namespace {

struct LeafStyle {
  int family = 0;  // 0 ellipse, 1 polygon (diamond)
  int fill = 0;    // 0 solid, 1 striped, 2 ring
  int band = 0;    // size/orientation band
};

// Style attributes follow the tree position: root ancestor -> shape family,
// depth-2 ancestor -> fill pattern, leaf position among brothers -> band.
LeafStyle leaf_style(const ConceptTree& tree, int leaf) {
  std::vector<int> path;  // leaf upward to root
  int cur = leaf;
  path.push_back(cur);
  while (auto p = tree.parent(cur)) {
    cur = *p;
    path.push_back(cur);
  }
  std::reverse(path.begin(), path.end());  // root ... leaf

  auto sibling_index = [&](int node) {
    auto p = tree.parent(node);
    const std::vector<int> sibs = p ? tree.children(*p) : tree.roots();
    for (size_t i = 0; i < sibs.size(); ++i)
      if (sibs[i] == node) return static_cast<int>(i);
    return 0;
  };

  LeafStyle st;
  st.family = sibling_index(path[0]) % 2;
  st.fill = path.size() > 1 ? sibling_index(path[1]) % 3 : 0;
  st.band = sibling_index(path.back()) % 3;
  return st;
}

void render_image(Tensor& images, size_t idx, const LeafStyle& st, size_t s, double noise_sigma,
                  SeededRng rng) {
  double half = static_cast<double>(s) / 2.0;
  double jitter = static_cast<double>(s) / 16.0;
  double cx = half + rng.uniform(-jitter, jitter);
  double cy = half + rng.uniform(-jitter, jitter);
  double radius = (0.35 + 0.15 * st.band) * half;
  double theta = st.band * (M_PI / 6.0);
  double cos_t = std::cos(theta), sin_t = std::sin(theta);

  const double background = 0.08;
  for (size_t py = 0; py < s; ++py)
    for (size_t px = 0; px < s; ++px) {
      double x = static_cast<double>(px) + 0.5 - cx;
      double y = static_cast<double>(py) + 0.5 - cy;
      double u = cos_t * x + sin_t * y;
      double v = -sin_t * x + cos_t * y;

      // g <= 1 is inside; g also serves as the normalized boundary distance
      double g;
      if (st.family == 0)
        g = (u * u) / (radius * radius) + (v * v) / (0.6 * radius * 0.6 * radius);
      else
        g = std::fabs(u) / radius + std::fabs(v) / (0.7 * radius);

      double value = background;
      if (g <= 1.0) {
        switch (st.fill) {
          case 0: value = 0.85; break;
          case 1: {
            double stripe_w = radius / 2.5;
            long band = static_cast<long>(std::floor((u + 8.0 * radius) / stripe_w));
            value = (band % 2 == 0) ? 0.85 : 0.25;
            break;
          }
          default: value = (g >= (st.family == 0 ? 0.45 : 0.55)) ? 0.85 : 0.15; break;
        }
      }
      if (noise_sigma > 0.0) value += noise_sigma * rng.normal();
      images.at4(idx, 0, py, px) = std::clamp(value, 0.0, 1.0);
    }
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  if (spec.per_leaf < 10) throw ValidationError("generate_dataset: per_leaf must be >= 10");
  if (spec.image_size < 16) throw ValidationError("generate_dataset: image_size must be >= 16");

  Dataset ds{ConceptTree::parse(spec.tree_text.empty() ? default_tree_text() : spec.tree_text),
             Tensor(),
             {},
             {}};
  std::vector<int> leaves = ds.tree.leaves();
  if (leaves.empty()) throw ValidationError("generate_dataset: tree has no leaves");

  size_t n = leaves.size() * spec.per_leaf;
  ds.images = Tensor({n, 1, spec.image_size, spec.image_size});
  ds.labels.resize(n);
  ds.split.assign(n, SplitTag::train);

  SeededRng root_rng(spec.seed);
  size_t idx = 0;
  for (int leaf : leaves) {
    LeafStyle st = leaf_style(ds.tree, leaf);
    for (size_t k = 0; k < spec.per_leaf; ++k, ++idx) {
      ds.labels[idx] = leaf;
      render_image(ds.images, idx, st, spec.image_size, spec.noise_sigma, root_rng.derive(idx));
    }
  }
  return ds;
}

void split_dataset(Dataset& ds, const std::array<double, 3>& ratios, size_t concept_per_class,
                   uint64_t seed) {
  double total = ratios[0] + ratios[1] + ratios[2];
  if (std::fabs(total - 1.0) > 1e-9) throw ValidationError("split_dataset: ratios must sum to 1");

  SeededRng rng(seed);
  std::vector<int> leaves = ds.tree.leaves();
  for (int leaf : leaves) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < ds.size(); ++i)
      if (ds.labels[i] == leaf) idx.push_back(i);
    rng.shuffle(idx);

    size_t n = idx.size();
    size_t n_val = static_cast<size_t>(std::floor(ratios[1] * static_cast<double>(n)));
    size_t n_test = static_cast<size_t>(std::floor(ratios[2] * static_cast<double>(n)));
    size_t n_train = n - n_val - n_test;  // floor of train ratio plus the remainder
    if (concept_per_class >= n_train)
      throw ValidationError("split_dataset: concept_per_class leaves no training images for class '" +
                            ds.tree.name(leaf) + "'");

    size_t at = 0;
    for (size_t k = 0; k < n_train; ++k) ds.split[idx[at++]] = SplitTag::train;
    for (size_t k = 0; k < n_val; ++k) ds.split[idx[at++]] = SplitTag::val;
    for (size_t k = 0; k < n_test; ++k) ds.split[idx[at++]] = SplitTag::test;
    // concept pool: drawn from the training portion
    for (size_t k = 0; k < concept_per_class; ++k) ds.split[idx[k]] = SplitTag::concept_pool;
  }
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_tensor(dir + "/images.hcwt", to_raw_f32(ds.images));

  RawTensor labels;
  labels.dtype = Dtype::u32;
  labels.dims = {static_cast<uint32_t>(ds.labels.size())};
  labels.u32.assign(ds.labels.begin(), ds.labels.end());
  write_tensor(dir + "/labels.hcwt", labels);

  std::ofstream split_file(dir + "/split.txt");
  if (!split_file) throw IoError("cannot write split file in " + dir);
  for (SplitTag tag : ds.split) split_file << split_tag_name(tag) << '\n';

  std::ofstream tree_file(dir + "/tree.txt");
  if (!tree_file) throw IoError("cannot write tree file in " + dir);
  tree_file << ds.tree.to_text();
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds{ConceptTree::load(dir + "/tree.txt"), Tensor(), {}, {}};

  RawTensor images = read_tensor(dir + "/images.hcwt");
  if (images.dtype != Dtype::f32 || images.dims.size() != 4)
    throw FormatError("images.hcwt must be a 4-d float tensor");
  ds.images = from_raw_f32(images);

  RawTensor labels = read_tensor(dir + "/labels.hcwt");
  if (labels.dtype != Dtype::u32 || labels.dims.size() != 1)
    throw FormatError("labels.hcwt must be a 1-d uint tensor");
  ds.labels.assign(labels.u32.begin(), labels.u32.end());
  if (ds.labels.size() != ds.images.dim(0)) throw FormatError("label count disagrees with image count");
  for (int l : ds.labels)
    if (l < 0 || l >= ds.tree.size()) throw FormatError("label outside the concept tree");

  std::ifstream split_file(dir + "/split.txt");
  if (!split_file) throw IoError("cannot open split file in " + dir);
  std::string line;
  while (std::getline(split_file, line)) {
    if (line.empty()) continue;
    ds.split.push_back(split_tag_from_name(line));
  }
  if (ds.split.size() != ds.labels.size()) throw FormatError("split line count disagrees with sample count");
  return ds;
}

}  // namespace hastcw
