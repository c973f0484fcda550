#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include "hastcw/analysis.hpp"
#include "hastcw/concept_tree.hpp"
#include "hastcw/dataset.hpp"
#include "hastcw/errors.hpp"
#include "hastcw/hcw_layer.hpp"
#include "hastcw/linalg.hpp"
#include "hastcw/q_optimizer.hpp"
#include "hastcw/sc_loss.hpp"
#include "hastcw/trainer.hpp"

namespace py = pybind11;
using namespace hastcw;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const DArray& a) {
  if (a.ndim() != 2) throw ValidationError("expected a 2-d array");
  Matrix m(static_cast<size_t>(a.shape(0)), static_cast<size_t>(a.shape(1)));
  std::copy_n(a.data(), m.data().size(), m.data().begin());
  return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy_n(m.data().data(), m.data().size(), out.mutable_data());
  return out;
}

Tensor to_tensor4(const DArray& a) {
  if (a.ndim() != 4) throw ValidationError("expected a 4-d array (n, c, h, w)");
  Tensor t({static_cast<size_t>(a.shape(0)), static_cast<size_t>(a.shape(1)),
            static_cast<size_t>(a.shape(2)), static_cast<size_t>(a.shape(3))});
  std::copy_n(a.data(), t.v.size(), t.v.begin());
  return t;
}

py::array_t<double> from_tensor(const Tensor& t) {
  py::array_t<double> out(t.shape);
  std::copy_n(t.v.data(), t.v.size(), out.mutable_data());
  return out;
}

std::vector<double> to_vector(const DArray& a) {
  if (a.ndim() != 1) throw ValidationError("expected a 1-d array");
  return std::vector<double>(a.data(), a.data() + a.shape(0));
}

TrainConfig config_from_kwargs(const py::dict& kwargs) {
  TrainConfig cfg;
  for (auto item : kwargs) {
    std::string key = py::str(item.first);
    std::string value = py::str(item.second);
    cfg.apply(key, value);
  }
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_hastcw, m) {
  m.doc() = "Concept-whitening layer, Cayley rotation optimizer and training loop";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<ConceptTree>(m, "ConceptTree")
      .def_static("parse", &ConceptTree::parse, py::arg("text"))
      .def("__len__", &ConceptTree::size)
      .def("name", &ConceptTree::name, py::arg("id"))
      .def("id_of", &ConceptTree::id_of, py::arg("name"))
      .def("depth", &ConceptTree::depth, py::arg("id"))
      .def("leaves", &ConceptTree::leaves)
      .def("roots", &ConceptTree::roots)
      .def("to_text", &ConceptTree::to_text)
      .def("relations", [](const ConceptTree& t, int id) {
        RelationSet r = t.relations(id);
        py::dict d;
        d["parent"] = r.parent ? py::cast(*r.parent) : py::none();
        d["children"] = std::vector<int>(r.children.begin(), r.children.end());
        d["brothers"] = std::vector<int>(r.brothers.begin(), r.brothers.end());
        d["cousins"] = std::vector<int>(r.cousins.begin(), r.cousins.end());
        d["descendants"] = std::vector<int>(r.descendants.begin(), r.descendants.end());
        return d;
      }, py::arg("id"));

  m.def("default_tree_text", &default_tree_text);

  m.def("sym_eig", [](const DArray& a, double tol) {
    EigResult r = sym_eig(to_matrix(a), tol);
    return py::make_tuple(py::array_t<double>(r.values.size(), r.values.data()), from_matrix(r.vectors));
  }, py::arg("a"), py::arg("tol") = 1e-9);

  m.def("psd_inverse_sqrt", [](const DArray& s, double eps) {
    return from_matrix(psd_inverse_sqrt(to_matrix(s), eps));
  }, py::arg("s"), py::arg("eps") = 1e-5);

  m.def("solve_linear", [](const DArray& a, const DArray& b) {
    return from_matrix(solve_linear(to_matrix(a), to_matrix(b)));
  }, py::arg("a"), py::arg("b"));

  m.def("cayley_step", [](const DArray& q, const DArray& g, double eta) {
    return from_matrix(cayley_step(to_matrix(q), to_matrix(g), eta));
  }, py::arg("q"), py::arg("g"), py::arg("eta"));

  m.def("batch_statistics", [](const DArray& z, double eps) {
    BatchStats s = batch_statistics(to_tensor4(z), eps);
    return py::make_tuple(py::array_t<double>(s.mu.size(), s.mu.data()), from_matrix(s.w));
  }, py::arg("z"), py::arg("eps") = 1e-5);

  m.def("whiten_transform", [](const DArray& z, const DArray& mu, const DArray& w, const DArray& q) {
    return from_tensor(whiten_transform(to_tensor4(z), to_vector(mu), to_matrix(w), to_matrix(q)));
  }, py::arg("z"), py::arg("mu"), py::arg("w"), py::arg("q"));

  m.def("reduce_activation", [](const DArray& features, size_t pool_window) {
    return from_matrix(reduce_activation(to_tensor4(features), pool_window));
  }, py::arg("features"), py::arg("pool_window") = 2);

  m.def("sc_loss", [](const DArray& reduced, const std::vector<int>& labels, const ConceptTree& tree,
                      double alpha, double beta, double margin_brother, double margin_cousin,
                      size_t pairs_per_batch) {
    SCLossConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.margin_brother = margin_brother;
    cfg.margin_cousin = margin_cousin;
    cfg.pairs_per_batch = pairs_per_batch;
    SCLossResult r = sc_loss(to_matrix(reduced), labels, tree, cfg);
    return py::make_tuple(r.value, from_matrix(r.grad));
  }, py::arg("reduced"), py::arg("labels"), py::arg("tree"), py::arg("alpha") = 1.0, py::arg("beta") = 1.0,
     py::arg("margin_brother") = 1.0, py::arg("margin_cousin") = 0.5, py::arg("pairs_per_batch") = 16);

  m.def("alignment_objective", [](const DArray& q, const std::vector<DArray>& batches,
                                  const ConceptTree& tree, bool include_children) {
    ConceptBatchSet set;
    for (const DArray& b : batches) set.per_concept.push_back(to_matrix(b));
    return alignment_objective(RotationMatrix(to_matrix(q)), set, tree, include_children);
  }, py::arg("q"), py::arg("batches"), py::arg("tree"), py::arg("include_children") = true);

  m.def("alignment_gradient", [](const std::vector<DArray>& batches, const ConceptTree& tree, size_t d,
                                 bool include_children) {
    ConceptBatchSet set;
    for (const DArray& b : batches) set.per_concept.push_back(to_matrix(b));
    return from_matrix(alignment_gradient(set, tree, d, include_children));
  }, py::arg("batches"), py::arg("tree"), py::arg("d"), py::arg("include_children") = true);

  m.def("generate_dataset", [](uint64_t seed, size_t per_leaf, size_t image_size, double noise_sigma,
                               const std::string& tree_text) {
    DatasetSpec spec;
    spec.seed = seed;
    spec.per_leaf = per_leaf;
    spec.image_size = image_size;
    spec.noise_sigma = noise_sigma;
    spec.tree_text = tree_text;
    Dataset ds = generate_dataset(spec);
    py::dict out;
    out["images"] = from_tensor(ds.images);
    out["labels"] = py::array_t<int>(ds.labels.size(), ds.labels.data());
    out["tree_text"] = ds.tree.to_text();
    return out;
  }, py::arg("seed") = 1, py::arg("per_leaf") = 60, py::arg("image_size") = 32,
     py::arg("noise_sigma") = 0.02, py::arg("tree_text") = std::string());

  m.def("write_dataset", [](const std::string& dir, uint64_t seed, size_t per_leaf, size_t image_size,
                            double noise_sigma, size_t concept_per_class) {
    DatasetSpec spec;
    spec.seed = seed;
    spec.per_leaf = per_leaf;
    spec.image_size = image_size;
    spec.noise_sigma = noise_sigma;
    Dataset ds = generate_dataset(spec);
    split_dataset(ds, {0.6, 0.2, 0.2}, concept_per_class, seed);
    save_dataset(ds, dir);
    return ds.size();
  }, py::arg("dir"), py::arg("seed") = 1, py::arg("per_leaf") = 60, py::arg("image_size") = 32,
     py::arg("noise_sigma") = 0.02, py::arg("concept_per_class") = 8);

  m.def("train", [](const std::string& data_dir, const std::string& out_dir, const py::kwargs& kwargs) {
    TrainConfig cfg = config_from_kwargs(kwargs);
    TrainReport report = train(cfg, data_dir, out_dir);
    py::dict out;
    out["best_epoch"] = report.best_epoch;
    out["best_val_acc"] = report.best_val_acc;
    std::vector<double> val_acc;
    for (const auto& e : report.epochs) val_acc.push_back(e.val_acc);
    out["val_acc"] = val_acc;
    std::vector<bool> accepted;
    std::vector<double> objective_after;
    for (const auto& t : report.triggers) {
      accepted.push_back(t.accepted);
      objective_after.push_back(t.objective_after);
    }
    out["trigger_accepted"] = accepted;
    out["trigger_objective"] = objective_after;
    return out;
  }, py::arg("data_dir"), py::arg("out_dir"));

  m.def("evaluate", [](const std::string& model_dir, const std::string& data_dir, const std::string& split) {
    SplitTag tag = split == "train"  ? SplitTag::train
                   : split == "val"  ? SplitTag::val
                   : split == "test" ? SplitTag::test
                                     : throw ValidationError("split must be train|val|test");
    EvalMetrics metrics = evaluate(model_dir, data_dir, tag);
    py::dict out;
    out["samples"] = metrics.samples;
    out["accuracy"] = metrics.accuracy;
    out["loss"] = metrics.loss;
    out["mean_brother_distance"] = metrics.mean_brother_distance;
    out["mean_cousin_distance"] = metrics.mean_cousin_distance;
    out["centroid_brother_distance"] = metrics.centroid_brother_distance;
    out["centroid_cousin_distance"] = metrics.centroid_cousin_distance;
    py::dict per_class;
    for (const auto& [name, acc] : metrics.per_class) per_class[py::str(name)] = acc;
    out["per_class"] = per_class;
    return out;
  }, py::arg("model_dir"), py::arg("data_dir"), py::arg("split") = "test");

  m.def("top_k_activations", [](const std::string& model_dir, const std::string& data_dir,
                                const std::string& concept_name, size_t k) {
    Checkpoint cp = Checkpoint::load(model_dir);
    Dataset ds = load_dataset(data_dir);
    auto records = top_k_activations(cp, ds, concept_name, k);
    py::list out;
    for (const auto& r : records) {
      py::dict d;
      d["rank"] = r.rank;
      d["sample_index"] = r.sample_index;
      d["label_name"] = r.label_name;
      d["activation"] = r.activation;
      out.append(d);
    }
    return out;
  }, py::arg("model_dir"), py::arg("data_dir"), py::arg("concept"), py::arg("k") = 5);
}
