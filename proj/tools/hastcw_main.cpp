#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hastcw/analysis.hpp"
#include "hastcw/dataset.hpp"
#include "hastcw/errors.hpp"
#include "hastcw/trainer.hpp"

namespace {

struct GenDataArgs {
  std::string out;
  uint64_t seed = 1;
  size_t per_leaf = 60;
  size_t image_size = 32;
  double noise = 0.02;
  std::string tree_file;
};

struct TrainArgs {
  std::string data;
  std::string config_file;
  std::string out;
  std::string mode;
  int64_t seed = -1;
};

struct EvalArgs {
  std::string model, data, split = "test";
};

struct TopArgs {
  std::string model, data, concept_name;
  size_t k = 5;
};

struct ProjectArgs {
  std::string model, data, cx, cy, out;
};

struct TreeArgs {
  std::string model, data;
  size_t index = 0;
};

int run_gen_data(const GenDataArgs& args) {
  hastcw::DatasetSpec spec;
  spec.seed = args.seed;
  spec.per_leaf = args.per_leaf;
  spec.image_size = args.image_size;
  spec.noise_sigma = args.noise;
  if (!args.tree_file.empty()) {
    std::ifstream f(args.tree_file);
    if (!f) throw hastcw::IoError("cannot open tree file: " + args.tree_file);
    spec.tree_text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  hastcw::Dataset ds = hastcw::generate_dataset(spec);
  // concept pool scaled to the per-class training count
  size_t concept_per_class = std::min<size_t>(8, args.per_leaf * 6 / 10 - 1);
  hastcw::split_dataset(ds, {0.6, 0.2, 0.2}, concept_per_class, spec.seed);
  hastcw::save_dataset(ds, args.out);
  std::cout << "wrote " << ds.size() << " images (" << ds.tree.leaves().size() << " leaf classes, "
            << ds.tree.size() << " concepts) to " << args.out << "\n";
  return 0;
}

int run_train(const TrainArgs& args) {
  hastcw::TrainConfig config;
  if (!args.config_file.empty()) config = hastcw::TrainConfig::load(args.config_file);
  if (!args.mode.empty()) config.mode = hastcw::train_mode_from_name(args.mode);
  if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);

  hastcw::TrainReport report = hastcw::train(config, args.data, args.out);
  std::cout << "epochs=" << report.epochs.size() << " best_epoch=" << report.best_epoch
            << " best_val_acc=" << report.best_val_acc << "\n";
  std::cout << "model written to " << args.out << "\n";
  return 0;
}

int run_eval(const EvalArgs& args) {
  hastcw::SplitTag tag;
  if (args.split == "train") tag = hastcw::SplitTag::train;
  else if (args.split == "val") tag = hastcw::SplitTag::val;
  else if (args.split == "test") tag = hastcw::SplitTag::test;
  else throw hastcw::ValidationError("--split must be train|val|test");

  hastcw::EvalMetrics metrics = hastcw::evaluate(args.model, args.data, tag);
  std::cout << "split=" << args.split << "\n" << metrics.to_text();
  return 0;
}

int run_top(const TopArgs& args) {
  hastcw::Checkpoint cp = hastcw::Checkpoint::load(args.model);
  hastcw::Dataset ds = hastcw::load_dataset(args.data);
  auto records = hastcw::top_k_activations(cp, ds, args.concept_name, args.k);
  std::cout << "rank,sample_index,label_name,activation\n";
  for (const auto& r : records) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", r.activation);
    std::cout << r.rank << ',' << r.sample_index << ',' << r.label_name << ',' << buf << "\n";
  }
  return 0;
}

int run_project(const ProjectArgs& args) {
  hastcw::Checkpoint cp = hastcw::Checkpoint::load(args.model);
  hastcw::Dataset ds = hastcw::load_dataset(args.data);
  auto rows = hastcw::concept_pair_projection(cp, ds, args.cx, args.cy);
  std::ofstream out(args.out);
  if (!out) throw hastcw::IoError("cannot open output file: " + args.out);
  out << hastcw::projection_to_csv(rows);
  std::cout << "wrote " << rows.size() << " rows to " << args.out << "\n";
  return 0;
}

int run_tree(const TreeArgs& args) {
  hastcw::Checkpoint cp = hastcw::Checkpoint::load(args.model);
  hastcw::Dataset ds = hastcw::load_dataset(args.data);
  auto entries = hastcw::activation_tree(cp, ds, args.index);
  std::cout << "sample " << args.index << " (label " << ds.tree.name(ds.labels[args.index]) << ")\n";
  std::cout << hastcw::activation_tree_text(cp.tree, entries);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical concept-whitening trainer and analysis tool"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic hierarchical shape dataset");
  gen_cmd->add_option("--out", gen.out, "Output dataset directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--per-leaf", gen.per_leaf, "Images per leaf class");
  gen_cmd->add_option("--image-size", gen.image_size, "Square image size in pixels");
  gen_cmd->add_option("--noise", gen.noise, "Additive pixel noise sigma");
  gen_cmd->add_option("--tree", gen.tree_file, "Concept tree file (default: built-in hierarchy)");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a model with the alternating two-stage scheme");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--config", tr.config_file, "Config file (key = value lines)");
  train_cmd->add_option("--out", tr.out, "Output model directory")->required();
  train_cmd->add_option("--mode", tr.mode, "plain_cw|hastcw|hastcw_sc (overrides config)");
  train_cmd->add_option("--seed", tr.seed, "Seed (overrides config)");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a trained model on a split");
  eval_cmd->add_option("--model", ev.model, "Model directory")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", ev.split, "train|val|test");

  TopArgs top;
  auto* top_cmd = app.add_subcommand("top-activations", "Top-k test images for a concept axis");
  top_cmd->add_option("--model", top.model, "Model directory")->required();
  top_cmd->add_option("--data", top.data, "Dataset directory")->required();
  top_cmd->add_option("--concept", top.concept_name, "Concept name")->required();
  top_cmd->add_option("--k", top.k, "Number of images");

  ProjectArgs proj;
  auto* proj_cmd = app.add_subcommand("project", "Project the test split onto two concept axes (CSV)");
  proj_cmd->add_option("--model", proj.model, "Model directory")->required();
  proj_cmd->add_option("--data", proj.data, "Dataset directory")->required();
  proj_cmd->add_option("--cx", proj.cx, "Concept for the x axis")->required();
  proj_cmd->add_option("--cy", proj.cy, "Concept for the y axis")->required();
  proj_cmd->add_option("--out", proj.out, "Output CSV file")->required();

  TreeArgs tree;
  auto* tree_cmd = app.add_subcommand("activation-tree", "Per-concept activations of one sample");
  tree_cmd->add_option("--model", tree.model, "Model directory")->required();
  tree_cmd->add_option("--data", tree.data, "Dataset directory")->required();
  tree_cmd->add_option("--index", tree.index, "Sample index")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen_data(gen);
    if (train_cmd->parsed()) return run_train(tr);
    if (eval_cmd->parsed()) return run_eval(ev);
    if (top_cmd->parsed()) return run_top(top);
    if (proj_cmd->parsed()) return run_project(proj);
    if (tree_cmd->parsed()) return run_tree(tree);
  } catch (const hastcw::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const hastcw::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const hastcw::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const hastcw::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 4;
  } catch (const hastcw::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
