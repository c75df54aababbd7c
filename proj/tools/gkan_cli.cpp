// gkan: command-line driver for cohort generation, graph construction,
// training, cross-validation, evaluation and interpretability reports.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gkan/errors.hpp"
#include "gkan/interpret.hpp"
#include "gkan/io.hpp"
#include "gkan/synth.hpp"
#include "gkan/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Manifest {
  std::string command_line;
  std::string subcommand;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& out_dir) const {
    json in = json::array();
    for (const auto& p : inputs)
      in.push_back({{"path", p.string()}, {"sha256", gkan::io::sha256_hex(gkan::io::read_file(p))}});
    json out = json::array();
    for (const auto& p : outputs)
      out.push_back({{"path", p.lexically_relative(out_dir).string()},
                     {"sha256", gkan::io::sha256_hex(gkan::io::read_file(p))}});
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    char stamp[32];
    const std::time_t now = std::time(nullptr);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const json doc = {{"command_line", command_line},
                      {"subcommand", subcommand},
                      {"config", config},
                      {"seed", seed},
                      {"inputs", in},
                      {"outputs", out},
                      {"timings", {{"wall_seconds", wall}, {"finished_at", stamp}}}};
    gkan::io::write_file(out_dir / "manifest.json", doc.dump(2) + "\n");
  }
};

std::vector<std::size_t> parse_index_list(const std::string& text, const std::string& flag) {
  std::vector<std::size_t> out;
  if (text.empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw gkan::ConfigError(flag + ": '" + item + "' is not a ROI index");
    }
  }
  return out;
}

// "0-9:0.9;20-24:0.5"
std::vector<gkan::CorrelationBlock> parse_blocks(const std::string& text) {
  std::vector<gkan::CorrelationBlock> blocks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    const auto dash = item.find('-');
    if (colon == std::string::npos || dash == std::string::npos || dash > colon) {
      throw gkan::ConfigError("--blocks: '" + item + "' should look like FIRST-LAST:RHO");
    }
    try {
      const std::size_t first = std::stoul(item.substr(0, dash));
      const std::size_t last = std::stoul(item.substr(dash + 1, colon - dash - 1));
      gkan::CorrelationBlock b;
      b.rho = std::stod(item.substr(colon + 1));
      for (std::size_t r = first; r <= last; ++r) b.rois.push_back(r);
      blocks.push_back(std::move(b));
    } catch (const std::logic_error&) {
      throw gkan::ConfigError("--blocks: cannot parse '" + item + "'");
    }
  }
  return blocks;
}

std::vector<std::string> read_names(const fs::path& path) {
  std::vector<std::string> names;
  std::stringstream ss(gkan::io::read_file(path));
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

struct TrainFlags {
  std::string model = "gcn-kan";
  std::string task = "CN:AD";
  gkan::TrainConfig config;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--model", f.model, "gcn or gcn-kan")->check(CLI::IsMember({"gcn", "gcn-kan"}));
  cmd->add_option("--task", f.task, "NEGATIVE:POSITIVE group labels");
  cmd->add_option("--tau", f.config.tau, "correlation threshold");
  cmd->add_option("--grid-size", f.config.grid_size, "KAN grid size");
  cmd->add_option("--lr", f.config.lr, "initial learning rate");
  cmd->add_option("--weight-decay", f.config.weight_decay, "L2 weight decay");
  cmd->add_option("--dropout", f.config.dropout, "dropout rate after each KAN/dense layer");
  cmd->add_option("--batch-size", f.config.batch_size, "subjects per batch");
  cmd->add_option("--folds", f.config.folds, "cross-validation folds");
  cmd->add_option("--seed", f.config.seed, "random seed");
  cmd->add_option("--epochs-max", f.config.epochs_max, "epoch cap");
  cmd->add_option("--early-stop-patience", f.config.early_stop_patience, "epochs without improvement");
  cmd->add_option("--scheduler-patience", f.config.scheduler_patience, "plateau epochs before lr drop");
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) s += (i ? " " : "") + std::string(argv[i]);
  return s;
}

void write_output(Manifest& m, const fs::path& path, const std::string& contents) {
  gkan::io::write_file(path, contents);
  m.outputs.push_back(path);
}

void check_compatible(const gkan::io::Checkpoint& ck, const gkan::CohortTable& cohort) {
  if (ck.roi_names.size() != cohort.roi_count()) {
    throw gkan::CompatibilityError(
        "checkpoint graph is " + gkan::shape_str(ck.graph.node_count(), ck.graph.node_count()) +
        " but cohort features are " +
        gkan::shape_str(cohort.subject_count(), cohort.roi_count()));
  }
  if (ck.roi_names != cohort.roi_names) {
    throw gkan::CompatibilityError("checkpoint ROI names differ from cohort ROI names");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCN-KAN graph classification on ROI cohorts"};
  app.require_subcommand(1);
  Manifest manifest;
  manifest.command_line = command_line(argc, argv);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic cohort file");
  fs::path gen_out;
  std::size_t n_cn = 43, n_mci = 46, n_ad = 45;
  gkan::SynthSpec spec;
  std::string signal_rois = "7,12,30", nonlinearity = "none", blocks_text, roi_names_file;
  std::size_t block_width = 10;
  double block_rho = 0.4, global_rho = 0.2;
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  gen->add_option("--n-cn", n_cn, "control subjects (no signal)");
  gen->add_option("--n-mci", n_mci, "intermediate subjects (half signal)");
  gen->add_option("--n-ad", n_ad, "case subjects (full signal)");
  gen->add_option("--n-roi", spec.n_roi, "ROIs per subject");
  gen->add_option("--signal-rois", signal_rois, "comma-separated ROI indices carrying signal");
  gen->add_option("--signal-strength", spec.signal_strength, "signal magnitude");
  gen->add_option("--nonlinearity", nonlinearity, "none, quadratic or sine")
      ->check(CLI::IsMember({"none", "quadratic", "sine"}));
  gen->add_option("--noise-sd", spec.noise_sd, "feature noise standard deviation");
  gen->add_option("--block-width", block_width, "width of contiguous correlated ROI blocks");
  gen->add_option("--block-rho", block_rho, "within-block correlation");
  gen->add_option("--global-rho", global_rho, "correlation contributed by a factor shared by all ROIs");
  gen->add_option("--blocks", blocks_text, "explicit blocks FIRST-LAST:RHO;... (overrides width/rho)");
  gen->add_option("--seed", spec.seed, "random seed");
  gen->add_option("--roi-names", roi_names_file, "file with one ROI name per line");

  // build-graph
  auto* graph_cmd = app.add_subcommand("build-graph", "build and export the ROI adjacency");
  fs::path graph_cohort, graph_out;
  std::string graph_task = "CN:AD";
  double graph_tau = 0.1;
  graph_cmd->add_option("--cohort", graph_cohort, "cohort CSV")->required();
  graph_cmd->add_option("--task", graph_task, "NEGATIVE:POSITIVE group labels");
  graph_cmd->add_option("--tau", graph_tau, "correlation threshold");
  graph_cmd->add_option("--out-dir", graph_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "train one model, holding out stratified fold 0");
  fs::path train_cohort, train_out;
  TrainFlags train_flags;
  train->add_option("--cohort", train_cohort, "cohort CSV")->required();
  train->add_option("--out-dir", train_out, "output directory")->required();
  add_train_flags(train, train_flags);

  // cv
  auto* cv = app.add_subcommand("cv", "stratified k-fold cross-validation");
  fs::path cv_cohort, cv_out;
  TrainFlags cv_flags;
  cv->add_option("--cohort", cv_cohort, "cohort CSV")->required();
  cv->add_option("--out-dir", cv_out, "output directory")->required();
  add_train_flags(cv, cv_flags);

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "score a cohort with a checkpoint");
  fs::path eval_ckpt, eval_cohort, eval_out;
  std::string eval_task;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint JSON")->required();
  eval->add_option("--cohort", eval_cohort, "cohort CSV")->required();
  eval->add_option("--task", eval_task, "override the checkpoint's task");
  eval->add_option("--out-dir", eval_out, "output directory")->required();

  // interpret
  auto* interp = app.add_subcommand("interpret", "ROI saliency and KAN unit importance");
  fs::path interp_ckpt, interp_cohort, interp_out;
  std::string interp_task;
  interp->add_option("--checkpoint", interp_ckpt, "checkpoint JSON")->required();
  interp->add_option("--cohort", interp_cohort, "cohort CSV")->required();
  interp->add_option("--task", interp_task, "override the checkpoint's task");
  interp->add_option("--out-dir", interp_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      manifest.subcommand = "gen-data";
      spec.signal_rois = parse_index_list(signal_rois, "--signal-rois");
      spec.nonlinearity = gkan::parse_nonlinearity(nonlinearity);
      spec.correlation_blocks = blocks_text.empty()
                                    ? gkan::default_blocks(spec.n_roi, block_width, block_rho, global_rho)
                                    : parse_blocks(blocks_text);
      if (!roi_names_file.empty()) {
        spec.roi_names = read_names(roi_names_file);
        manifest.inputs.push_back(roi_names_file);
      }
      const auto cohort = gkan::generate_groups(
          spec, {{"CN", n_cn, 0.0}, {"MCI", n_mci, 0.5}, {"AD", n_ad, 1.0}});
      write_output(manifest, gen_out / "cohort.csv", gkan::io::cohort_to_csv(cohort));
      manifest.seed = spec.seed;
      manifest.config = {{"n_cn", n_cn},
                         {"n_mci", n_mci},
                         {"n_ad", n_ad},
                         {"n_roi", spec.n_roi},
                         {"signal_rois", spec.signal_rois},
                         {"signal_strength", spec.signal_strength},
                         {"nonlinearity", nonlinearity},
                         {"noise_sd", spec.noise_sd},
                         {"blocks", blocks_text},
                         {"block_width", block_width},
                         {"block_rho", block_rho},
                         {"global_rho", global_rho}};
      manifest.write(gen_out);
      return 0;
    }

    if (graph_cmd->parsed()) {
      manifest.subcommand = "build-graph";
      manifest.inputs.push_back(graph_cohort);
      const auto [neg, pos] = gkan::io::parse_task(graph_task);
      const auto cohort = gkan::io::select_task(gkan::io::read_cohort(graph_cohort), neg, pos);
      const auto graph = gkan::build_adjacency(cohort, graph_tau);
      gkan::io::write_adjacency(graph_out / "adjacency.csv", graph, cohort.roi_names,
                                cohort.subject_count());
      manifest.outputs.push_back(graph_out / "adjacency.csv");
      manifest.outputs.push_back(graph_out / "adjacency.meta.json");
      manifest.config = {{"task", graph_task}, {"tau", graph_tau}};
      manifest.write(graph_out);
      return 0;
    }

    if (train->parsed() || cv->parsed()) {
      const bool is_cv = cv->parsed();
      TrainFlags& f = is_cv ? cv_flags : train_flags;
      const fs::path cohort_path = is_cv ? cv_cohort : train_cohort;
      const fs::path out = is_cv ? cv_out : train_out;
      manifest.subcommand = is_cv ? "cv" : "train";
      manifest.inputs.push_back(cohort_path);
      f.config.model = gkan::parse_model_kind(f.model);
      f.config.validate();
      const auto [neg, pos] = gkan::io::parse_task(f.task);
      const auto cohort = gkan::io::select_task(gkan::io::read_cohort(cohort_path), neg, pos);
      manifest.config = json::parse(gkan::io::config_to_json(f.config));
      manifest.config["task"] = f.task;
      manifest.seed = f.config.seed;

      auto emit_fold = [&](const fs::path& dir, const gkan::FoldResult& r) {
        gkan::io::Checkpoint ck{f.config, cohort.roi_names, neg, pos, r.graph, r.params};
        write_output(manifest, dir / "checkpoint.json", gkan::io::checkpoint_to_json(ck));
        write_output(manifest, dir / "report.json", gkan::io::report_to_json(r.metrics));
        write_output(manifest, dir / "scores.csv", gkan::io::per_subject_csv(r.metrics));
        write_output(manifest, dir / "loss_curve.csv", gkan::io::history_csv(r.history));
      };

      if (is_cv) {
        const gkan::CvResult result = gkan::run_cross_validation(cohort, f.config);
        for (const auto& fold : result.folds)
          emit_fold(out / ("fold_" + std::to_string(fold.fold_index)), fold);
        write_output(manifest, out / "summary.json", gkan::io::cv_summary_json(result, f.config));
        const std::string table = gkan::io::aggregate_table({{f.model, result.aggregate}});
        write_output(manifest, out / "summary.txt", table);
        std::cout << table;
      } else {
        const auto assignment =
            gkan::stratified_folds(cohort.labels, f.config.folds, f.config.seed);
        std::vector<std::size_t> train_rows, val_rows;
        for (std::size_t i = 0; i < assignment.size(); ++i)
          (assignment[i] == 0 ? val_rows : train_rows).push_back(i);
        const auto train_set = cohort.subset(train_rows);
        const auto val_set = cohort.subset(val_rows);
        const auto graph = gkan::build_adjacency(train_set, f.config.tau);
        const auto result = gkan::train_one_fold(train_set, val_set, graph, f.config, 0);
        emit_fold(out, result);
        std::printf("validation accuracy %.4f  auc %.4f  f1 %.4f  (%zu epochs)\n",
                    result.metrics.accuracy, result.metrics.auc_roc, result.metrics.f1,
                    result.epochs_run);
      }
      manifest.write(out);
      return 0;
    }

    if (eval->parsed() || interp->parsed()) {
      const bool is_eval = eval->parsed();
      const fs::path ckpt_path = is_eval ? eval_ckpt : interp_ckpt;
      const fs::path cohort_path = is_eval ? eval_cohort : interp_cohort;
      const fs::path out = is_eval ? eval_out : interp_out;
      const std::string task_override = is_eval ? eval_task : interp_task;
      manifest.subcommand = is_eval ? "evaluate" : "interpret";
      manifest.inputs = {ckpt_path, cohort_path};

      const auto ck = gkan::io::read_checkpoint(ckpt_path);
      auto [neg, pos] = task_override.empty() ? std::pair{ck.task_negative, ck.task_positive}
                                              : gkan::io::parse_task(task_override);
      const auto cohort = gkan::io::select_task(gkan::io::read_cohort(cohort_path), neg, pos);
      check_compatible(ck, cohort);
      manifest.seed = ck.config.seed;
      manifest.config = {{"task", neg + ":" + pos}, {"model", gkan::to_string(ck.params.kind)}};

      if (is_eval) {
        const auto ev = gkan::evaluate_model(ck.params, ck.graph, cohort);
        const auto rep = gkan::make_report(cohort.subject_ids, ev.scores, cohort.labels);
        write_output(manifest, out / "report.json", gkan::io::report_to_json(rep));
        write_output(manifest, out / "scores.csv", gkan::io::per_subject_csv(rep));
        std::printf("accuracy %.4f  auc %.4f  f1 %.4f  mean loss %.6f\n", rep.accuracy, rep.auc_roc,
                    rep.f1, ev.mean_loss);
      } else {
        const auto rep = gkan::roi_saliency(ck.params, ck.graph, cohort);
        if (rep.degenerate) {
          std::fprintf(stderr,
                       "warning: every ROI saliency is zero (untrained or all-zero parameters); "
                       "the ranking carries no information\n");
        }
        write_output(manifest, out / "roi_saliency.csv", gkan::io::saliency_csv(rep, cohort.roi_names));
        write_output(manifest, out / "unit_scores.csv", gkan::io::unit_scores_csv(rep));
        std::printf("top ROIs:");
        for (std::size_t i = 0; i < std::min<std::size_t>(5, rep.ranking.size()); ++i)
          std::printf(" %s", rep.ranking[i].c_str());
        std::printf("\n");
      }
      manifest.write(out);
      return 0;
    }
  } catch (const gkan::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
