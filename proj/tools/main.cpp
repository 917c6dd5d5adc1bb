#include <iostream>

#include <CLI11.hpp>

#include "facetouch_cli/annotation.hpp"
#include "facetouch_cli/commands.hpp"

using namespace facetouch;
using namespace facetouch::cli;

namespace {

RunConfig base_config(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

void print_warnings(const Warnings& w) {
  for (const auto& m : w.messages) std::cerr << "warning: " << m << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Infant face-touch detection toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Run configuration (JSON)")->check(CLI::ExistingFile);
  };

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  add_config(synth);
  std::string synth_out;
  std::optional<std::size_t> videos, infants;
  std::optional<int> frames;
  std::optional<std::uint64_t> synth_seed;
  std::optional<double> prevalence, coupling;
  bool no_render = false;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--videos", videos, "Number of videos");
  synth->add_option("--infants", infants, "Number of infants (0: one per video)");
  synth->add_option("--frames", frames, "Frames per video");
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--target-prevalence", prevalence, "Calibrate the touch rate to this on-head share");
  synth->add_option("--coupling", coupling, "Fine-motor coupling of the Mullen scores");
  synth->add_flag("--no-render", no_render, "Skip frame images");

  // extract
  auto* extract = app.add_subcommand("extract", "Extract per-frame features from a manifest");
  add_config(extract);
  std::string manifest_in, features_out;
  bool with_hog = false;
  extract->add_option("--manifest", manifest_in, "Dataset manifest")->required();
  extract->add_option("--out", features_out, "Feature CSV")->required();
  extract->add_flag("--hog", with_hog, "Append the 540 HOG columns");

  // train
  auto* train = app.add_subcommand("train", "Grid-search and fit a model");
  add_config(train);
  std::vector<std::string> train_inputs;
  std::string variant, task, model_out;
  std::optional<std::uint64_t> train_seed;
  train->add_option("--input", train_inputs, "Manifest or feature CSV, optionally with #first/#second")->required();
  train->add_option("--variant", variant, "rf-pca-svm | autoenc-svm-1 | autoenc-svm-2");
  train->add_option("--task", task, "binary | multilabel");
  train->add_option("--seed", train_seed, "Pipeline seed");
  train->add_option("--out", model_out, "Model file")->required();

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score models against baselines");
  add_config(evaluate);
  EvaluateArgs eval_args;
  std::vector<std::string> model_paths;
  std::string dataset_a, dataset_b, text_out, eval_out;
  std::optional<std::uint64_t> split_seed;
  std::vector<std::string> eval_variants;
  evaluate->add_option("--model", model_paths, "Trained model (direct mode)");
  evaluate->add_option("--test", eval_args.test, "Test manifest or feature CSV (direct mode)");
  evaluate->add_option("--name", eval_args.name, "Configuration name (direct mode)");
  evaluate->add_option("--dataset-a", dataset_a, "Dataset A (protocol mode)");
  evaluate->add_option("--dataset-b", dataset_b, "Dataset B (protocol mode)");
  evaluate->add_option("--variants", eval_variants, "Variants trained in protocol mode");
  evaluate->add_option("--split-seed", split_seed, "Seed of the grouped 50% split");
  evaluate->add_option("--out", eval_out, "JSON report")->required();
  evaluate->add_option("--text", text_out, "Plain-text tables");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Per-frame predictions");
  add_config(predict_cmd);
  std::string predict_model, predict_input, predict_out, infant_manifest;
  predict_cmd->add_option("--model", predict_model, "Trained model")->required();
  predict_cmd->add_option("--input", predict_input, "Manifest or feature CSV")->required();
  predict_cmd->add_option("--manifest", infant_manifest, "Manifest mapping videos to infants (for CSV input)");
  predict_cmd->add_option("--out", predict_out, "Prediction CSV")->required();

  // correlate
  auto* correlate = app.add_subcommand("correlate", "Correlate touch frequency with Mullen development rates");
  add_config(correlate);
  std::string predictions_in, mullen_in, correlate_out;
  double cutoff = 5.0;
  correlate->add_option("--predictions", predictions_in, "Prediction CSV")->required();
  correlate->add_option("--mullen", mullen_in, "Mullen CSV")->required();
  correlate->add_option("--out", correlate_out, "JSON output");
  correlate->add_option("--age-cutoff", cutoff, "Last visit age (months) used for the rate");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Serve the labelling API");
  std::string annotate_manifest, host = "127.0.0.1", ui_dir;
  int port = 8080;
  annotate->add_option("--manifest", annotate_manifest, "Dataset manifest")->required();
  annotate->add_option("--port", port, "TCP port");
  annotate->add_option("--host", host, "Bind address");
  annotate->add_option("--ui-dir", ui_dir, "Static UI files to serve at /");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      RunConfig c = base_config(config_path);
      if (videos) c.synth.n_videos = *videos;
      if (infants) c.synth.n_infants = *infants;
      if (frames) c.synth.frames_per_video = *frames;
      if (synth_seed) c.synth.seed = *synth_seed;
      if (prevalence) c.synth.target_prevalence = *prevalence;
      if (coupling) c.synth.mullen_coupling = *coupling;
      if (no_render) c.synth.render_frames = false;
      c.synth.validate();
      const auto m = cmd_synth(c, synth_out);
      std::cout << "wrote " << m.videos.size() << " videos to " << synth_out << "\n";
    } else if (extract->parsed()) {
      RunConfig c = base_config(config_path);
      if (with_hog) c.include_hog = true;
      Warnings w;
      const auto rows = cmd_extract(c, manifest_in, features_out, &w);
      print_warnings(w);
      std::cout << "wrote " << rows << " rows to " << features_out << "\n";
    } else if (train->parsed()) {
      RunConfig c = base_config(config_path);
      if (!variant.empty()) c.pipeline.variant = variant_from_name(variant);
      if (!task.empty()) c.pipeline.task = task_from_name(task);
      if (train_seed) c.pipeline.seed = *train_seed;
      const auto model = cmd_train(c, train_inputs, model_out);
      for (const auto& w : model.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "trained " << variant_name(model.spec.variant) << " (" << task_name(model.spec.task) << ") on "
                << model.train_rows << " rows; model written to " << model_out << "\n";
    } else if (evaluate->parsed()) {
      RunConfig c = base_config(config_path);
      if (split_seed) c.evaluation.split_seed = *split_seed;
      if (!eval_variants.empty()) {
        c.evaluation.variants.clear();
        for (const auto& v : eval_variants) c.evaluation.variants.push_back(variant_from_name(v));
      }
      for (const auto& m : model_paths) eval_args.models.emplace_back(m);
      if (!dataset_a.empty()) eval_args.dataset_a = dataset_a;
      if (!dataset_b.empty()) eval_args.dataset_b = dataset_b;
      eval_args.out = eval_out;
      if (!text_out.empty()) eval_args.out_text = text_out;
      const auto report = cmd_evaluate(c, eval_args);
      std::cout << report_to_text(report);
    } else if (predict_cmd->parsed()) {
      RunConfig c = base_config(config_path);
      std::optional<fs::path> mapping;
      if (!infant_manifest.empty()) mapping = infant_manifest;
      const auto rows = cmd_predict(c, predict_model, predict_input, predict_out, mapping);
      std::cout << "wrote " << rows << " predictions to " << predict_out << "\n";
    } else if (correlate->parsed()) {
      RunConfig c = base_config(config_path);
      std::optional<fs::path> out;
      if (!correlate_out.empty()) out = correlate_out;
      const auto r = cmd_correlate(c, predictions_in, mullen_in, out, cutoff);
      for (const auto& [name, res] : {std::pair{"FM", r.fm}, std::pair{"GM", r.gm}}) {
        if (res) {
          std::cout << name << ": r = " << res->r << ", n = " << res->n << ", t = " << res->t_statistic
                    << ", p = " << res->p_value << "\n";
        } else {
          std::cout << name << ": not computable\n";
        }
      }
      for (const auto& n : r.notices) std::cerr << "notice: " << n << "\n";
    } else if (annotate->parsed()) {
      std::optional<fs::path> ui;
      if (!ui_dir.empty()) ui = ui_dir;
      std::cout << "serving " << annotate_manifest << " on http://" << host << ":" << port << "\n" << std::flush;
      run_annotation_server(resolve_manifest_path(annotate_manifest), host, port, ui);
    }
  } catch (const Error& e) {
    std::cerr << "error[" << error_code_name(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[Internal]: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
