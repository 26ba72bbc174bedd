#include "m2gan/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "m2gan/experiment.hpp"

namespace m2gan {

namespace {

namespace fs = std::filesystem;

std::string default_cache_dir() {
  if (const char* env = std::getenv("M2GAN_CACHE")) return env;
  return "corpus_cache";
}

int cmd_gen_data(const CorpusSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  Corpus corpus = generate_corpus(spec);
  std::string corpus_path = out_dir + "/corpus.m2c";
  save_records(corpus, corpus_path);

  ExperimentManifest manifest;
  manifest.name = "gen-data";
  manifest.seed = spec.seed;
  manifest.corpus_hash_value = corpus_hash(corpus);
  manifest.started_at = utc_timestamp();
  std::ostringstream cfg;
  cfg << "n_utterances=" << spec.n_utterances << "\nn_speakers=" << spec.n_speakers
      << "\nn_test_speakers=" << spec.n_test_speakers << "\nvocab_size=" << spec.vocab_size
      << "\nmel_dim=" << spec.mel_dim << "\nseed=" << spec.seed << "\n";
  manifest.config_text = cfg.str();
  manifest.outputs = {corpus_path};
  write_manifest(manifest, out_dir + "/manifest.txt");

  std::cout << "wrote " << corpus.records.size() << " utterances ("
            << corpus.n_dropped_by_filter << " dropped by the numeral filter) to " << corpus_path
            << "\ncorpus hash: " << corpus_hash(corpus) << "\n";
  return 0;
}

int cmd_train(const std::string& corpus_path, const std::string& out_dir, TrainConfig cfg) {
  Corpus corpus = load_records(corpus_path);
  auto result = run_experiment(cfg.preset, cfg, corpus, out_dir);
  std::cout << "training complete: " << result.train.checkpoint_paths.size()
            << " checkpoints, losses in " << result.train.loss_csv_path << "\n"
            << "eval: pitch_std_mean=" << result.eval.pitch_std_mean
            << " speaker_sim_mean=" << result.eval.speaker_sim_mean
            << " variance_ratio=" << result.eval.variance_ratio << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& corpus_path,
             const std::string& out_csv) {
  Corpus corpus = load_records(corpus_path);
  std::string config_path = (fs::path(checkpoint).parent_path() / "config.txt").string();
  if (!fs::exists(config_path)) {
    throw DataError("eval: no config.txt next to checkpoint (looked at '" + config_path + "')");
  }
  TrainingModels models = load_models_for_eval(checkpoint, config_path, corpus);
  TrainConfig cfg = load_train_config(config_path);
  auto embedder = train_eval_embedder(corpus, corpus.spec.seed, cfg.threads);
  auto report = evaluate(models.generator, corpus, embedder, cfg.threads);
  write_eval_csv(report, out_csv);
  write_eval_summary(report, out_csv + ".summary.txt");
  std::cout << "eval report: " << out_csv << "\npitch_std_mean=" << report.pitch_std_mean
            << " speaker_sim_mean=" << report.speaker_sim_mean
            << " variance_ratio=" << report.variance_ratio
            << " (embedder accuracy " << report.embedder_train_accuracy << ")\n";
  return 0;
}

int cmd_ablate(const std::string& corpus_path, const std::string& out_dir, TrainConfig base_cfg) {
  Corpus corpus = load_records(corpus_path);
  auto rows = run_ablation_grid(base_cfg, corpus, out_dir);
  std::string csv = out_dir + "/ablation.csv";
  write_ablation_csv(rows, csv);
  std::cout << "ablation grid complete: " << csv << "\n";
  for (const auto& r : rows) {
    std::cout << r.preset << ": variance_ratio=" << r.variance_ratio
              << " speaker_sim=" << r.speaker_sim_mean << " (d_vr=" << r.d_variance_ratio
              << ")\n";
  }
  return 0;
}

int cmd_report(const std::string& baseline_summary, const std::string& proposed_summary,
               const std::string& out_prefix) {
  if (!fs::exists(baseline_summary)) {
    throw DataError("report: missing baseline summary '" + baseline_summary + "'");
  }
  if (!fs::exists(proposed_summary)) {
    throw DataError("report: missing proposed summary '" + proposed_summary + "'");
  }
  auto baseline = load_eval_summary(baseline_summary);
  auto proposed = load_eval_summary(proposed_summary);
  write_comparison_report(baseline, proposed, out_prefix);
  std::cout << "report written: " << out_prefix << ".csv, " << out_prefix << ".md\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"multi-modal fusion GAN training harness for a desk-scale acoustic model"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic corpus");
  CorpusSpec spec;
  std::string gen_out = default_cache_dir();
  gen->add_option("--out", gen_out, "output directory (default: $M2GAN_CACHE or corpus_cache)");
  gen->add_option("--seed", spec.seed, "corpus seed");
  gen->add_option("--n-utterances", spec.n_utterances, "utterances to generate");
  gen->add_option("--n-speakers", spec.n_speakers, "number of speakers");
  gen->add_option("--n-test-speakers", spec.n_test_speakers, "held-out speakers");
  gen->add_option("--vocab-size", spec.vocab_size, "token vocabulary size");
  gen->add_option("--mel-dim", spec.mel_dim, "mel-like feature dimension");
  gen->add_option("--style-std", spec.style_std, "hidden style latent sigma");
  gen->add_option("--digit-injection-p", spec.digit_injection_p,
                  "probability of a numeral word per text");

  // train
  auto* train = app.add_subcommand("train", "train generator and discriminators");
  std::string train_corpus, train_out = "runs/latest", train_config, ablate_preset;
  bool baseline_flag = false;
  uint64_t train_seed = 0;
  bool train_seed_set = false;
  int train_threads = -1;
  train->add_option("--corpus", train_corpus, "corpus file")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--config", train_config, "flat key=value config file");
  train->add_option("--ablate", ablate_preset,
                    "ablation preset: no-speaker|no-text-speaker|no-prosody-disc|enc-only|"
                    "enc-dec-4-4");
  train->add_flag("--baseline", baseline_flag, "disable both discriminators");
  train->add_option("--seed", train_seed, "override config seed")
      ->each([&](const std::string&) { train_seed_set = true; });
  train->add_option("--threads", train_threads, "worker threads (0 = hardware)");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string eval_checkpoint, eval_corpus, eval_out = "report.csv";
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus file")->required();
  eval_cmd->add_option("--out", eval_out, "report CSV path");

  // ablate
  auto* ablate = app.add_subcommand("ablate", "run the full ablation grid");
  std::string ablate_corpus, ablate_out = "runs/ablation";
  uint64_t ablate_seed = 0;
  bool ablate_seed_set = false;
  int ablate_threads = -1;
  ablate->add_option("--corpus", ablate_corpus, "corpus file")->required();
  ablate->add_option("--out", ablate_out, "output directory")->required();
  ablate->add_option("--seed", ablate_seed, "shared seed for every configuration")
      ->each([&](const std::string&) { ablate_seed_set = true; });
  ablate->add_option("--threads", ablate_threads, "worker threads (0 = hardware)");

  // report
  auto* report = app.add_subcommand("report", "render the four-row comparison summary");
  std::string rep_baseline, rep_proposed, rep_out = "summary";
  report->add_option("--baseline", rep_baseline, "baseline eval summary file")->required();
  report->add_option("--proposed", rep_proposed, "proposed eval summary file")->required();
  report->add_option("--out", rep_out, "output prefix (.csv and .md are appended)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(spec, gen_out);
    if (train->parsed()) {
      TrainConfig cfg = train_config.empty() ? TrainConfig{} : load_train_config(train_config);
      if (baseline_flag && !ablate_preset.empty()) {
        std::cerr << "--baseline and --ablate are mutually exclusive\n";
        return 2;
      }
      if (baseline_flag) apply_preset(cfg, AblationPreset::kBaseline);
      if (!ablate_preset.empty()) {
        try {
          apply_preset(cfg, parse_preset(ablate_preset));
        } catch (const std::invalid_argument& e) {
          std::cerr << e.what() << "\n";
          return 2;
        }
      }
      if (train_seed_set) cfg.seed = train_seed;
      if (train_threads >= 0) cfg.threads = train_threads;
      return cmd_train(train_corpus, train_out, cfg);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_checkpoint, eval_corpus, eval_out);
    if (ablate->parsed()) {
      TrainConfig cfg;
      if (ablate_seed_set) cfg.seed = ablate_seed;
      if (ablate_threads >= 0) cfg.threads = ablate_threads;
      return cmd_ablate(ablate_corpus, ablate_out, cfg);
    }
    if (report->parsed()) return cmd_report(rep_baseline, rep_proposed, rep_out);
  } catch (const DivergenceError& e) {
    std::cerr << "training aborted: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace m2gan
