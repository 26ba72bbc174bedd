#include "m2gan/experiment.hpp"

#include <charconv>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace m2gan {

namespace {

std::string fmt_value(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_manifest(const ExperimentManifest& manifest, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("manifest: cannot open '" + path + "' for writing");
  os << "experiment=" << manifest.name << "\n";
  os << "seed=" << manifest.seed << "\n";
  os << "corpus_hash=" << manifest.corpus_hash_value << "\n";
  os << "build=" << manifest.build_id << "\n";
  os << "started_at=" << manifest.started_at << "\n";
  for (const auto& out : manifest.outputs) os << "output=" << out << "\n";
  os << "config_begin\n" << manifest.config_text << "config_end\n";
}

ExperimentResult run_experiment(const std::string& name, const TrainConfig& cfg,
                                const Corpus& corpus, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  ExperimentResult result;
  ExperimentManifest manifest;
  manifest.name = name;
  manifest.seed = cfg.seed;
  manifest.corpus_hash_value = corpus_hash(corpus);
  manifest.started_at = utc_timestamp();
  manifest.config_text = train_config_to_text(cfg);
  manifest.outputs = {out_dir + "/loss.csv", out_dir + "/report.csv",
                      out_dir + "/report.summary.txt"};
  result.manifest_path = out_dir + "/manifest.txt";
  write_manifest(manifest, result.manifest_path);
  save_train_config(cfg, out_dir + "/config.txt");

  Trainer trainer(cfg, corpus);
  result.train = trainer.run(out_dir);

  auto embedder = train_eval_embedder(corpus, corpus.spec.seed, cfg.threads);
  result.eval = evaluate(trainer.models().generator, corpus, embedder, cfg.threads);
  result.report_csv = out_dir + "/report.csv";
  result.report_summary = out_dir + "/report.summary.txt";
  write_eval_csv(result.eval, result.report_csv);
  write_eval_summary(result.eval, result.report_summary);

  std::ofstream done(out_dir + "/done.txt", std::ios::binary);
  done << "finished_at=" << utc_timestamp() << "\n";
  return result;
}

TrainingModels load_models_for_eval(const std::string& checkpoint_path,
                                    const std::string& config_path, const Corpus& corpus) {
  TrainConfig cfg = load_train_config(config_path);
  TrainingModels models = build_models(cfg, corpus.spec);
  ParamMap table = load_param_table(checkpoint_path);
  ParamMap model_params = models.all_params();
  assign_params(model_params, table);
  return models;
}

std::vector<AblationRow> run_ablation_grid(const TrainConfig& base_cfg, const Corpus& corpus,
                                           const std::string& out_dir) {
  const AblationPreset grid[] = {
      AblationPreset::kProposed,     AblationPreset::kBaseline,
      AblationPreset::kNoTextSpeaker, AblationPreset::kNoSpeaker,
      AblationPreset::kNoProsodyDisc, AblationPreset::kEncDec44,
      AblationPreset::kEncOnly,
  };
  std::vector<AblationRow> rows;
  for (AblationPreset preset : grid) {
    TrainConfig cfg = base_cfg;
    apply_preset(cfg, preset);
    std::string name = preset_name(preset);
    auto res = run_experiment(name, cfg, corpus, out_dir + "/" + name);
    AblationRow row;
    row.preset = name;
    row.pitch_std_mean = res.eval.pitch_std_mean;
    row.speaker_sim_mean = res.eval.speaker_sim_mean;
    row.variance_ratio = res.eval.variance_ratio;
    row.recon_mae_mean = res.eval.recon_mae_mean;
    rows.push_back(row);
  }
  const AblationRow& proposed = rows.front();
  for (auto& row : rows) {
    row.d_pitch_std = row.pitch_std_mean - proposed.pitch_std_mean;
    row.d_speaker_sim = row.speaker_sim_mean - proposed.speaker_sim_mean;
    row.d_variance_ratio = row.variance_ratio - proposed.variance_ratio;
  }
  return rows;
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("ablate: cannot open '" + path + "' for writing");
  os << "config,pitch_std_mean,speaker_sim_mean,variance_ratio,recon_mae_mean,"
        "d_pitch_std,d_speaker_sim,d_variance_ratio\n";
  for (const auto& r : rows) {
    os << r.preset << ',' << fmt_value(r.pitch_std_mean) << ',' << fmt_value(r.speaker_sim_mean)
       << ',' << fmt_value(r.variance_ratio) << ',' << fmt_value(r.recon_mae_mean) << ','
       << fmt_value(r.d_pitch_std) << ',' << fmt_value(r.d_speaker_sim) << ','
       << fmt_value(r.d_variance_ratio) << '\n';
  }
}

void write_comparison_report(const EvalReport& baseline, const EvalReport& proposed,
                             const std::string& out_prefix) {
  // The quality proxy column is the variance ratio plus teacher-forced
  // reconstruction error; no MOS predictor exists at desk scale.
  std::ofstream csv(out_prefix + ".csv", std::ios::binary);
  if (!csv) throw DataError("report: cannot open '" + out_prefix + ".csv' for writing");
  csv << "row,quality_proxy_variance_ratio,quality_proxy_recon_mae,speaker_sim,pitch_std\n";
  csv << "reference,1,0," << fmt_value(proposed.ref_speaker_sim_mean) << ','
      << fmt_value(proposed.ref_pitch_std_mean) << '\n';
  csv << "ground_truth,1,0," << fmt_value(proposed.gt_speaker_sim_mean) << ','
      << fmt_value(proposed.gt_pitch_std_mean) << '\n';
  csv << "baseline," << fmt_value(baseline.variance_ratio) << ','
      << fmt_value(baseline.recon_mae_mean) << ',' << fmt_value(baseline.speaker_sim_mean) << ','
      << fmt_value(baseline.pitch_std_mean) << '\n';
  csv << "proposed," << fmt_value(proposed.variance_ratio) << ','
      << fmt_value(proposed.recon_mae_mean) << ',' << fmt_value(proposed.speaker_sim_mean) << ','
      << fmt_value(proposed.pitch_std_mean) << '\n';

  std::ofstream md(out_prefix + ".md", std::ios::binary);
  if (!md) throw DataError("report: cannot open '" + out_prefix + ".md' for writing");
  md << "# Evaluation summary\n\n";
  md << "Pitch values are in normalized corpus units (not Hz); compare ratios and orderings.\n\n";
  md << "| row | quality-proxy (variance ratio) | speaker sim | pitch std |\n";
  md << "|-----|-------------------------------:|------------:|----------:|\n";
  md << "| Reference | 1 | " << fmt_value(proposed.ref_speaker_sim_mean) << " | "
     << fmt_value(proposed.ref_pitch_std_mean) << " |\n";
  md << "| Ground Truth | 1 | " << fmt_value(proposed.gt_speaker_sim_mean) << " | "
     << fmt_value(proposed.gt_pitch_std_mean) << " |\n";
  md << "| Baseline | " << fmt_value(baseline.variance_ratio) << " | "
     << fmt_value(baseline.speaker_sim_mean) << " | " << fmt_value(baseline.pitch_std_mean)
     << " |\n";
  md << "| Proposed | " << fmt_value(proposed.variance_ratio) << " | "
     << fmt_value(proposed.speaker_sim_mean) << " | " << fmt_value(proposed.pitch_std_mean)
     << " |\n";
}

}  // namespace m2gan
