#pragma once

#include <string>
#include <vector>

#include "m2gan/corpus.hpp"
#include "m2gan/metrics.hpp"
#include "m2gan/training.hpp"

namespace m2gan {

inline constexpr const char* kBuildId = "m2gan 0.1.0";

// Written into the experiment directory before training starts and never
// touched afterwards; seed + config snapshot + corpus hash are sufficient to
// re-run the experiment bit-identically.
struct ExperimentManifest {
  std::string name;
  uint64_t seed = 0;
  uint64_t corpus_hash_value = 0;
  std::string build_id = kBuildId;
  std::string started_at;           // UTC, informational
  std::string config_text;          // flat key=value snapshot
  std::vector<std::string> outputs;
};

std::string utc_timestamp();
void write_manifest(const ExperimentManifest& manifest, const std::string& path);

struct ExperimentResult {
  TrainResult train;
  EvalReport eval;
  std::string report_csv;
  std::string report_summary;
  std::string manifest_path;
};

// Manifest + config snapshot, full training run, then evaluation with the
// corpus-seeded held-out embedder. Everything lands under out_dir.
ExperimentResult run_experiment(const std::string& name, const TrainConfig& cfg,
                                const Corpus& corpus, const std::string& out_dir);

// Rebuilds the models recorded next to a checkpoint and loads its parameters.
TrainingModels load_models_for_eval(const std::string& checkpoint_path,
                                    const std::string& config_path, const Corpus& corpus);

struct AblationRow {
  std::string preset;
  double pitch_std_mean = 0;
  double speaker_sim_mean = 0;
  double variance_ratio = 0;
  double recon_mae_mean = 0;
  // deltas against the proposed configuration
  double d_pitch_std = 0;
  double d_speaker_sim = 0;
  double d_variance_ratio = 0;
};

// Runs the full ablation grid sequentially with a shared seed and corpus.
std::vector<AblationRow> run_ablation_grid(const TrainConfig& base_cfg, const Corpus& corpus,
                                           const std::string& out_dir);

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::string& path);

// Table-shaped four-row summary (Reference / Ground Truth / Baseline /
// Proposed) rendered as CSV + markdown from two eval summaries. Re-rendering
// is byte-identical.
void write_comparison_report(const EvalReport& baseline, const EvalReport& proposed,
                             const std::string& out_prefix);

}  // namespace m2gan
