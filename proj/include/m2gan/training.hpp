#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "m2gan/corpus.hpp"
#include "m2gan/discriminator.hpp"
#include "m2gan/generator.hpp"
#include "m2gan/losses.hpp"
#include "m2gan/optim.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Staged adversarial training: epoch 1 trains the discriminators but applies
// no adversarial pressure to the generator, epoch 2 adds the acoustic
// adversarial term, epoch 3 adds the prosodic one. The learning-rate warmup
// restarts at the beginning of every epoch. Generator and discriminators own
// separate AdamW states; generator outputs are value-detached for the
// discriminator step, and discriminator parameters are frozen during the
// generator step, so no parameter is ever updated by both optimizers.
// ---------------------------------------------------------------------------

struct TrainConfig {
  int epochs = 3;
  double lr_peak = 0.002;
  double weight_decay = 0.01;
  double beta1 = 0.5;
  double beta2 = 0.9;
  long warmup_steps = 200;
  long max_frames_per_batch = 2000;   // paper-scale value is 8000 per device
  double lambda_a = 0.1;
  uint64_t seed = 1234;
  int threads = 0;                    // 0 = hardware concurrency
  double divergence_guard = 1000.0;   // abort when generator total exceeds this

  // ablation preset, 1:1 with discriminator/config switches below
  std::string preset = "proposed";
  bool use_acoustic_disc = true;
  bool use_prosodic_disc = true;
  bool disc_condition_text = true;
  bool disc_condition_speaker = true;
  int disc_enc_layers = 2;
  int disc_dec_layers = 6;

  // stage gates are monotone: a term once enabled stays enabled
  int stage_for_epoch(int epoch) const { return epoch < 3 ? epoch : 3; }
  bool acoustic_adversarial_on(int stage) const { return stage >= 2 && use_acoustic_disc; }
  bool prosodic_adversarial_on(int stage) const { return stage >= 3 && use_prosodic_disc; }
};

// presets mirror the paper's ablation grid
enum class AblationPreset {
  kProposed,
  kBaseline,
  kNoTextSpeaker,
  kNoSpeaker,
  kNoProsodyDisc,
  kEncDec44,
  kEncOnly,
};

const char* preset_name(AblationPreset p);
AblationPreset parse_preset(const std::string& name);
void apply_preset(TrainConfig& cfg, AblationPreset preset);

// flat key=value config file
std::string train_config_to_text(const TrainConfig& cfg);
TrainConfig train_config_from_text(const std::string& text);
void save_train_config(const TrainConfig& cfg, const std::string& path);
TrainConfig load_train_config(const std::string& path);

// ---------------------------------------------------------------------------
// batching: length buckets under a frame budget (padding included)
// ---------------------------------------------------------------------------

struct Batch {
  std::vector<int> record_indices;
  long real_frames = 0;
  long padded_frames = 0;  // batch size * longest utterance
  bool over_budget = false;
};

// Packs `indices` sorted by length so that padded_frames <= max_frames.
// A single utterance above the budget becomes its own flagged batch.
std::vector<Batch> make_batches(const Corpus& corpus, const std::vector<int>& indices,
                                long max_frames);

double padding_waste(const std::vector<Batch>& batches);

// ---------------------------------------------------------------------------
// models + trainer
// ---------------------------------------------------------------------------

struct TrainingModels {
  GeneratorConfig gen_cfg;
  Generator generator;
  std::optional<FusionDiscriminator> disc_acoustic;
  std::optional<FusionDiscriminator> disc_prosodic;

  ParamMap generator_params;      // prefix "generator."
  ParamMap discriminator_params;  // prefixes "disc_acoustic." / "disc_prosodic."

  ParamMap all_params() const;
};

// Deterministic model construction from the config's init substream.
TrainingModels build_models(const TrainConfig& cfg, const CorpusSpec& corpus_spec);

// named-parameter checkpoint + text manifest (model parameters only)
void save_param_table(const ParamMap& table, const std::string& path);
ParamMap load_param_table(const std::string& path);
void write_param_manifest(const ParamMap& params, const std::string& path);
void assign_params(ParamMap& dst, const ParamMap& src);  // by name, shapes must match

struct EpochReport {
  int epoch = 0;
  int stage = 1;
  std::vector<LossBundle> steps;
};

struct TrainResult {
  std::vector<std::string> checkpoint_paths;
  std::string final_checkpoint;
  std::string loss_csv_path;
  std::vector<EpochReport> epochs;
};

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const Corpus& corpus);

  const TrainConfig& config() const { return cfg_; }
  TrainingModels& models() { return models_; }
  const std::vector<Batch>& batches() const { return batches_; }
  AdamW& generator_optimizer() { return gen_opt_; }
  AdamW& discriminator_optimizer() { return disc_opt_; }

  // One optimizer step on one batch (discriminator step then generator step).
  LossBundle step_batch(const Batch& batch, int epoch, long step_in_epoch, long global_step,
                        int stage);

  EpochReport train_epoch(int epoch);

  // Runs cfg.epochs staged epochs, writing loss.csv, per-epoch checkpoints
  // (parameters + optimizer state) and their manifests into out_dir. With
  // resume_from_epoch = N > 0, reloads checkpoint_epochN and continues.
  TrainResult run(const std::string& out_dir, int resume_from_epoch = 0);

  void save_checkpoint(const std::string& path) const;
  void load_checkpoint(const std::string& path);

 private:
  TrainConfig cfg_;
  const Corpus& corpus_;
  TrainingModels models_;
  AdamW gen_opt_;
  AdamW disc_opt_;
  std::vector<Batch> batches_;
  int threads_ = 1;
};

// Loss CSV helpers (shortest round-trip float formatting, deterministic).
void write_loss_csv(const std::vector<EpochReport>& epochs, std::ostream& os);
std::string loss_csv_line(const LossBundle& b);

}  // namespace m2gan
