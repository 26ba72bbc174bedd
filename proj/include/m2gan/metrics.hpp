#pragma once

#include <span>
#include <string>
#include <vector>

#include "m2gan/corpus.hpp"
#include "m2gan/generator.hpp"
#include "m2gan/training.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Desk-scale metrics: per-utterance pitch standard deviation averaged over
// the test set, speaker cosine similarity against a held-out evaluation
// embedder, and the over-smoothing variance ratio (synth / ground-truth
// pitch-std means). The evaluation embedder is trained separately on the
// speaker-identification task and shares no parameters with the generator's
// frozen speaker embedder or with anything in a training checkpoint.
// ---------------------------------------------------------------------------

double pitch_std(std::span<const float> pitch);  // population form, double math

double cosine_similarity(std::span<const double> a, std::span<const double> b);

class EvalEmbedder {
 public:
  EvalEmbedder() = default;
  EvalEmbedder(int mel_dim, int embed_dim, int n_classes, Rng& rng);

  // L2-normalized embedding of an utterance's frames
  std::vector<double> embed(const Tensor& frames) const;

  // graph-building forward used during training
  Tensor forward_normalized(const Tensor& frames) const;
  Tensor logits(const Tensor& normalized) const;

  void collect_params(const std::string& prefix, ParamMap& out) const;
  double train_accuracy() const { return train_accuracy_; }
  void set_train_accuracy(double a) { train_accuracy_ = a; }
  int n_classes() const { return n_classes_; }

 private:
  int embed_dim_ = 64;
  int n_classes_ = 0;
  LinearT<float> frame_proj_, hidden_, classifier_;
  double train_accuracy_ = 0;
};

// Trains the embedder once (seeded) on speaker identification over the train
// split; stops early above 95% accuracy. The returned accuracy gates metric
// validity (callers assert >= 0.9).
EvalEmbedder train_eval_embedder(const Corpus& corpus, uint64_t seed, int threads = 0);

struct EvalRow {
  long utterance_id = 0;
  int speaker_id = 0;
  double pitch_std = 0;     // of the predicted token-level pitch channel
  double speaker_sim = 0;   // cos(embed(synth), embed(reference))
  double recon_mae = 0;     // teacher-forced reconstruction error
};

struct EvalReport {
  std::vector<EvalRow> rows;  // sorted by utterance_id
  double pitch_std_mean = 0;
  double speaker_sim_mean = 0;
  double recon_mae_mean = 0;
  // Ground Truth row: real frames scored against the (different) reference
  double gt_pitch_std_mean = 0;
  double gt_speaker_sim_mean = 0;
  // Reference row: the reference scored against itself (similarity 1)
  double ref_pitch_std_mean = 0;
  double ref_speaker_sim_mean = 0;
  double variance_ratio = 0;  // pitch_std_mean / gt_pitch_std_mean
  int skipped_speakers = 0;   // test speakers with a single utterance
  double embedder_train_accuracy = 0;
};

// Inference-mode evaluation over the unseen-speaker test split. Each test
// utterance is paired with a reference drawn from a different utterance of
// the same speaker; single-utterance speakers are skipped with a warning.
EvalReport evaluate(const Generator& generator, const Corpus& corpus,
                    const EvalEmbedder& embedder, int threads = 0);

void write_eval_csv(const EvalReport& report, const std::string& path);
void write_eval_summary(const EvalReport& report, const std::string& path);
EvalReport load_eval_summary(const std::string& path);  // aggregate fields only

}  // namespace m2gan
