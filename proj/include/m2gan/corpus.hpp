#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "m2gan/common.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Synthetic one-to-many "speech" corpus with analytically known conditional
// statistics. Every utterance carries a hidden style scalar s that the model
// never observes — the unobserved variable that makes text -> features a
// one-to-many mapping and reconstruction training collapse toward the
// conditional mean.
// ---------------------------------------------------------------------------

struct CorpusSpec {
  int vocab_size = 32;
  int n_speakers = 16;
  int n_test_speakers = 4;  // last ids; disjoint from training
  int n_utterances = 2000;
  int min_tokens = 4;
  int max_tokens = 16;
  int mel_dim = 20;
  uint64_t seed = 1234;
  double style_std = 0.6;           // sigma of the hidden style latent
  double noise_std = 0.05;          // additive noise floor on all channels
  double digit_injection_p = 0.07;  // fraction of texts given a numeral word

  // generative table knobs
  double base_pitch_range = 1.0;          // base pitch per token ~ U(-r, r)
  double pitch_contour_min = 0.75;        // |style coupling| per token
  double pitch_contour_max = 1.75;
  double energy_contour_min = 0.25;
  double energy_contour_max = 0.75;
  int base_duration_min = 6;              // frames per token before style shift
  int base_duration_max = 18;
  double speaker_pitch_offset_range = 1.2;
  double speaker_energy_offset_range = 0.8;
  double timbre_std = 0.5;                // speaker timbre vector element sigma

  int first_test_speaker() const { return n_speakers - n_test_speakers; }
};

// Seed-derived generative tables, kept alongside the records so tests can
// evaluate the closed-form conditional statistics.
struct CorpusModel {
  std::vector<double> base_pitch;      // [V]
  std::vector<double> pitch_contour;   // [V], signed
  std::vector<double> base_energy;     // [V]
  std::vector<double> energy_contour;  // [V], signed
  std::vector<int> base_duration;      // [V]
  std::vector<double> token_wave;      // [V x D_mel]
  std::vector<double> harmonic;        // [V x D_mel], pitch-modulated direction
  std::vector<double> speaker_pitch_offset;   // [S]
  std::vector<double> speaker_energy_offset;  // [S]
  std::vector<double> speaker_timbre;         // [S x D_mel]

  // std of pitch for a fixed (token, speaker) over the corpus distribution:
  // style coupling and the noise floor add in quadrature
  double expected_pitch_std(const CorpusSpec& spec, int token) const;

  // closed-form E[frame vector | token, speaker]
  std::vector<double> expected_frame_mean(const CorpusSpec& spec, int token, int speaker) const;
};

struct UtteranceRecord {
  long utterance_id = 0;
  int speaker_id = 0;
  std::vector<int> token_ids;
  std::vector<int> durations;   // oracle alignment, frames per token
  std::vector<float> pitch;     // token-level, normalized units
  std::vector<float> energy;
  float style = 0;              // hidden latent (kept for analysis only)
  int n_frames = 0;
  int mel_dim = 0;
  std::vector<float> frames;    // row-major [n_frames x mel_dim]
  std::string text;

  int n_tokens() const { return static_cast<int>(token_ids.size()); }
};

struct Corpus {
  CorpusSpec spec;
  CorpusModel model;
  std::vector<UtteranceRecord> records;  // numeral-filtered
  int n_generated = 0;                   // before the numeral filter
  int n_dropped_by_filter = 0;

  bool is_test_speaker(int speaker_id) const {
    return speaker_id >= spec.first_test_speaker();
  }
  std::vector<int> train_indices() const;
  std::vector<int> test_indices() const;
};

// keep iff the text contains no Unicode decimal digit
bool filter_numerals(const std::string& text);

CorpusModel derive_corpus_model(const CorpusSpec& spec);

// Deterministic generation: same spec (seed included) -> identical corpus.
// Utterances whose text fails the numeral filter are dropped and counted.
Corpus generate_corpus(const CorpusSpec& spec);

void save_records(const Corpus& corpus, std::ostream& os);
void save_records(const Corpus& corpus, const std::string& path);
Corpus load_records(std::istream& is);
Corpus load_records(const std::string& path);

// FNV-1a over the serialized form; recorded in experiment manifests.
uint64_t corpus_hash(const Corpus& corpus);

}  // namespace m2gan
