#include "m2gan/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

namespace m2gan {

namespace {

std::string fmt_value(double v) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// static index partition; deterministic results regardless of scheduling
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  int w = std::min(threads, n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(w));
  for (int t = 0; t < w; ++t) {
    pool.emplace_back([&, t]() {
      for (int i = t; i < n; i += w) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

// ---------------------------------------------------------------------------
// presets and config file
// ---------------------------------------------------------------------------

const char* preset_name(AblationPreset p) {
  switch (p) {
    case AblationPreset::kProposed: return "proposed";
    case AblationPreset::kBaseline: return "baseline";
    case AblationPreset::kNoTextSpeaker: return "no-text-speaker";
    case AblationPreset::kNoSpeaker: return "no-speaker";
    case AblationPreset::kNoProsodyDisc: return "no-prosody-disc";
    case AblationPreset::kEncDec44: return "enc-dec-4-4";
    case AblationPreset::kEncOnly: return "enc-only";
  }
  return "proposed";
}

AblationPreset parse_preset(const std::string& name) {
  for (AblationPreset p :
       {AblationPreset::kProposed, AblationPreset::kBaseline, AblationPreset::kNoTextSpeaker,
        AblationPreset::kNoSpeaker, AblationPreset::kNoProsodyDisc, AblationPreset::kEncDec44,
        AblationPreset::kEncOnly}) {
    if (name == preset_name(p)) return p;
  }
  throw std::invalid_argument("unknown ablation preset '" + name + "'");
}

void apply_preset(TrainConfig& cfg, AblationPreset preset) {
  cfg.preset = preset_name(preset);
  cfg.use_acoustic_disc = true;
  cfg.use_prosodic_disc = true;
  cfg.disc_condition_text = true;
  cfg.disc_condition_speaker = true;
  cfg.disc_enc_layers = 2;
  cfg.disc_dec_layers = 6;
  switch (preset) {
    case AblationPreset::kProposed: break;
    case AblationPreset::kBaseline:
      cfg.use_acoustic_disc = false;
      cfg.use_prosodic_disc = false;
      break;
    case AblationPreset::kNoTextSpeaker:
      cfg.disc_condition_text = false;
      cfg.disc_condition_speaker = false;
      break;
    case AblationPreset::kNoSpeaker:
      cfg.disc_condition_speaker = false;
      break;
    case AblationPreset::kNoProsodyDisc:
      cfg.use_prosodic_disc = false;
      break;
    case AblationPreset::kEncDec44:
      cfg.disc_enc_layers = 4;
      cfg.disc_dec_layers = 4;
      break;
    case AblationPreset::kEncOnly:
      cfg.disc_enc_layers = 8;
      cfg.disc_dec_layers = 0;
      break;
  }
}

std::string train_config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "epochs=" << cfg.epochs << "\n";
  os << "lr_peak=" << fmt_value(cfg.lr_peak) << "\n";
  os << "weight_decay=" << fmt_value(cfg.weight_decay) << "\n";
  os << "beta1=" << fmt_value(cfg.beta1) << "\n";
  os << "beta2=" << fmt_value(cfg.beta2) << "\n";
  os << "warmup_steps=" << cfg.warmup_steps << "\n";
  os << "max_frames_per_batch=" << cfg.max_frames_per_batch << "\n";
  os << "lambda_a=" << fmt_value(cfg.lambda_a) << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "threads=" << cfg.threads << "\n";
  os << "divergence_guard=" << fmt_value(cfg.divergence_guard) << "\n";
  os << "preset=" << cfg.preset << "\n";
  return os.str();
}

TrainConfig train_config_from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError("config parse error at line " + std::to_string(lineno) + ": '" + line +
                      "'");
    }
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    try {
      if (key == "epochs") cfg.epochs = std::stoi(val);
      else if (key == "lr_peak") cfg.lr_peak = std::stod(val);
      else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
      else if (key == "beta1") cfg.beta1 = std::stod(val);
      else if (key == "beta2") cfg.beta2 = std::stod(val);
      else if (key == "warmup_steps") cfg.warmup_steps = std::stol(val);
      else if (key == "max_frames_per_batch") cfg.max_frames_per_batch = std::stol(val);
      else if (key == "lambda_a") cfg.lambda_a = std::stod(val);
      else if (key == "seed") cfg.seed = std::stoull(val);
      else if (key == "threads") cfg.threads = std::stoi(val);
      else if (key == "divergence_guard") cfg.divergence_guard = std::stod(val);
      else if (key == "preset") cfg.preset = val;
      else throw DataError("config parse error at line " + std::to_string(lineno) +
                           ": unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw DataError("config parse error at line " + std::to_string(lineno) + ": bad value '" +
                      val + "' for key '" + key + "'");
    }
  }
  apply_preset(cfg, parse_preset(cfg.preset));
  return cfg;
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("config: cannot open '" + path + "' for writing");
  os << train_config_to_text(cfg);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return train_config_from_text(buf.str());
}

// ---------------------------------------------------------------------------
// batching
// ---------------------------------------------------------------------------

std::vector<Batch> make_batches(const Corpus& corpus, const std::vector<int>& indices,
                                long max_frames) {
  if (indices.empty()) throw std::invalid_argument("make_batches: empty corpus selection");
  std::vector<int> sorted = indices;
  std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    int fa = corpus.records[static_cast<std::size_t>(a)].n_frames;
    int fb = corpus.records[static_cast<std::size_t>(b)].n_frames;
    return fa != fb ? fa < fb : a < b;
  });

  std::vector<Batch> batches;
  Batch current;
  long current_max_len = 0;
  auto flush = [&]() {
    if (!current.record_indices.empty()) {
      current.padded_frames = current_max_len * static_cast<long>(current.record_indices.size());
      batches.push_back(std::move(current));
      current = Batch{};
      current_max_len = 0;
    }
  };
  for (int idx : sorted) {
    long len = corpus.records[static_cast<std::size_t>(idx)].n_frames;
    if (len > max_frames) {
      flush();
      Batch b;
      b.record_indices = {idx};
      b.real_frames = len;
      b.padded_frames = len;
      b.over_budget = true;
      std::cerr << "warning: utterance " << corpus.records[static_cast<std::size_t>(idx)].utterance_id
                << " has " << len << " frames, over the " << max_frames
                << "-frame budget; batched alone\n";
      batches.push_back(std::move(b));
      continue;
    }
    long new_max = std::max(current_max_len, len);
    long new_count = static_cast<long>(current.record_indices.size()) + 1;
    if (!current.record_indices.empty() && new_max * new_count > max_frames) flush();
    current.record_indices.push_back(idx);
    current.real_frames += len;
    current_max_len = std::max(current_max_len, len);
  }
  flush();
  return batches;
}

double padding_waste(const std::vector<Batch>& batches) {
  double padded = 0, real = 0;
  for (const auto& b : batches) {
    padded += static_cast<double>(b.padded_frames);
    real += static_cast<double>(b.real_frames);
  }
  return padded == 0 ? 0 : (padded - real) / padded;
}

// ---------------------------------------------------------------------------
// models
// ---------------------------------------------------------------------------

ParamMap TrainingModels::all_params() const {
  ParamMap all;
  for (const auto& item : generator_params.items) all.items.push_back(item);
  for (const auto& item : discriminator_params.items) all.items.push_back(item);
  return all;
}

TrainingModels build_models(const TrainConfig& cfg, const CorpusSpec& corpus_spec) {
  TrainingModels m;
  m.gen_cfg.vocab = corpus_spec.vocab_size;
  m.gen_cfg.mel_dim = corpus_spec.mel_dim;
  Rng init = Rng::substream(cfg.seed, "init");
  m.generator = Generator(m.gen_cfg, init);
  m.generator.collect_params("generator", m.generator_params);

  if (cfg.use_acoustic_disc) {
    auto dc = DiscriminatorConfig::acoustic_defaults(m.gen_cfg.mel_dim, m.gen_cfg.vocab,
                                                     m.gen_cfg.speaker_dim);
    dc.enc_layers = cfg.disc_enc_layers;
    dc.dec_layers = cfg.disc_dec_layers;
    dc.condition_text = cfg.disc_condition_text;
    dc.condition_speaker = cfg.disc_condition_speaker;
    Rng disc_rng = Rng::substream(cfg.seed, "init.disc_acoustic");
    m.disc_acoustic.emplace(dc, disc_rng);
    m.disc_acoustic->collect_params("disc_acoustic", m.discriminator_params);
  }
  if (cfg.use_prosodic_disc) {
    auto dc = DiscriminatorConfig::prosodic_defaults(m.gen_cfg.prosody_dim, m.gen_cfg.vocab,
                                                     m.gen_cfg.speaker_dim);
    dc.enc_layers = cfg.disc_enc_layers;
    dc.dec_layers = cfg.disc_dec_layers;
    dc.condition_text = cfg.disc_condition_text;
    dc.condition_speaker = cfg.disc_condition_speaker;
    Rng disc_rng = Rng::substream(cfg.seed, "init.disc_prosodic");
    m.disc_prosodic.emplace(dc, disc_rng);
    m.disc_prosodic->collect_params("disc_prosodic", m.discriminator_params);
  }
  return m;
}

// ---------------------------------------------------------------------------
// named parameter table: "M2PT", count u32, {name_len u32, name, M2T1 blob}
// ---------------------------------------------------------------------------

void save_param_table(const ParamMap& table, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  os.write("M2PT", 4);
  detail::write_u32(os, static_cast<uint32_t>(table.items.size()));
  for (const auto& [name, t] : table.items) {
    detail::write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    save_tensor(os, t);
  }
  if (!os) throw DataError("checkpoint: write failed for '" + path + "'");
}

ParamMap load_param_table(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "M2PT", 4) != 0) {
    throw DataError("checkpoint: bad magic in '" + path + "'");
  }
  uint32_t count = detail::read_u32(is);
  ParamMap table;
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t len = detail::read_u32(is);
    std::string name(len, '\0');
    is.read(name.data(), len);
    if (!is) throw DataError("checkpoint: truncated name in '" + path + "'");
    table.add(name, load_tensor<float>(is));
  }
  return table;
}

void write_param_manifest(const ParamMap& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("manifest: cannot open '" + path + "' for writing");
  for (const auto& [name, t] : params.items) {
    os << name << ' ';
    const auto& s = t.shape();
    if (s.empty()) os << "scalar";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) os << 'x';
      os << s[i];
    }
    os << '\n';
  }
}

void assign_params(ParamMap& dst, const ParamMap& src) {
  for (auto& [name, t] : dst.items) {
    const auto* loaded = src.find(name);
    if (!loaded) throw DataError("checkpoint: missing parameter '" + name + "'");
    if (loaded->shape() != t.shape()) {
      throw DataError("checkpoint: shape mismatch for '" + name + "': file has " +
                      shape_str(loaded->shape()) + ", model has " + shape_str(t.shape()));
    }
    t.values() = loaded->values();
  }
}

// ---------------------------------------------------------------------------
// trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& cfg, const Corpus& corpus) : cfg_(cfg), corpus_(corpus) {
  models_ = build_models(cfg_, corpus.spec);
  gen_opt_ = AdamW(models_.generator_params, cfg_.beta1, cfg_.beta2, cfg_.weight_decay);
  disc_opt_ = AdamW(models_.discriminator_params, cfg_.beta1, cfg_.beta2, cfg_.weight_decay);
  batches_ = make_batches(corpus, corpus.train_indices(), cfg_.max_frames_per_batch);
  threads_ = cfg_.threads > 0 ? cfg_.threads
                              : std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct SlotState {
  TokenSequence tokens;
  Tensor speaker;
  Tensor truth_frames;
  GeneratorOutputT<float> gen_out;
  ProsodicFeatures truth_prosody;  // constants + detached reference embedding
  Tensor l_ga, l_gp;
  double l_da = 0, l_dp = 0, l_aa = 0, l_ap = 0;
  double l_ga_v = 0, l_gp_v = 0;
  GradStoreT<float> disc_store;
  GradStoreT<float> gen_store;
};

void merge_store(const ParamMap& params, const GradStoreT<float>& store) {
  for (const auto& [name, p] : params.items) {
    const auto* g = store.find(p.node());
    if (!g) continue;
    auto& grad = p.node()->grad;
    if (grad.empty()) {
      grad = *g;
    } else {
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += (*g)[i];
    }
  }
}

}  // namespace

LossBundle Trainer::step_batch(const Batch& batch, int epoch, long step_in_epoch,
                               long global_step, int stage) {
  const int b = static_cast<int>(batch.record_indices.size());
  const float inv_b = 1.0f / static_cast<float>(b);
  const double lr = lr_at(step_in_epoch, cfg_.lr_peak, cfg_.warmup_steps);
  const bool has_disc = models_.disc_acoustic.has_value() || models_.disc_prosodic.has_value();
  const auto eu = static_cast<uint64_t>(epoch);
  const auto su = static_cast<uint64_t>(global_step);

  std::vector<SlotState> slots(static_cast<std::size_t>(b));

  // generator forward (teacher-forced) + discriminator step backward
  parallel_for(b, threads_, [&](int s) {
    auto& slot = slots[static_cast<std::size_t>(s)];
    const auto& rec = corpus_.records[static_cast<std::size_t>(batch.record_indices[s])];
    const auto slotu = static_cast<uint64_t>(s);

    slot.tokens = TokenSequence{rec.token_ids};
    slot.speaker = speaker_embed<float>(rec.speaker_id, models_.gen_cfg.speaker_dim);
    slot.truth_frames =
        Tensor::from_data({rec.n_frames, rec.mel_dim}, rec.frames);

    TeacherSignalsT<float> teacher;
    teacher.durations = rec.durations;
    teacher.pitch = Tensor::from_data({rec.n_tokens()}, rec.pitch);
    teacher.energy = Tensor::from_data({rec.n_tokens()}, rec.energy);
    teacher.reference_frames = slot.truth_frames;

    Rng gen_rng = Rng::substream(cfg_.seed, "dropout.gen", {eu, su, slotu});
    slot.gen_out = models_.generator.synthesize(slot.tokens, slot.speaker,
                                                SynthesisMode::kTeacherForced, &teacher, gen_rng,
                                                /*training=*/true);

    slot.l_ga = gen_acoustic_loss(slot.gen_out.frames, slot.truth_frames);
    slot.l_ga_v = static_cast<double>(slot.l_ga.item());

    std::vector<float> log_dur(rec.durations.size());
    for (std::size_t i = 0; i < log_dur.size(); ++i)
      log_dur[i] = std::log(static_cast<float>(rec.durations[i]));
    slot.truth_prosody.pitch = teacher.pitch;
    slot.truth_prosody.energy = teacher.energy;
    slot.truth_prosody.duration = Tensor::from_data({rec.n_tokens()}, std::move(log_dur));
    // target detached: the predictor chases the prosody encoder, not vice versa
    slot.truth_prosody.embedding = slot.gen_out.reference_prosody.detach();

    slot.l_gp = gen_prosodic_loss(slot.gen_out.predicted, slot.truth_prosody);
    slot.l_gp_v = static_cast<double>(slot.l_gp.item());

    if (!has_disc) return;

    // Eq. 8 on value-detached generator outputs; gradients cannot reach the
    // generator from here.
    Tensor l_d_total;
    if (models_.disc_acoustic) {
      Rng rng = Rng::substream(cfg_.seed, "dropout.disc_a", {eu, su, slotu});
      auto s_real = models_.disc_acoustic->score_acoustic_full(slot.truth_frames, slot.tokens,
                                                               &slot.speaker, rng, true);
      auto s_fake = models_.disc_acoustic->score_acoustic_full(slot.gen_out.frames.detach(),
                                                               slot.tokens, &slot.speaker, rng,
                                                               true);
      auto l_da = hinge_discriminator_loss(s_real, s_fake);
      slot.l_da = static_cast<double>(l_da.item());
      l_d_total = l_da;
    }
    if (models_.disc_prosodic) {
      Rng rng = Rng::substream(cfg_.seed, "dropout.disc_p", {eu, su, slotu});
      ProsodicFeatures fake;
      fake.pitch = slot.gen_out.predicted.pitch.detach();
      fake.energy = slot.gen_out.predicted.energy.detach();
      fake.duration = slot.gen_out.predicted.duration.detach();
      fake.embedding = slot.gen_out.predicted.embedding.detach();
      auto s_real = models_.disc_prosodic->score_prosodic_full(slot.truth_prosody, slot.tokens,
                                                               &slot.speaker, rng, true);
      auto s_fake =
          models_.disc_prosodic->score_prosodic_full(fake, slot.tokens, &slot.speaker, rng, true);
      auto l_dp = hinge_discriminator_loss(s_real, s_fake);
      slot.l_dp = static_cast<double>(l_dp.item());
      l_d_total = l_d_total.defined() ? total_discriminator_loss(l_d_total, l_dp) : l_dp;
    }
    l_d_total.backward(inv_b, &slot.disc_store);
  });

  if (has_disc) {
    for (auto& slot : slots) merge_store(models_.discriminator_params, slot.disc_store);
    disc_opt_.step(lr);
    disc_opt_.zero_grad();
  }

  // generator step against the updated discriminators, which are frozen so
  // they receive zero gradient from Eq. 7
  {
    ParamFreezeT<float> freeze(models_.discriminator_params);
    const bool adv_a = cfg_.acoustic_adversarial_on(stage) && models_.disc_acoustic.has_value();
    const bool adv_p = cfg_.prosodic_adversarial_on(stage) && models_.disc_prosodic.has_value();
    parallel_for(b, threads_, [&](int s) {
      auto& slot = slots[static_cast<std::size_t>(s)];
      const auto slotu = static_cast<uint64_t>(s);
      Tensor l_aa = Tensor::scalar(0);
      Tensor l_ap = Tensor::scalar(0);
      if (adv_a) {
        Rng rng = Rng::substream(cfg_.seed, "dropout.adv_a", {eu, su, slotu});
        auto s_fake = models_.disc_acoustic->score_acoustic_full(slot.gen_out.frames, slot.tokens,
                                                                 &slot.speaker, rng, true);
        l_aa = adv_generator_loss(s_fake);
        slot.l_aa = static_cast<double>(l_aa.item());
      }
      if (adv_p) {
        Rng rng = Rng::substream(cfg_.seed, "dropout.adv_p", {eu, su, slotu});
        auto s_fake = models_.disc_prosodic->score_prosodic_full(slot.gen_out.predicted,
                                                                 slot.tokens, &slot.speaker, rng,
                                                                 true);
        l_ap = adv_generator_loss(s_fake);
        slot.l_ap = static_cast<double>(l_ap.item());
      }
      auto total = total_generator_loss(slot.l_ga, slot.l_gp, l_aa, l_ap,
                                        static_cast<float>(cfg_.lambda_a));
      total.backward(inv_b, &slot.gen_store);
    });
    for (auto& slot : slots) merge_store(models_.generator_params, slot.gen_store);
  }

  LossBundle bundle;
  bundle.step = global_step;
  bundle.stage = stage;
  bundle.lambda_a = cfg_.lambda_a;
  bundle.lr = lr;
  for (const auto& slot : slots) {
    bundle.l_ga += slot.l_ga_v;
    bundle.l_gp += slot.l_gp_v;
    bundle.l_aa += slot.l_aa;
    bundle.l_ap += slot.l_ap;
    bundle.l_da += slot.l_da;
    bundle.l_dp += slot.l_dp;
  }
  bundle.l_ga /= b;
  bundle.l_gp /= b;
  bundle.l_aa /= b;
  bundle.l_ap /= b;
  bundle.l_da /= b;
  bundle.l_dp /= b;

  if (bundle.generator_total() > cfg_.divergence_guard) {
    throw DivergenceError("training diverged at step " + std::to_string(global_step) +
                          ": generator total " + std::to_string(bundle.generator_total()) +
                          " exceeds guard " + std::to_string(cfg_.divergence_guard));
  }

  gen_opt_.step(lr);
  gen_opt_.zero_grad();
  return bundle;
}

EpochReport Trainer::train_epoch(int epoch) {
  EpochReport report;
  report.epoch = epoch;
  report.stage = cfg_.stage_for_epoch(epoch);

  std::vector<int> order(batches_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng shuffle = Rng::substream(cfg_.seed, "shuffle", {static_cast<uint64_t>(epoch)});
  for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(shuffle.uniform_int(0, i))]);
  }

  long base_step = static_cast<long>(epoch - 1) * static_cast<long>(batches_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    long step_in_epoch = static_cast<long>(i) + 1;
    report.steps.push_back(step_batch(batches_[static_cast<std::size_t>(order[i])], epoch,
                                      step_in_epoch, base_step + step_in_epoch, report.stage));
  }
  return report;
}

void Trainer::save_checkpoint(const std::string& path) const {
  ParamMap table = models_.all_params();
  gen_opt_.collect_state("opt.gen", table);
  disc_opt_.collect_state("opt.disc", table);
  save_param_table(table, path);
  write_param_manifest(models_.all_params(), path + ".manifest.txt");
}

void Trainer::load_checkpoint(const std::string& path) {
  ParamMap table = load_param_table(path);
  ParamMap model_params = models_.all_params();
  assign_params(model_params, table);
  gen_opt_.load_state("opt.gen", table);
  disc_opt_.load_state("opt.disc", table);
}

TrainResult Trainer::run(const std::string& out_dir, int resume_from_epoch) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  TrainResult result;

  if (resume_from_epoch > 0) {
    load_checkpoint(out_dir + "/checkpoint_epoch" + std::to_string(resume_from_epoch) + ".m2t");
  }

  for (int epoch = resume_from_epoch + 1; epoch <= cfg_.epochs; ++epoch) {
    result.epochs.push_back(train_epoch(epoch));
    std::string ckpt = out_dir + "/checkpoint_epoch" + std::to_string(epoch) + ".m2t";
    save_checkpoint(ckpt);
    result.checkpoint_paths.push_back(ckpt);
  }
  if (!result.checkpoint_paths.empty()) result.final_checkpoint = result.checkpoint_paths.back();

  result.loss_csv_path = out_dir + "/loss.csv";
  std::ofstream csv(result.loss_csv_path, std::ios::binary);
  if (!csv) throw DataError("training: cannot open '" + result.loss_csv_path + "' for writing");
  write_loss_csv(result.epochs, csv);
  return result;
}

std::string loss_csv_line(const LossBundle& b) {
  std::ostringstream os;
  os << b.step << ',' << b.stage << ',' << fmt_value(b.l_ga) << ',' << fmt_value(b.l_gp) << ','
     << fmt_value(b.l_aa) << ',' << fmt_value(b.l_ap) << ',' << fmt_value(b.l_da) << ','
     << fmt_value(b.l_dp) << ',' << fmt_value(b.lr);
  return os.str();
}

void write_loss_csv(const std::vector<EpochReport>& epochs, std::ostream& os) {
  os << LossBundle::csv_header() << '\n';
  for (const auto& e : epochs)
    for (const auto& s : e.steps) os << loss_csv_line(s) << '\n';
}

}  // namespace m2gan
