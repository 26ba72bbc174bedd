#include "m2gan/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
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

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  int w = std::min(threads, n);
  if (w <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
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

double pitch_std(std::span<const float> pitch) {
  if (pitch.size() < 2) {
    throw std::invalid_argument("pitch_std: needs at least 2 values, got " +
                                std::to_string(pitch.size()));
  }
  double mean = 0;
  for (float v : pitch) mean += v;
  mean /= static_cast<double>(pitch.size());
  double var = 0;
  for (float v : pitch) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(pitch.size()));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---------------------------------------------------------------------------
// evaluation embedder
// ---------------------------------------------------------------------------

EvalEmbedder::EvalEmbedder(int mel_dim, int embed_dim, int n_classes, Rng& rng)
    : embed_dim_(embed_dim), n_classes_(n_classes) {
  frame_proj_ = LinearT<float>(mel_dim, embed_dim, rng);
  hidden_ = LinearT<float>(embed_dim, embed_dim, rng);
  classifier_ = LinearT<float>(embed_dim, n_classes, rng);
}

Tensor EvalEmbedder::forward_normalized(const Tensor& frames) const {
  auto h = relu(frame_proj_.forward(frames));     // [T x E]
  auto pooled = mean_axis(h, 0);                  // [1 x E]
  auto z = relu(hidden_.forward(pooled));
  auto norm = sqrt(add_const(sum(square(z)), 1e-12f));
  return div(z, norm);
}

Tensor EvalEmbedder::logits(const Tensor& normalized) const {
  return classifier_.forward(normalized);
}

std::vector<double> EvalEmbedder::embed(const Tensor& frames) const {
  NoGradGuard no_grad;
  auto z = forward_normalized(frames);
  return std::vector<double>(z.values().begin(), z.values().end());
}

void EvalEmbedder::collect_params(const std::string& prefix, ParamMap& out) const {
  frame_proj_.collect(prefix + ".frame_proj", out);
  hidden_.collect(prefix + ".hidden", out);
  classifier_.collect(prefix + ".classifier", out);
}

EvalEmbedder train_eval_embedder(const Corpus& corpus, uint64_t seed, int threads) {
  auto train_idx = corpus.train_indices();
  if (train_idx.empty()) throw DataError("eval embedder: corpus has no training utterances");
  int n_classes = corpus.spec.first_test_speaker();
  if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());

  Rng init = Rng::substream(seed, "eval_embedder.init");
  EvalEmbedder emb(corpus.spec.mel_dim, 64, n_classes, init);
  ParamMap params;
  emb.collect_params("eval_embedder", params);
  AdamW opt(params, 0.9, 0.999, 0.0);

  auto frames_tensor = [&](const UtteranceRecord& r) {
    return Tensor::from_data({r.n_frames, r.mel_dim}, r.frames);
  };

  auto accuracy = [&]() {
    std::vector<char> hit(train_idx.size(), 0);
    parallel_for(static_cast<int>(train_idx.size()), threads, [&](int i) {
      NoGradGuard no_grad;
      const auto& rec = corpus.records[static_cast<std::size_t>(train_idx[static_cast<std::size_t>(i)])];
      auto z = emb.forward_normalized(frames_tensor(rec));
      auto lg = emb.logits(z);
      const auto& v = lg.values();
      int best = 0;
      for (int c = 1; c < n_classes; ++c)
        if (v[static_cast<std::size_t>(c)] > v[static_cast<std::size_t>(best)]) best = c;
      if (best == rec.speaker_id) hit[static_cast<std::size_t>(i)] = 1;
    });
    int total = 0;
    for (char h : hit) total += h;
    return static_cast<double>(total) / static_cast<double>(train_idx.size());
  };

  Rng shuffle = Rng::substream(seed, "eval_embedder.shuffle");
  std::vector<int> order = train_idx;
  const int kBatch = 32;
  const int kMaxEpochs = 40;
  double acc = 0;
  for (int epoch = 0; epoch < kMaxEpochs; ++epoch) {
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
      std::swap(order[static_cast<std::size_t>(i)],
                order[static_cast<std::size_t>(shuffle.uniform_int(0, i))]);
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      std::size_t end = std::min(order.size(), start + kBatch);
      int b = static_cast<int>(end - start);
      std::vector<GradStoreT<float>> stores(static_cast<std::size_t>(b));
      parallel_for(b, threads, [&](int k) {
        const auto& rec = corpus.records[static_cast<std::size_t>(order[start + static_cast<std::size_t>(k)])];
        auto z = emb.forward_normalized(frames_tensor(rec));
        auto lg = emb.logits(z);
        auto ce = neg(mean(select_index(log_softmax(lg, 1), {rec.speaker_id})));
        ce.backward(1.0f / static_cast<float>(b), &stores[static_cast<std::size_t>(k)]);
      });
      for (auto& store : stores) {
        for (const auto& [name, p] : params.items) {
          const auto* g = store.find(p.node());
          if (!g) continue;
          auto& grad = p.node()->grad;
          if (grad.empty()) grad = *g;
          else
            for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += (*g)[j];
        }
      }
      opt.step(1e-3);
      opt.zero_grad();
    }
    acc = accuracy();
    if (acc >= 0.95) break;
  }
  emb.set_train_accuracy(acc);
  return emb;
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

EvalReport evaluate(const Generator& generator, const Corpus& corpus,
                    const EvalEmbedder& embedder, int threads) {
  if (threads <= 0) threads = std::max(1u, std::thread::hardware_concurrency());

  // group test utterances per speaker, ordered by utterance id
  std::map<int, std::vector<int>> by_speaker;
  for (int idx : corpus.test_indices())
    by_speaker[corpus.records[static_cast<std::size_t>(idx)].speaker_id].push_back(idx);

  EvalReport report;
  report.embedder_train_accuracy = embedder.train_accuracy();

  struct Task {
    int record_idx;
    int reference_idx;
  };
  std::vector<Task> tasks;
  for (auto& [spk, utts] : by_speaker) {
    if (utts.size() < 2) {
      ++report.skipped_speakers;
      std::cerr << "warning: test speaker " << spk
                << " has a single utterance; skipped (reference pairing needs two)\n";
      continue;
    }
    std::sort(utts.begin(), utts.end(), [&](int a, int b) {
      return corpus.records[static_cast<std::size_t>(a)].utterance_id <
             corpus.records[static_cast<std::size_t>(b)].utterance_id;
    });
    for (std::size_t i = 0; i < utts.size(); ++i) {
      tasks.push_back({utts[i], utts[(i + 1) % utts.size()]});  // always a different utterance
    }
  }

  struct RowExtra {
    EvalRow row;
    double gt_pitch_std = 0, gt_sim = 0, ref_pitch_std = 0, ref_sim = 0;
  };
  std::vector<RowExtra> results(tasks.size());

  parallel_for(static_cast<int>(tasks.size()), threads, [&](int i) {
    NoGradGuard no_grad;
    const auto& task = tasks[static_cast<std::size_t>(i)];
    const auto& rec = corpus.records[static_cast<std::size_t>(task.record_idx)];
    const auto& ref = corpus.records[static_cast<std::size_t>(task.reference_idx)];
    auto& out = results[static_cast<std::size_t>(i)];

    TokenSequence tokens{rec.token_ids};
    auto spk = speaker_embed<float>(rec.speaker_id, generator.config().speaker_dim);
    Rng dummy = Rng::substream(corpus.spec.seed, "eval.unused");

    auto synth = generator.synthesize(tokens, spk, SynthesisMode::kInference, nullptr, dummy,
                                      /*training=*/false);

    TeacherSignalsT<float> teacher;
    teacher.durations = rec.durations;
    teacher.pitch = Tensor::from_data({rec.n_tokens()}, rec.pitch);
    teacher.energy = Tensor::from_data({rec.n_tokens()}, rec.energy);
    teacher.reference_frames = Tensor::from_data({rec.n_frames, rec.mel_dim}, rec.frames);
    auto forced = generator.synthesize(tokens, spk, SynthesisMode::kTeacherForced, &teacher,
                                       dummy, /*training=*/false);

    double mae = 0;
    for (std::size_t j = 0; j < rec.frames.size(); ++j)
      mae += std::abs(static_cast<double>(forced.frames.values()[j]) - rec.frames[j]);
    mae /= static_cast<double>(rec.frames.size());

    auto gt_frames = Tensor::from_data({rec.n_frames, rec.mel_dim}, rec.frames);
    auto ref_frames = Tensor::from_data({ref.n_frames, ref.mel_dim}, ref.frames);
    auto e_synth = embedder.embed(synth.frames);
    auto e_gt = embedder.embed(gt_frames);
    auto e_ref = embedder.embed(ref_frames);

    out.row.utterance_id = rec.utterance_id;
    out.row.speaker_id = rec.speaker_id;
    out.row.pitch_std = pitch_std(synth.predicted.pitch.values());
    out.row.speaker_sim = cosine_similarity(e_synth, e_ref);
    out.row.recon_mae = mae;
    out.gt_pitch_std = pitch_std(rec.pitch);
    out.gt_sim = cosine_similarity(e_gt, e_ref);
    out.ref_pitch_std = pitch_std(ref.pitch);
    out.ref_sim = cosine_similarity(e_ref, e_ref);
  });

  std::sort(results.begin(), results.end(),
            [](const RowExtra& a, const RowExtra& b) {
              return a.row.utterance_id < b.row.utterance_id;
            });

  for (const auto& r : results) {
    report.rows.push_back(r.row);
    report.pitch_std_mean += r.row.pitch_std;
    report.speaker_sim_mean += r.row.speaker_sim;
    report.recon_mae_mean += r.row.recon_mae;
    report.gt_pitch_std_mean += r.gt_pitch_std;
    report.gt_speaker_sim_mean += r.gt_sim;
    report.ref_pitch_std_mean += r.ref_pitch_std;
    report.ref_speaker_sim_mean += r.ref_sim;
  }
  if (!results.empty()) {
    double n = static_cast<double>(results.size());
    report.pitch_std_mean /= n;
    report.speaker_sim_mean /= n;
    report.recon_mae_mean /= n;
    report.gt_pitch_std_mean /= n;
    report.gt_speaker_sim_mean /= n;
    report.ref_pitch_std_mean /= n;
    report.ref_speaker_sim_mean /= n;
  }
  report.variance_ratio =
      report.gt_pitch_std_mean > 0 ? report.pitch_std_mean / report.gt_pitch_std_mean : 0;
  return report;
}

// ---------------------------------------------------------------------------
// report files. Units note: pitch is in the corpus's normalized scale, not
// Hz; only ratios and orderings are comparable across systems.
// ---------------------------------------------------------------------------

void write_eval_csv(const EvalReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("eval: cannot open '" + path + "' for writing");
  os << "# pitch_std in normalized corpus units (not Hz); ratios/orderings transfer\n";
  os << "utterance_id,speaker_id,pitch_std,speaker_sim,recon_mae\n";
  for (const auto& r : report.rows) {
    os << r.utterance_id << ',' << r.speaker_id << ',' << fmt_value(r.pitch_std) << ','
       << fmt_value(r.speaker_sim) << ',' << fmt_value(r.recon_mae) << '\n';
  }
}

void write_eval_summary(const EvalReport& report, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("eval: cannot open '" + path + "' for writing");
  os << "pitch_std_mean=" << fmt_value(report.pitch_std_mean) << "\n";
  os << "speaker_sim_mean=" << fmt_value(report.speaker_sim_mean) << "\n";
  os << "recon_mae_mean=" << fmt_value(report.recon_mae_mean) << "\n";
  os << "gt_pitch_std_mean=" << fmt_value(report.gt_pitch_std_mean) << "\n";
  os << "gt_speaker_sim_mean=" << fmt_value(report.gt_speaker_sim_mean) << "\n";
  os << "ref_pitch_std_mean=" << fmt_value(report.ref_pitch_std_mean) << "\n";
  os << "ref_speaker_sim_mean=" << fmt_value(report.ref_speaker_sim_mean) << "\n";
  os << "variance_ratio=" << fmt_value(report.variance_ratio) << "\n";
  os << "skipped_speakers=" << report.skipped_speakers << "\n";
  os << "embedder_train_accuracy=" << fmt_value(report.embedder_train_accuracy) << "\n";
  os << "n_rows=" << report.rows.size() << "\n";
}

EvalReport load_eval_summary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("report: cannot open eval summary '" + path + "'");
  EvalReport r;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("report: bad summary line '" + line + "'");
    std::string key = line.substr(0, eq);
    double val = std::stod(line.substr(eq + 1));
    if (key == "pitch_std_mean") r.pitch_std_mean = val;
    else if (key == "speaker_sim_mean") r.speaker_sim_mean = val;
    else if (key == "recon_mae_mean") r.recon_mae_mean = val;
    else if (key == "gt_pitch_std_mean") r.gt_pitch_std_mean = val;
    else if (key == "gt_speaker_sim_mean") r.gt_speaker_sim_mean = val;
    else if (key == "ref_pitch_std_mean") r.ref_pitch_std_mean = val;
    else if (key == "ref_speaker_sim_mean") r.ref_speaker_sim_mean = val;
    else if (key == "variance_ratio") r.variance_ratio = val;
    else if (key == "skipped_speakers") r.skipped_speakers = static_cast<int>(val);
    else if (key == "embedder_train_accuracy") r.embedder_train_accuracy = val;
    else if (key == "n_rows") { /* informational */ }
    else throw DataError("report: unknown summary key '" + key + "'");
  }
  return r;
}

}  // namespace m2gan
