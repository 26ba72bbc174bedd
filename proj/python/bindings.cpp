#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <filesystem>

#include "m2gan/cli.hpp"
#include "m2gan/experiment.hpp"

namespace py = pybind11;
using namespace m2gan;

namespace {

Tensor tensor_1d(const std::vector<float>& v) {
  return Tensor::from_data({static_cast<int>(v.size())}, v);
}

Tensor tensor_2d(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) throw std::invalid_argument("empty matrix");
  int r = static_cast<int>(rows.size());
  int c = static_cast<int>(rows[0].size());
  std::vector<float> flat;
  flat.reserve(static_cast<std::size_t>(r) * c);
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) throw std::invalid_argument("ragged matrix");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor::from_data({r, c}, std::move(flat));
}

CorpusSpec spec_from_kwargs(const py::kwargs& kwargs) {
  CorpusSpec spec;
  for (auto item : kwargs) {
    std::string key = py::cast<std::string>(item.first);
    if (key == "vocab_size") spec.vocab_size = py::cast<int>(item.second);
    else if (key == "n_speakers") spec.n_speakers = py::cast<int>(item.second);
    else if (key == "n_test_speakers") spec.n_test_speakers = py::cast<int>(item.second);
    else if (key == "n_utterances") spec.n_utterances = py::cast<int>(item.second);
    else if (key == "mel_dim") spec.mel_dim = py::cast<int>(item.second);
    else if (key == "seed") spec.seed = py::cast<uint64_t>(item.second);
    else if (key == "style_std") spec.style_std = py::cast<double>(item.second);
    else if (key == "digit_injection_p") spec.digit_injection_p = py::cast<double>(item.second);
    else throw std::invalid_argument("unknown corpus spec field '" + key + "'");
  }
  return spec;
}

py::dict report_to_dict(const EvalReport& r) {
  py::dict d;
  d["pitch_std_mean"] = r.pitch_std_mean;
  d["speaker_sim_mean"] = r.speaker_sim_mean;
  d["recon_mae_mean"] = r.recon_mae_mean;
  d["gt_pitch_std_mean"] = r.gt_pitch_std_mean;
  d["gt_speaker_sim_mean"] = r.gt_speaker_sim_mean;
  d["ref_speaker_sim_mean"] = r.ref_speaker_sim_mean;
  d["variance_ratio"] = r.variance_ratio;
  d["embedder_train_accuracy"] = r.embedder_train_accuracy;
  d["n_rows"] = r.rows.size();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "adversarially trained desk-scale acoustic model: core operations";

  m.def("filter_numerals", &filter_numerals, py::arg("text"),
        "true iff the text contains no Unicode decimal digit (keep rule)");

  m.def("lr_at", &lr_at, py::arg("step_in_epoch"), py::arg("lr_peak") = 0.002,
        py::arg("warmup_steps") = 200,
        "warmup-restarted schedule; attains lr_peak exactly at step == warmup_steps");

  m.def(
      "gen_acoustic_loss",
      [](const std::vector<std::vector<float>>& pred, const std::vector<std::vector<float>>& truth) {
        return static_cast<double>(gen_acoustic_loss(tensor_2d(pred), tensor_2d(truth)).item());
      },
      py::arg("pred"), py::arg("truth"), "mean absolute error over frames");

  m.def(
      "adv_generator_loss",
      [](const std::vector<float>& scores) {
        return static_cast<double>(adv_generator_loss(tensor_1d(scores)).item());
      },
      py::arg("scores_fake"), "negative mean of per-frame fake scores");

  m.def(
      "hinge_discriminator_loss",
      [](const std::vector<float>& real, const std::vector<float>& fake) {
        return static_cast<double>(
            hinge_discriminator_loss(tensor_1d(real), tensor_1d(fake)).item());
      },
      py::arg("scores_real"), py::arg("scores_fake"),
      "per-frame conditional hinge, mean-aggregated");

  m.def(
      "total_generator_loss",
      [](double l_ga, double l_gp, double l_aa, double l_ap, double lambda_a) {
        return static_cast<double>(total_generator_loss(Tensor::scalar(static_cast<float>(l_ga)),
                                                        Tensor::scalar(static_cast<float>(l_gp)),
                                                        Tensor::scalar(static_cast<float>(l_aa)),
                                                        Tensor::scalar(static_cast<float>(l_ap)),
                                                        static_cast<float>(lambda_a))
                                       .item());
      },
      py::arg("l_ga"), py::arg("l_gp"), py::arg("l_aa"), py::arg("l_ap"),
      py::arg("lambda_a") = 0.1);

  m.def(
      "pitch_std",
      [](const std::vector<float>& pitch) { return pitch_std(std::span<const float>(pitch)); },
      py::arg("pitch"), "population standard deviation");

  m.def(
      "generate_corpus",
      [](const std::string& out_path, const py::kwargs& kwargs) {
        Corpus corpus = generate_corpus(spec_from_kwargs(kwargs));
        save_records(corpus, out_path);
        py::dict d;
        d["n_records"] = corpus.records.size();
        d["n_dropped_by_filter"] = corpus.n_dropped_by_filter;
        d["n_train"] = corpus.train_indices().size();
        d["n_test"] = corpus.test_indices().size();
        d["hash"] = corpus_hash(corpus);
        return d;
      },
      py::arg("out_path"), "generate and save a synthetic corpus");

  m.def(
      "train",
      [](const std::string& corpus_path, const std::string& out_dir, const std::string& preset,
         int epochs, long warmup_steps, long max_frames_per_batch, uint64_t seed, int threads) {
        TrainConfig cfg;
        apply_preset(cfg, parse_preset(preset));
        cfg.epochs = epochs;
        cfg.warmup_steps = warmup_steps;
        cfg.max_frames_per_batch = max_frames_per_batch;
        cfg.seed = seed;
        cfg.threads = threads;
        Corpus corpus = load_records(corpus_path);
        auto result = run_experiment(preset, cfg, corpus, out_dir);
        py::dict d = report_to_dict(result.eval);
        d["checkpoints"] = result.train.checkpoint_paths;
        d["loss_csv"] = result.train.loss_csv_path;
        return d;
      },
      py::arg("corpus_path"), py::arg("out_dir"), py::arg("preset") = "proposed",
      py::arg("epochs") = 3, py::arg("warmup_steps") = 200,
      py::arg("max_frames_per_batch") = 2000, py::arg("seed") = 1234, py::arg("threads") = 0,
      "full staged training run plus evaluation");

  m.def(
      "evaluate",
      [](const std::string& checkpoint, const std::string& corpus_path, int threads) {
        Corpus corpus = load_records(corpus_path);
        namespace fs = std::filesystem;
        std::string config_path =
            (fs::path(checkpoint).parent_path() / "config.txt").string();
        TrainingModels models = load_models_for_eval(checkpoint, config_path, corpus);
        auto embedder = train_eval_embedder(corpus, corpus.spec.seed, threads);
        return report_to_dict(evaluate(models.generator, corpus, embedder, threads));
      },
      py::arg("checkpoint"), py::arg("corpus_path"), py::arg("threads") = 0,
      "evaluate a checkpoint on the unseen-speaker test split");

  m.def(
      "run_cli", [](const std::vector<std::string>& args) {
        std::vector<const char*> argv;
        argv.push_back("m2gan");
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"), "invoke the command-line interface in-process");
}
