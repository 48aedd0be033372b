#include "commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nlr/config.hpp"
#include "nlr/dataset.hpp"
#include "nlr/encoder.hpp"
#include "nlr/metrics.hpp"
#include "nlr/trainer.hpp"

namespace nlr::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoFailure("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoFailure("cannot write " + path.string());
  os << text;
  if (!os) throw IoFailure("write failed for " + path.string());
}

void prepare_output(const fs::path& dir, const std::vector<fs::path>& products, bool force) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create output directory " + dir.string() + ": " + ec.message());
  if (force) return;
  for (const auto& p : products)
    if (fs::exists(dir / p)) throw IoFailure((dir / p).string() + " already exists; pass --force to overwrite");
}

// --- gen-data ----------------------------------------------------------------

struct GenDataOptions {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool force = false;
};

int gen_data(const GenDataOptions& opt, std::ostream& out) {
  const json doc = json::parse(read_text(opt.config), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ConfigError("<document>", "invalid JSON object");
  json spec_part = doc;
  double noise_ratio = 0.0;
  std::uint64_t noise_seed = 0;
  if (doc.contains("noise_ratio")) {
    if (!doc["noise_ratio"].is_number()) throw ConfigError("noise_ratio", "expected a number");
    noise_ratio = doc["noise_ratio"].get<double>();
    spec_part.erase("noise_ratio");
  }
  if (doc.contains("noise_seed")) {
    if (!doc["noise_seed"].is_number_unsigned()) throw ConfigError("noise_seed", "expected a non-negative integer");
    noise_seed = doc["noise_seed"].get<std::uint64_t>();
    spec_part.erase("noise_seed");
  }
  if (!(noise_ratio >= 0.0 && noise_ratio < 1.0)) throw ConfigError("noise_ratio", "must lie in [0, 1)");

  Corpus corpus;
  corpus.spec = corpus_spec_from_json(spec_part.dump());
  if (opt.seed) corpus.spec.seed = *opt.seed;
  if (!doc.contains("noise_seed")) noise_seed = derive_seed(corpus.spec.seed, 0x6e6f697365ULL);
  corpus.noise_ratio = noise_ratio;
  corpus.samples = generate(corpus.spec);
  const auto mask = inject_noise(corpus.samples, corpus.spec.n_classes, noise_ratio, noise_seed);

  const fs::path dir(opt.out);
  prepare_output(dir, {"corpus.nlpc", "corpus_config.json"}, opt.force);
  save_corpus(corpus, dir / "corpus.nlpc");
  json effective = json::parse(corpus_spec_to_json(corpus.spec));
  effective["noise_ratio"] = noise_ratio;
  effective["noise_seed"] = noise_seed;
  write_text(dir / "corpus_config.json", effective.dump(2) + "\n");

  const auto n_flipped = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  out << "wrote " << (dir / "corpus.nlpc").string() << ": " << corpus.samples.size() << " samples, "
      << corpus.spec.n_classes << " classes\n";
  for (std::size_t c = 0; c < corpus.spec.n_classes; ++c) {
    std::size_t flipped_from = 0;
    for (const auto& s : corpus.samples)
      if (s.true_label == c && s.flipped) ++flipped_from;
    out << "  class " << c << ": " << corpus.spec.samples_per_class[c] << " samples, " << flipped_from
        << " flipped away\n";
  }
  out << "noise: ratio " << noise_ratio << ", " << n_flipped << " of " << corpus.samples.size() << " labels flipped\n";
  return kOk;
}

// --- train -------------------------------------------------------------------

struct TrainOptions {
  std::string config;
  std::string corpus;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  bool force = false;
  bool baseline = false;
};

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return run_config_from_json(read_text(path));
}

int train(const TrainOptions& opt, std::ostream& out) {
  RunConfig config = load_run_config(opt.config);
  if (!opt.corpus.empty()) config.corpus = opt.corpus;
  if (opt.seed) {
    config.model_seed = *opt.seed;
    config.shuffle_seed = derive_seed(*opt.seed, 1);
  }
  if (opt.baseline) config.baseline = true;
  if (config.corpus.empty()) throw ConfigError("corpus", "no corpus given (use --corpus or the config key)");
  config.validate();

  Corpus corpus = load_corpus(config.corpus);
  if (config.clip_len > corpus.spec.frames) throw ConfigError("clip_len", "exceeds the corpus frame count");

  const fs::path dir(opt.out);
  prepare_output(dir, {"log.jsonl", "metrics.json", "config.json"}, opt.force);
  fs::create_directories(dir / "checkpoints");
  write_text(dir / "config.json", run_config_to_json(config) + "\n");

  std::ofstream log(dir / "log.jsonl", std::ios::trunc);
  if (!log) throw IoFailure("cannot write " + (dir / "log.jsonl").string());

  Trainer trainer(config, std::move(corpus));
  trainer.on_epoch([&](const EpochRecord& r) {
    log << epoch_record_to_json(r) << '\n';
    log.flush();
    out << "epoch " << r.epoch << " [" << r.stage << "] loss " << r.losses.total << " val " << r.val_top1
        << " test " << r.test_top1;
    if (r.selection)
      out << " precision " << r.selection->metrics.precision << " recall " << r.selection->metrics.recall;
    out << '\n';
  });

  if (config.baseline) {
    trainer.run_baseline();
  } else {
    trainer.run_stage1();
    save_checkpoint(trainer.model(), dir / "checkpoints" / "ucrl.nlpm");
    trainer.run_warmup();
    save_checkpoint(trainer.model(), dir / "checkpoints" / "warmup.nlpm");
    trainer.run_semisup();
  }
  save_checkpoint(trainer.model(), dir / "checkpoints" / "final.nlpm");

  const auto final = trainer.final_metrics();
  write_text(dir / "metrics.json", final_metrics_to_json(final, config) + "\n");
  out << "final: val " << final.val_top1 << " test " << final.test_top1;
  if (final.selection_ran)
    out << " precision " << final.selection.precision << " recall " << final.selection.recall << " correction "
        << final.selection.correction;
  out << '\n';
  return kOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateOptions {
  std::string checkpoint;
  std::string corpus;
  std::string config;
};

int evaluate(const EvaluateOptions& opt, std::ostream& out) {
  const RunConfig config = load_run_config(opt.config);
  const EncoderModel model = load_checkpoint(opt.checkpoint);
  const Corpus corpus = load_corpus(opt.corpus);
  if (model.dims.input != corpus.spec.features || model.dims.classes != corpus.spec.n_classes)
    throw ConfigError("checkpoint", "model dimensions do not match the corpus");
  const auto val = generate_holdout(corpus.spec, config.holdout_per_class, 101);
  const auto test = generate_holdout(corpus.spec, config.holdout_per_class, 202);
  const json result = {{"train_top1", top1_accuracy(model, corpus.samples)},
                       {"val_top1", top1_accuracy(model, val)},
                       {"test_top1", top1_accuracy(model, test)}};
  out << result.dump(2) << '\n';
  return kOk;
}

// --- report ------------------------------------------------------------------

struct ReportOptions {
  std::vector<std::string> logs;
  std::string out = ".";
  bool force = false;
};

std::string fmt(const json& v) {
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(10);
    os << v.get<double>();
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

int report(const ReportOptions& opt, std::ostream& out, std::ostream& err) {
  const fs::path dir(opt.out);
  prepare_output(dir, {"epochs.csv", "per_class.csv"}, opt.force);

  std::ostringstream epochs, per_class;
  epochs << "run_id,epoch,stage,lr,gamma_u,loss_cont,loss_recon,loss_id,loss_fd,loss_ce_mix,loss_clean_ce,"
            "loss_pseudo_l2,loss_total,train_top1,val_top1,test_top1,n_clean,n_noisy,precision,recall,correction\n";
  per_class << "run_id,class,precision,recall\n";

  std::size_t skipped = 0;
  std::size_t rows = 0;
  for (std::size_t run = 0; run < opt.logs.size(); ++run) {
    const std::string run_id = opt.logs.size() == 1 ? fs::path(opt.logs[run]).parent_path().filename().string()
                                                     : "run" + std::to_string(run);
    std::ifstream is(opt.logs[run]);
    if (!is) throw IoFailure("cannot read " + opt.logs[run]);
    json last_selection;
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      const json r = json::parse(line, nullptr, false);
      if (r.is_discarded() || !r.is_object() || !r.contains("epoch") || !r.contains("loss")) {
        ++skipped;
        continue;
      }
      try {
        const json& l = r.at("loss");
        const json& s = r.at("selection");
        epochs << run_id << ',' << fmt(r.at("epoch")) << ',' << fmt(r.at("stage")) << ',' << fmt(r.at("lr")) << ','
               << fmt(r.at("gamma_u")) << ',' << fmt(l.at("cont")) << ',' << fmt(l.at("recon")) << ','
               << fmt(l.at("id")) << ',' << fmt(l.at("fd")) << ',' << fmt(l.at("ce_mix")) << ','
               << fmt(l.at("clean_ce")) << ',' << fmt(l.at("pseudo_l2")) << ',' << fmt(l.at("total")) << ','
               << fmt(r.at("train_top1")) << ',' << fmt(r.at("val_top1")) << ',' << fmt(r.at("test_top1")) << ',';
        if (s.is_null()) {
          epochs << ",,,,\n";
        } else {
          epochs << fmt(s.at("n_clean")) << ',' << fmt(s.at("n_noisy")) << ',' << fmt(s.at("precision")) << ','
                 << fmt(s.at("recall")) << ',' << fmt(s.at("correction")) << '\n';
          last_selection = s;
        }
        ++rows;
      } catch (const json::exception&) {
        ++skipped;
      }
    }
    if (last_selection.is_object()) {
      const auto& prec = last_selection.at("per_class_precision");
      const auto& rec = last_selection.at("per_class_recall");
      for (std::size_t c = 0; c < rec.size(); ++c)
        per_class << run_id << ',' << c << ',' << fmt(prec.at(c)) << ',' << fmt(rec.at(c)) << '\n';
    }
  }
  write_text(dir / "epochs.csv", epochs.str());
  write_text(dir / "per_class.csv", per_class.str());
  if (skipped) err << "warning: skipped " << skipped << " malformed log line(s)\n";
  out << "wrote " << rows << " epoch rows to " << (dir / "epochs.csv").string() << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise-robust sequence classification: data generation, training and reports", "nlr"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus with injected label noise");
  gen_cmd->add_option("--config", gen.config, "Corpus JSON (spec plus noise_ratio, noise_seed)")->required();
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--seed", gen.seed, "Override the corpus seed");
  gen_cmd->add_flag("--force", gen.force, "Overwrite existing outputs");

  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Run the three-stage training (or the baseline)");
  train_cmd->add_option("--config", tr.config, "Run configuration JSON (defaults apply to missing keys)");
  train_cmd->add_option("--corpus", tr.corpus, "Corpus file written by gen-data");
  train_cmd->add_option("--out", tr.out, "Output directory");
  train_cmd->add_option("--seed", tr.seed, "Override model and shuffle seeds");
  train_cmd->add_flag("--force", tr.force, "Overwrite existing outputs");
  train_cmd->add_flag("--baseline", tr.baseline, "Plain cross-entropy on observed labels");

  EvaluateOptions ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "Top-1 accuracy of a checkpoint on a corpus and its holdouts");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required();
  eval_cmd->add_option("--corpus", ev.corpus, "Corpus file")->required();
  eval_cmd->add_option("--config", ev.config, "Run configuration (holdout size)");

  ReportOptions rep;
  auto* report_cmd = app.add_subcommand("report", "Aggregate epoch logs into CSV tables");
  report_cmd->add_option("logs", rep.logs, "JSONL epoch logs")->required();
  report_cmd->add_option("--out", rep.out, "Output directory");
  report_cmd->add_flag("--force", rep.force, "Overwrite existing outputs");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (*gen_cmd) return gen_data(gen, out);
    if (*train_cmd) return train(tr, out);
    if (*eval_cmd) return evaluate(ev, out);
    if (*report_cmd) return report(rep, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const CorpusFileError& e) {
    err << "corpus error: " << e.what() << '\n';
    return kIoError;
  } catch (const IoFailure& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIoError;
  } catch (const InvalidArgument& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kUsage;
}

}  // namespace nlr::cli
