#include "nlr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "nlr/clustering.hpp"

namespace nlr {

using nlohmann::json;

namespace {

constexpr std::uint64_t kValSalt = 101;
constexpr std::uint64_t kTestSalt = 202;

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

json selection_metrics_json(const SelectionMetrics& m) {
  return {{"precision", m.precision},
          {"precision_defined", m.precision_defined},
          {"recall", m.recall},
          {"correction", m.correction},
          {"per_class_precision", m.per_class_precision},
          {"per_class_recall", m.per_class_recall}};
}

}  // namespace

std::string epoch_record_to_json(const EpochRecord& r) {
  json j = {{"epoch", r.epoch},
            {"stage", r.stage},
            {"lr", r.lr},
            {"gamma_u", r.gamma_u},
            {"loss",
             {{"cont", r.losses.cont},
              {"recon", r.losses.recon},
              {"id", r.losses.id},
              {"fd", r.losses.fd},
              {"ce_mix", r.losses.ce_mix},
              {"clean_ce", r.losses.clean_ce},
              {"pseudo_l2", r.losses.pseudo_l2},
              {"total", r.losses.total},
              {"batches", r.losses.batches}}},
            {"train_top1", r.train_top1},
            {"val_top1", r.val_top1},
            {"test_top1", r.test_top1},
            {"wall_clock_s", r.wall_clock_s}};
  if (r.selection) {
    const auto& s = *r.selection;
    json sel = selection_metrics_json(s.metrics);
    sel["n_clean"] = s.n_clean;
    sel["n_noisy"] = s.n_noisy;
    sel["class_weights"] = s.class_weights;
    if (s.gmm) {
      sel["gmm"] = {{"weight", s.gmm->weight},
                    {"mean", s.gmm->mean},
                    {"sigma", s.gmm->sigma},
                    {"iterations", s.gmm->iterations}};
    } else {
      sel["gmm"] = nullptr;
    }
    if (!s.gmm_warning.empty()) sel["warning"] = s.gmm_warning;
    j["selection"] = std::move(sel);
  } else {
    j["selection"] = nullptr;
  }
  return j.dump();
}

std::string final_metrics_to_json(const FinalMetrics& m, const RunConfig& config) {
  json j = {{"val_top1", m.val_top1},
            {"test_top1", m.test_top1},
            {"baseline", config.baseline},
            {"selection_ran", m.selection_ran}};
  const json sel = selection_metrics_json(m.selection);
  for (const auto& [k, v] : sel.items()) j[k] = v;
  return j.dump(2);
}

Trainer::Trainer(RunConfig config, Corpus corpus)
    : config_(std::move(config)),
      spec_(corpus.spec),
      noise_ratio_(corpus.noise_ratio),
      train_(std::move(corpus.samples)),
      n_classes_(corpus.spec.n_classes),
      rng_(config_.shuffle_seed) {
  config_.validate();
  spec_.validate();
  if (config_.clip_len > spec_.frames) throw ConfigError("clip_len", "exceeds the corpus frame count");
  if (train_.size() < n_classes_) throw InvalidArgument("Trainer: fewer training samples than classes");
  for (std::size_t i = 0; i < train_.size(); ++i) {
    if (train_[i].id != i) throw InvalidArgument("Trainer: sample ids must be 0..n-1 in order");
    observed_.push_back(train_[i].observed_label);
    truth_.push_back(train_[i].true_label);
    flipped_.push_back(train_[i].observed_label != train_[i].true_label);
  }
  val_ = generate_holdout(spec_, config_.holdout_per_class, kValSalt);
  test_ = generate_holdout(spec_, config_.holdout_per_class, kTestSalt);

  ModelDims dims;
  dims.input = spec_.features;
  dims.hidden = config_.hidden;
  dims.embedding = config_.embedding;
  dims.projection = config_.projection;
  dims.classes = n_classes_;
  model_ = init_model(dims, config_.model_seed);
  optimizer_ = AdamW(AdamW::Options{0.9, 0.999, 1e-8, config_.weight_decay});
}

double Trainer::gamma_u(std::size_t epoch) const {
  const double span = config_.T_max > config_.T2 + 1 ? static_cast<double>(config_.T_max - config_.T2 - 1) : 1.0;
  const double offset = epoch > config_.T2 ? static_cast<double>(epoch - config_.T2) : 0.0;
  return config_.gamma_u0 * (1.0 + offset / span);
}

double Trainer::learning_rate(std::size_t epoch) const { return cosine_lr(config_.lr0, epoch, config_.T_max); }

void Trainer::embed_all(Mat& embeddings, std::vector<ProbDist>& predictions) const {
  embeddings.resize(static_cast<Eigen::Index>(train_.size()), static_cast<Eigen::Index>(model_.dims.projection));
  predictions.clear();
  predictions.reserve(train_.size());
  for (std::size_t i = 0; i < train_.size(); ++i) {
    auto out = infer(model_, full_sequence(train_[i]));
    embeddings.row(static_cast<Eigen::Index>(i)) = out.v.transpose();
    predictions.push_back(std::move(out.p));
  }
}

std::vector<std::vector<std::size_t>> Trainer::make_batches() {
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng_);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    // A lone leftover sample joins the previous batch.
    if (end - start < 2 && !batches.empty()) {
      batches.back().insert(batches.back().end(), order.begin() + static_cast<std::ptrdiff_t>(start),
                            order.begin() + static_cast<std::ptrdiff_t>(end));
      break;
    }
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

Trainer::ClipBatch Trainer::forward_batch(const std::vector<std::size_t>& samples) {
  ClipBatch b;
  b.samples = samples;
  const std::size_t nb = samples.size();
  b.clips.resize(2 * nb);
  for (std::size_t s = 0; s < nb; ++s) {
    auto pair = make_clip_pair(train_[samples[s]], config_.clip_len, rng_, config_.augment);
    b.clips[s] = std::move(pair.clip_a);
    b.clips[s + nb] = std::move(pair.clip_b);
  }
  b.caches.reserve(2 * nb);
  for (const auto& clip : b.clips) b.caches.push_back(forward(model_, clip));
  return b;
}

void Trainer::unsupervised_terms(ClipBatch& batch, Mat& dv, LossBreakdown& acc, double& total) {
  const auto rows = static_cast<Eigen::Index>(batch.caches.size());
  Mat v(rows, static_cast<Eigen::Index>(model_.dims.projection));
  Mat u(rows, static_cast<Eigen::Index>(model_.dims.embedding));
  Mat u_hat(rows, u.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    v.row(r) = batch.caches[static_cast<std::size_t>(r)].v.transpose();
    u.row(r) = batch.caches[static_cast<std::size_t>(r)].u.transpose();
    u_hat.row(r) = batch.caches[static_cast<std::size_t>(r)].u_hat.transpose();
  }
  const auto cont = contrastive_loss(v, config_.tau1);
  const auto recon = recon_loss(u, u_hat);
  acc.cont += cont.value;
  acc.recon += recon.value;
  total += cont.value + recon.value;
  dv = cont.grad;
  for (Eigen::Index r = 0; r < rows; ++r) {
    OutputGrads g;
    g.du = recon.du.row(r).transpose();
    g.du_hat = recon.du_hat.row(r).transpose();
    backward(model_, batch.caches[static_cast<std::size_t>(r)], g);
  }
}

void Trainer::optimizer_step(std::size_t epoch) {
  auto params = model_.params();
  optimizer_.step(params, learning_rate(epoch));
  if (!model_.finite()) throw NumericFailure("non-finite parameters after optimizer step at epoch " + std::to_string(epoch));
}

void Trainer::check_finite(double loss, std::string_view stage_tag) const {
  if (!std::isfinite(loss))
    throw NumericFailure("non-finite loss in stage " + std::string(stage_tag) + " at epoch " + std::to_string(epoch_));
}

void Trainer::finish_epoch(std::string_view stage_tag, LossBreakdown losses, std::optional<SelectionSummary> selection,
                           double start_seconds) {
  if (losses.batches > 0) {
    const double nb = static_cast<double>(losses.batches);
    for (double* f : {&losses.cont, &losses.recon, &losses.id, &losses.fd, &losses.ce_mix, &losses.clean_ce,
                      &losses.pseudo_l2, &losses.total})
      *f /= nb;
  }
  EpochRecord r;
  r.epoch = epoch_;
  r.stage = stage_tag;
  r.lr = learning_rate(epoch_);
  r.gamma_u = stage_tag == stage::kSemisup ? gamma_u(epoch_) : 0.0;
  r.losses = losses;
  r.selection = std::move(selection);
  r.train_top1 = top1_accuracy(model_, train_);
  r.val_top1 = top1_accuracy(model_, val_);
  r.test_top1 = top1_accuracy(model_, test_);
  r.wall_clock_s = config_.deterministic ? 0.0 : now_seconds() - start_seconds;
  records_.push_back(r);
  if (on_epoch_) on_epoch_(records_.back());
  ++epoch_;
}

void Trainer::run_stage1() {
  if (epoch_ != 0) throw InvalidState("run_stage1: must run first");
  if (config_.T1 == 0) return;
  if (!config_.use_ucrl) {
    for (; epoch_ < config_.T1;) finish_epoch(stage::kUcrlSkipped, {}, std::nullopt, now_seconds());
    return;
  }

  Mat initial;
  std::vector<ProbDist> unused;
  embed_all(initial, unused);
  bank_ = MemoryBank(initial, config_.memory_momentum);

  while (epoch_ < config_.T1) {
    const double t0 = now_seconds();
    LossBreakdown acc;
    for (const auto& samples : make_batches()) {
      model_.zero_grad();
      ClipBatch batch = forward_batch(samples);
      Mat dv;
      double total = 0.0;
      unsupervised_terms(batch, dv, acc, total);

      const auto rows = static_cast<Eigen::Index>(batch.caches.size());
      Mat v(rows, dv.cols());
      std::vector<std::uint32_t> ids(static_cast<std::size_t>(rows));
      for (Eigen::Index r = 0; r < rows; ++r) {
        v.row(r) = batch.caches[static_cast<std::size_t>(r)].v.transpose();
        ids[static_cast<std::size_t>(r)] = train_[samples[static_cast<std::size_t>(r) % samples.size()]].id;
      }
      const auto id_loss = instance_discrimination_loss(v, ids, bank_, config_.tau2);
      const auto fd_loss = feature_decorrelation_loss(v, config_.tau3);
      acc.id += id_loss.value;
      acc.fd += fd_loss.value;
      total += id_loss.value + fd_loss.value;
      check_finite(total, stage::kUcrl);
      dv += id_loss.grad + fd_loss.grad;
      for (Eigen::Index r = 0; r < rows; ++r) {
        OutputGrads g;
        g.dv = dv.row(r).transpose();
        backward(model_, batch.caches[static_cast<std::size_t>(r)], g);
      }
      optimizer_step(epoch_);

      const std::size_t nb = samples.size();
      for (std::size_t s = 0; s < nb; ++s) {
        const Vec both = batch.caches[s].v + batch.caches[s + nb].v;
        bank_.update(ids[s], both.norm() > 1e-12 ? l2_normalize(both) : batch.caches[s].v);
      }
      acc.total += total;
      ++acc.batches;
    }
    finish_epoch(stage::kUcrl, acc, std::nullopt, t0);
  }
}

void Trainer::run_warmup() {
  if (epoch_ != config_.T1) throw InvalidState("run_warmup: stage 1 has not completed");
  while (epoch_ < config_.T2) {
    const double t0 = now_seconds();
    LossBreakdown acc;
    for (const auto& samples : make_batches()) {
      model_.zero_grad();
      ClipBatch batch = forward_batch(samples);
      Mat dv;
      double total = 0.0;
      unsupervised_terms(batch, dv, acc, total);
      for (std::size_t r = 0; r < batch.caches.size(); ++r) {
        OutputGrads g;
        g.dv = dv.row(static_cast<Eigen::Index>(r)).transpose();
        backward(model_, batch.caches[r], g);
      }

      std::vector<std::uint16_t> labels(batch.clips.size());
      for (std::size_t r = 0; r < labels.size(); ++r) labels[r] = observed_[samples[r % samples.size()]];
      const auto mixed = mixup(batch.clips, one_hot_rows(labels, n_classes_), config_.alpha, rng_);
      std::vector<ForwardCache> mixed_caches;
      Mat logits(static_cast<Eigen::Index>(mixed.clips.size()), static_cast<Eigen::Index>(n_classes_));
      for (std::size_t r = 0; r < mixed.clips.size(); ++r) {
        mixed_caches.push_back(forward(model_, mixed.clips[r]));
        logits.row(static_cast<Eigen::Index>(r)) = mixed_caches.back().logits.transpose();
      }
      const auto ce = soft_ce_loss(logits, mixed.targets);
      acc.ce_mix += ce.value;
      total += ce.value;
      check_finite(total, stage::kWarmup);
      for (std::size_t r = 0; r < mixed_caches.size(); ++r) {
        OutputGrads g;
        g.dlogits = ce.grad.row(static_cast<Eigen::Index>(r)).transpose();
        backward(model_, mixed_caches[r], g);
      }
      optimizer_step(epoch_);
      acc.total += total;
      ++acc.batches;
    }
    finish_epoch(stage::kWarmup, acc, std::nullopt, t0);
  }
}

void Trainer::run_semisup() {
  if (epoch_ != config_.T2) throw InvalidState("run_semisup: warm-up has not completed");
  const double expected_noise = config_.expected_noise_ratio.value_or(noise_ratio_);
  std::vector<std::size_t> class_counts(n_classes_, 0);
  for (auto y : observed_) ++class_counts[y];
  for (auto& c : class_counts) c = std::max<std::size_t>(c, 1);
  if (prev_clean_counts_.empty()) prev_clean_counts_ = initial_clean_counts(class_counts, expected_noise);
  const DenoiseConfig dcfg = config_.denoise_config();

  while (epoch_ < config_.T_max) {
    const double t0 = now_seconds();
    Mat embeddings;
    std::vector<ProbDist> predictions;
    embed_all(embeddings, predictions);
    const auto clusters = agglomerative(embeddings, n_classes_);
    SelectionState st = denoise_pass(predictions, embeddings, observed_, n_classes_, clusters, store_,
                                     prev_clean_counts_, dcfg);

    SelectionSummary summary;
    summary.n_clean = st.partition.clean.size();
    summary.n_noisy = st.partition.noisy.size();
    summary.metrics = compute_metrics(st.partition, flipped_, observed_, truth_, n_classes_);
    summary.class_weights.assign(st.weights.normalized.data(), st.weights.normalized.data() + st.weights.normalized.size());
    summary.gmm = st.gmm;
    summary.gmm_warning = st.gmm_warning;

    // -1 marks clean samples; otherwise the index into partition.pseudo.
    std::vector<std::ptrdiff_t> role(train_.size(), -1);
    for (std::size_t t = 0; t < st.partition.noisy.size(); ++t)
      role[st.partition.noisy[t]] = static_cast<std::ptrdiff_t>(t);
    const double weight_u = gamma_u(epoch_);

    LossBreakdown acc;
    for (const auto& samples : make_batches()) {
      model_.zero_grad();
      ClipBatch batch = forward_batch(samples);
      Mat dv;
      double total = 0.0;
      unsupervised_terms(batch, dv, acc, total);

      std::vector<std::size_t> clean_rows, pseudo_rows;
      for (std::size_t r = 0; r < batch.caches.size(); ++r)
        (role[samples[r % samples.size()]] < 0 ? clean_rows : pseudo_rows).push_back(r);

      Mat dlogits = Mat::Zero(static_cast<Eigen::Index>(batch.caches.size()), static_cast<Eigen::Index>(n_classes_));
      if (!clean_rows.empty()) {
        Mat logits(static_cast<Eigen::Index>(clean_rows.size()), dlogits.cols());
        std::vector<std::uint16_t> labels;
        for (std::size_t t = 0; t < clean_rows.size(); ++t) {
          logits.row(static_cast<Eigen::Index>(t)) = batch.caches[clean_rows[t]].logits.transpose();
          labels.push_back(observed_[samples[clean_rows[t] % samples.size()]]);
        }
        const auto lx = clean_ce_loss(logits, labels);
        acc.clean_ce += lx.value;
        total += lx.value;
        for (std::size_t t = 0; t < clean_rows.size(); ++t)
          dlogits.row(static_cast<Eigen::Index>(clean_rows[t])) += lx.grad.row(static_cast<Eigen::Index>(t));
      }
      if (!pseudo_rows.empty()) {
        Mat logits(static_cast<Eigen::Index>(pseudo_rows.size()), dlogits.cols());
        Mat targets(logits.rows(), logits.cols());
        for (std::size_t t = 0; t < pseudo_rows.size(); ++t) {
          logits.row(static_cast<Eigen::Index>(t)) = batch.caches[pseudo_rows[t]].logits.transpose();
          const auto idx = static_cast<std::size_t>(role[samples[pseudo_rows[t] % samples.size()]]);
          targets.row(static_cast<Eigen::Index>(t)) = st.partition.pseudo[idx].probs().transpose();
        }
        const auto lu = pseudo_l2_loss(logits, targets);
        acc.pseudo_l2 += lu.value;
        total += weight_u * lu.value;
        for (std::size_t t = 0; t < pseudo_rows.size(); ++t)
          dlogits.row(static_cast<Eigen::Index>(pseudo_rows[t])) += weight_u * lu.grad.row(static_cast<Eigen::Index>(t));
      }
      check_finite(total, stage::kSemisup);
      for (std::size_t r = 0; r < batch.caches.size(); ++r) {
        OutputGrads g;
        g.dv = dv.row(static_cast<Eigen::Index>(r)).transpose();
        g.dlogits = dlogits.row(static_cast<Eigen::Index>(r)).transpose();
        backward(model_, batch.caches[r], g);
      }
      optimizer_step(epoch_);
      acc.total += total;
      ++acc.batches;
    }

    update_store(store_, st.partition, observed_, n_classes_);
    prev_clean_counts_ = st.clean_counts;
    last_metrics_ = summary.metrics;
    last_selection_ = std::move(st);
    finish_epoch(stage::kSemisup, acc, std::move(summary), t0);
  }
}

void Trainer::run_baseline() {
  if (epoch_ != 0) throw InvalidState("run_baseline: must run on a fresh trainer");
  while (epoch_ < config_.T_max) {
    const double t0 = now_seconds();
    LossBreakdown acc;
    for (const auto& samples : make_batches()) {
      model_.zero_grad();
      ClipBatch batch = forward_batch(samples);
      Mat logits(static_cast<Eigen::Index>(batch.caches.size()), static_cast<Eigen::Index>(n_classes_));
      std::vector<std::uint16_t> labels(batch.caches.size());
      for (std::size_t r = 0; r < batch.caches.size(); ++r) {
        logits.row(static_cast<Eigen::Index>(r)) = batch.caches[r].logits.transpose();
        labels[r] = observed_[samples[r % samples.size()]];
      }
      const auto ce = clean_ce_loss(logits, labels);
      check_finite(ce.value, stage::kBaseline);
      for (std::size_t r = 0; r < batch.caches.size(); ++r) {
        OutputGrads g;
        g.dlogits = ce.grad.row(static_cast<Eigen::Index>(r)).transpose();
        backward(model_, batch.caches[r], g);
      }
      optimizer_step(epoch_);
      acc.clean_ce += ce.value;
      acc.total += ce.value;
      ++acc.batches;
    }
    finish_epoch(stage::kBaseline, acc, std::nullopt, t0);
  }
}

void Trainer::run() {
  if (config_.baseline) {
    run_baseline();
    return;
  }
  run_stage1();
  run_warmup();
  run_semisup();
}

FinalMetrics Trainer::final_metrics() const {
  FinalMetrics m;
  m.val_top1 = top1_accuracy(model_, val_);
  m.test_top1 = top1_accuracy(model_, test_);
  if (last_metrics_) {
    m.selection_ran = true;
    m.selection = *last_metrics_;
  }
  return m;
}

}  // namespace nlr
