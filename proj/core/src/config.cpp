#include "nlr/config.hpp"

#include <functional>
#include <map>

#include "json.hpp"

namespace nlr {

using nlohmann::json;

namespace {

std::size_t read_count(const json& j, const std::string& key) {
  if (!j.is_number_integer() || j.get<long long>() < 0) throw ConfigError(key, "expected a non-negative integer");
  return j.get<std::size_t>();
}

double read_real(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(key, "expected a number");
  return j.get<double>();
}

bool read_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError(key, "expected true or false");
  return j.get<bool>();
}

json parse_object(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("<document>", "expected a JSON object");
  return j;
}

}  // namespace

void RunConfig::validate() const {
  if (!(tau1 > 0.0)) throw ConfigError("tau1", "must be positive");
  if (!(tau2 > 0.0)) throw ConfigError("tau2", "must be positive");
  if (!(tau3 > 0.0)) throw ConfigError("tau3", "must be positive");
  if (!(alpha > 0.0)) throw ConfigError("alpha", "must be positive");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta", "must lie in [0, 1]");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon", "must be positive");
  if (!(gamma_u0 >= 0.0)) throw ConfigError("gamma_u0", "must be non-negative");
  if (T1 > T2) throw ConfigError("T1", "must not exceed T2");
  if (T2 > T_max) throw ConfigError("T2", "must not exceed T_max");
  if (batch_size < 2) throw ConfigError("batch_size", "must be at least 2");
  if (!(lr0 > 0.0)) throw ConfigError("lr0", "must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay", "must be non-negative");
  if (clip_len < 1) throw ConfigError("clip_len", "must be positive");
  if (expected_noise_ratio && !(*expected_noise_ratio >= 0.0 && *expected_noise_ratio < 1.0))
    throw ConfigError("expected_noise_ratio", "must lie in [0, 1)");
  if (!(memory_momentum >= 0.0 && memory_momentum < 1.0)) throw ConfigError("memory_momentum", "must lie in [0, 1)");
  if (hidden < 1) throw ConfigError("hidden", "must be positive");
  if (embedding < 1) throw ConfigError("embedding", "must be positive");
  if (projection < 1) throw ConfigError("projection", "must be positive");
  if (holdout_per_class < 1) throw ConfigError("holdout_per_class", "must be positive");
  if (!(augment.jitter_sigma >= 0.0)) throw ConfigError("aug_jitter", "must be non-negative");
  if (!(augment.scale_lo > 0.0 && augment.scale_lo <= augment.scale_hi))
    throw ConfigError("aug_scale_lo", "must be positive and not exceed aug_scale_hi");
  if (!(augment.dropout >= 0.0 && augment.dropout < 1.0)) throw ConfigError("aug_dropout", "must lie in [0, 1)");
  if (!(gmm_tol >= 0.0)) throw ConfigError("gmm_tol", "must be non-negative");
}

DenoiseConfig RunConfig::denoise_config() const {
  DenoiseConfig d;
  d.beta = beta;
  d.epsilon = epsilon;
  d.use_class_weights = use_class_weights;
  d.gmm_tol = gmm_tol;
  d.gmm_max_iter = gmm_max_iter;
  return d;
}

RunConfig run_config_from_json(std::string_view json_text, const RunConfig& defaults) {
  const json j = parse_object(json_text);
  RunConfig c = defaults;
  using Setter = std::function<void(const json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"tau1", [&](const json& v, const std::string& k) { c.tau1 = read_real(v, k); }},
      {"tau2", [&](const json& v, const std::string& k) { c.tau2 = read_real(v, k); }},
      {"tau3", [&](const json& v, const std::string& k) { c.tau3 = read_real(v, k); }},
      {"alpha", [&](const json& v, const std::string& k) { c.alpha = read_real(v, k); }},
      {"beta", [&](const json& v, const std::string& k) { c.beta = read_real(v, k); }},
      {"epsilon", [&](const json& v, const std::string& k) { c.epsilon = read_real(v, k); }},
      {"gamma_u0", [&](const json& v, const std::string& k) { c.gamma_u0 = read_real(v, k); }},
      {"T1", [&](const json& v, const std::string& k) { c.T1 = read_count(v, k); }},
      {"T2", [&](const json& v, const std::string& k) { c.T2 = read_count(v, k); }},
      {"T_max", [&](const json& v, const std::string& k) { c.T_max = read_count(v, k); }},
      {"batch_size", [&](const json& v, const std::string& k) { c.batch_size = read_count(v, k); }},
      {"lr0", [&](const json& v, const std::string& k) { c.lr0 = read_real(v, k); }},
      {"weight_decay", [&](const json& v, const std::string& k) { c.weight_decay = read_real(v, k); }},
      {"clip_len", [&](const json& v, const std::string& k) { c.clip_len = read_count(v, k); }},
      {"expected_noise_ratio",
       [&](const json& v, const std::string& k) {
         if (v.is_null())
           c.expected_noise_ratio.reset();
         else
           c.expected_noise_ratio = read_real(v, k);
       }},
      {"memory_momentum", [&](const json& v, const std::string& k) { c.memory_momentum = read_real(v, k); }},
      {"model_seed", [&](const json& v, const std::string& k) { c.model_seed = read_count(v, k); }},
      {"shuffle_seed", [&](const json& v, const std::string& k) { c.shuffle_seed = read_count(v, k); }},
      {"deterministic", [&](const json& v, const std::string& k) { c.deterministic = read_bool(v, k); }},
      {"hidden", [&](const json& v, const std::string& k) { c.hidden = read_count(v, k); }},
      {"embedding", [&](const json& v, const std::string& k) { c.embedding = read_count(v, k); }},
      {"projection", [&](const json& v, const std::string& k) { c.projection = read_count(v, k); }},
      {"holdout_per_class", [&](const json& v, const std::string& k) { c.holdout_per_class = read_count(v, k); }},
      {"baseline", [&](const json& v, const std::string& k) { c.baseline = read_bool(v, k); }},
      {"use_ucrl", [&](const json& v, const std::string& k) { c.use_ucrl = read_bool(v, k); }},
      {"use_class_weights", [&](const json& v, const std::string& k) { c.use_class_weights = read_bool(v, k); }},
      {"aug_jitter", [&](const json& v, const std::string& k) { c.augment.jitter_sigma = read_real(v, k); }},
      {"aug_scale_lo", [&](const json& v, const std::string& k) { c.augment.scale_lo = read_real(v, k); }},
      {"aug_scale_hi", [&](const json& v, const std::string& k) { c.augment.scale_hi = read_real(v, k); }},
      {"aug_dropout", [&](const json& v, const std::string& k) { c.augment.dropout = read_real(v, k); }},
      {"gmm_tol", [&](const json& v, const std::string& k) { c.gmm_tol = read_real(v, k); }},
      {"gmm_max_iter", [&](const json& v, const std::string& k) { c.gmm_max_iter = read_count(v, k); }},
      {"corpus",
       [&](const json& v, const std::string& k) {
         if (!v.is_string()) throw ConfigError(k, "expected a path string");
         c.corpus = v.get<std::string>();
       }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key, "unknown configuration key");
    it->second(value, key);
  }
  c.validate();
  return c;
}

std::string run_config_to_json(const RunConfig& c) {
  json j = {
      {"tau1", c.tau1},
      {"tau2", c.tau2},
      {"tau3", c.tau3},
      {"alpha", c.alpha},
      {"beta", c.beta},
      {"epsilon", c.epsilon},
      {"gamma_u0", c.gamma_u0},
      {"T1", c.T1},
      {"T2", c.T2},
      {"T_max", c.T_max},
      {"batch_size", c.batch_size},
      {"lr0", c.lr0},
      {"weight_decay", c.weight_decay},
      {"clip_len", c.clip_len},
      {"expected_noise_ratio", c.expected_noise_ratio ? json(*c.expected_noise_ratio) : json(nullptr)},
      {"memory_momentum", c.memory_momentum},
      {"model_seed", c.model_seed},
      {"shuffle_seed", c.shuffle_seed},
      {"deterministic", c.deterministic},
      {"hidden", c.hidden},
      {"embedding", c.embedding},
      {"projection", c.projection},
      {"holdout_per_class", c.holdout_per_class},
      {"baseline", c.baseline},
      {"use_ucrl", c.use_ucrl},
      {"use_class_weights", c.use_class_weights},
      {"aug_jitter", c.augment.jitter_sigma},
      {"aug_scale_lo", c.augment.scale_lo},
      {"aug_scale_hi", c.augment.scale_hi},
      {"aug_dropout", c.augment.dropout},
      {"gmm_tol", c.gmm_tol},
      {"gmm_max_iter", c.gmm_max_iter},
  };
  if (!c.corpus.empty()) j["corpus"] = c.corpus;
  return j.dump(2);
}

CorpusSpec corpus_spec_from_json(std::string_view json_text) {
  const json j = parse_object(json_text);
  static const char* const kKnown[] = {"n_classes", "samples_per_class", "frames", "features",
                                       "class_separation", "frame_noise_sigma", "seed"};
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw ConfigError(key, "unknown corpus key");
  }
  auto require = [&](const char* key) -> const json& {
    if (!j.contains(key)) throw ConfigError(key, "required field missing");
    return j.at(key);
  };

  CorpusSpec s;
  s.n_classes = read_count(require("n_classes"), "n_classes");
  const json& counts = require("samples_per_class");
  if (counts.is_array()) {
    s.samples_per_class.clear();
    for (const auto& c : counts) s.samples_per_class.push_back(read_count(c, "samples_per_class"));
  } else {
    s.samples_per_class.assign(s.n_classes, read_count(counts, "samples_per_class"));
  }
  if (j.contains("frames")) s.frames = read_count(j.at("frames"), "frames");
  if (j.contains("features")) s.features = read_count(j.at("features"), "features");
  if (j.contains("class_separation")) s.class_separation = read_real(j.at("class_separation"), "class_separation");
  if (j.contains("frame_noise_sigma")) s.frame_noise_sigma = read_real(j.at("frame_noise_sigma"), "frame_noise_sigma");
  if (j.contains("seed")) s.seed = read_count(j.at("seed"), "seed");
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    const std::string what = e.what();
    throw ConfigError(what.substr(0, what.find(':')), what.substr(what.find(':') + 2));
  }
  return s;
}

std::string corpus_spec_to_json(const CorpusSpec& s) {
  json j = {{"n_classes", s.n_classes},
            {"samples_per_class", s.samples_per_class},
            {"frames", s.frames},
            {"features", s.features},
            {"class_separation", s.class_separation},
            {"frame_noise_sigma", s.frame_noise_sigma},
            {"seed", s.seed}};
  return j.dump();
}

}  // namespace nlr
