// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/config.hpp"

#include <fstream>
#include <sstream>

#include "flamed/errors.hpp"

namespace flamed {

using nlohmann::json;

namespace {

const char* type_name(const json& j) { return j.type_name(); }

bool compatible(const json& def, const json& in) {
  if (def.is_boolean()) return in.is_boolean();
  if (def.is_string()) return in.is_string();
  if (def.is_number_float()) return in.is_number();
  if (def.is_number_unsigned()) return in.is_number_unsigned() || (in.is_number_integer() && in.get<std::int64_t>() >= 0);
  if (def.is_number_integer()) return in.is_number_integer();
  if (def.is_object()) return in.is_object();
  return false;
}

void merge_strict(json& base, const json& incoming, const std::string& path, const std::string& source) {
  if (!incoming.is_object()) throw ConfigError(source + ": expected an object at '" + path + "'");
  for (auto it = incoming.begin(); it != incoming.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError(source + ": unknown key '" + key + "'");
    json& slot = base[it.key()];
    if (!compatible(slot, it.value())) {
      throw ConfigError(source + ": key '" + key + "' expects " + type_name(slot) + ", got " +
                        type_name(it.value()));
    }
    if (slot.is_object()) {
      merge_strict(slot, it.value(), key, source);
    } else if (slot.is_number_unsigned()) {
      slot = it.value().get<std::uint64_t>();
    } else if (slot.is_number_float()) {
      slot = it.value().get<double>();
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  out = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
  task.validate();
  flow.validate();
  codegen.validate();
  generator.validate();
  denoiser.validate();
  if (denoiser.d_spk != static_cast<std::size_t>(task.d_spk)) {
    throw ConfigError("denoiser.d_spk (" + std::to_string(denoiser.d_spk) + ") must equal task.d_spk (" +
                      std::to_string(task.d_spk) + ")");
  }
  if (!(optim.lr > 0.0)) throw ConfigError("optim.lr must be positive");
  if (optim.warmup_steps < 0) throw ConfigError("optim.warmup_steps must be >= 0");
  if (optim.decay_steps < 0) throw ConfigError("optim.decay_steps must be >= 0");
  if (!(optim.min_lr_ratio >= 0.0 && optim.min_lr_ratio <= 1.0)) {
    throw ConfigError("optim.min_lr_ratio must be in [0, 1]");
  }
  for (double w : {weights.prior, weights.duration, weights.silence, weights.cfm, weights.anchor}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (checkpoint_every < 1) throw ConfigError("checkpoint_every must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (n_utterances < 2) throw ConfigError("n_utterances must be >= 2");
  if (prompt_frames < 1) throw ConfigError("prompt_frames must be >= 1");
  if (!(divergence_threshold > 0.0)) throw ConfigError("divergence_threshold must be positive");
}

json to_json(const TrainConfig& c) {
  json j;
  const auto& t = c.task;
  j["task"] = {{"n_phonemes", t.n_phonemes},
               {"n_speakers", t.n_speakers},
               {"codebook_size", t.codebook_size},
               {"n_levels", t.n_levels},
               {"d_lat", t.d_lat},
               {"d_spk", t.d_spk},
               {"frame_hop_s", t.frame_hop_s},
               {"seed", t.seed},
               {"min_phonemes", t.min_phonemes},
               {"max_phonemes", t.max_phonemes},
               {"dur_log_mean_lo", t.dur_log_mean_lo},
               {"dur_log_mean_hi", t.dur_log_mean_hi},
               {"dur_log_std", t.dur_log_std},
               {"silence_prob", t.silence_prob},
               {"sil_log_mean", t.sil_log_mean},
               {"sil_log_std", t.sil_log_std},
               {"latent_noise_std", t.latent_noise_std}};
  j["flow"] = {{"sigma_min", c.flow.sigma_min},
               {"tau_train", c.flow.tau_train},
               {"tau_infer", c.flow.tau_infer},
               {"nfe", c.flow.nfe}};
  const auto& g = c.codegen;
  j["codegen"] = {{"dim", g.dim},
                  {"heads", g.heads},
                  {"ffn_dim", g.ffn_dim},
                  {"ffn_kernel", g.ffn_kernel},
                  {"encoder_blocks", g.encoder_blocks},
                  {"stage1_blocks", g.stage1_blocks},
                  {"stage_blocks", g.stage_blocks},
                  {"fold_dim", g.fold_dim},
                  {"fold_hidden", g.fold_hidden},
                  {"fold_kernel", g.fold_kernel}};
  const auto& ge = c.generator;
  j["generator"] = {{"hidden", ge.hidden},       {"blocks", ge.blocks},         {"kernel", ge.kernel},
                    {"expansion", ge.expansion}, {"time_dim", ge.time_dim},     {"eps_frames", ge.eps_frames},
                    {"nfe", ge.nfe}};
  const auto& d = c.denoiser;
  j["denoiser"] = {{"n_blocks", d.n_blocks}, {"dim", d.dim},           {"kernel", d.kernel},
                   {"expansion", d.expansion}, {"d_spk", d.d_spk},     {"time_dim", d.time_dim},
                   {"heads", d.heads},       {"variant", denoise::to_string(d.variant)}};
  j["optim"] = {{"lr", c.optim.lr},
                {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"eps", c.optim.eps},
                {"warmup_steps", c.optim.warmup_steps},
                {"decay_steps", c.optim.decay_steps},
                {"min_lr_ratio", c.optim.min_lr_ratio},
                {"clip_norm", c.optim.clip_norm}};
  j["weights"] = {{"prior", c.weights.prior},
                  {"duration", c.weights.duration},
                  {"silence", c.weights.silence},
                  {"cfm", c.weights.cfm},
                  {"anchor", c.weights.anchor}};
  j["batch_size"] = c.batch_size;
  j["max_steps"] = c.max_steps;
  j["checkpoint_every"] = c.checkpoint_every;
  j["log_every"] = c.log_every;
  j["n_utterances"] = c.n_utterances;
  j["n_eval"] = c.n_eval;
  j["prompt_frames"] = c.prompt_frames;
  j["divergence_threshold"] = c.divergence_threshold;
  j["seed"] = c.seed;
  return j;
}

TrainConfig config_from_json(const json& in, const std::string& source) {
  json tree = to_json(TrainConfig{});
  merge_strict(tree, in, "", source);
  TrainConfig c;
  try {
    const json& t = tree.at("task");
    read(t, "n_phonemes", c.task.n_phonemes);
    read(t, "n_speakers", c.task.n_speakers);
    read(t, "codebook_size", c.task.codebook_size);
    read(t, "n_levels", c.task.n_levels);
    read(t, "d_lat", c.task.d_lat);
    read(t, "d_spk", c.task.d_spk);
    read(t, "frame_hop_s", c.task.frame_hop_s);
    read(t, "seed", c.task.seed);
    read(t, "min_phonemes", c.task.min_phonemes);
    read(t, "max_phonemes", c.task.max_phonemes);
    read(t, "dur_log_mean_lo", c.task.dur_log_mean_lo);
    read(t, "dur_log_mean_hi", c.task.dur_log_mean_hi);
    read(t, "dur_log_std", c.task.dur_log_std);
    read(t, "silence_prob", c.task.silence_prob);
    read(t, "sil_log_mean", c.task.sil_log_mean);
    read(t, "sil_log_std", c.task.sil_log_std);
    read(t, "latent_noise_std", c.task.latent_noise_std);
    const json& f = tree.at("flow");
    read(f, "sigma_min", c.flow.sigma_min);
    read(f, "tau_train", c.flow.tau_train);
    read(f, "tau_infer", c.flow.tau_infer);
    read(f, "nfe", c.flow.nfe);
    const json& g = tree.at("codegen");
    read(g, "dim", c.codegen.dim);
    read(g, "heads", c.codegen.heads);
    read(g, "ffn_dim", c.codegen.ffn_dim);
    read(g, "ffn_kernel", c.codegen.ffn_kernel);
    read(g, "encoder_blocks", c.codegen.encoder_blocks);
    read(g, "stage1_blocks", c.codegen.stage1_blocks);
    read(g, "stage_blocks", c.codegen.stage_blocks);
    read(g, "fold_dim", c.codegen.fold_dim);
    read(g, "fold_hidden", c.codegen.fold_hidden);
    read(g, "fold_kernel", c.codegen.fold_kernel);
    const json& ge = tree.at("generator");
    read(ge, "hidden", c.generator.hidden);
    read(ge, "blocks", c.generator.blocks);
    read(ge, "kernel", c.generator.kernel);
    read(ge, "expansion", c.generator.expansion);
    read(ge, "time_dim", c.generator.time_dim);
    read(ge, "eps_frames", c.generator.eps_frames);
    read(ge, "nfe", c.generator.nfe);
    const json& d = tree.at("denoiser");
    read(d, "n_blocks", c.denoiser.n_blocks);
    read(d, "dim", c.denoiser.dim);
    read(d, "kernel", c.denoiser.kernel);
    read(d, "expansion", c.denoiser.expansion);
    read(d, "d_spk", c.denoiser.d_spk);
    read(d, "time_dim", c.denoiser.time_dim);
    read(d, "heads", c.denoiser.heads);
    c.denoiser.variant = denoise::variant_from_string(d.at("variant").get<std::string>());
    const json& o = tree.at("optim");
    read(o, "lr", c.optim.lr);
    read(o, "beta1", c.optim.beta1);
    read(o, "beta2", c.optim.beta2);
    read(o, "eps", c.optim.eps);
    read(o, "warmup_steps", c.optim.warmup_steps);
    read(o, "decay_steps", c.optim.decay_steps);
    read(o, "min_lr_ratio", c.optim.min_lr_ratio);
    read(o, "clip_norm", c.optim.clip_norm);
    const json& w = tree.at("weights");
    read(w, "prior", c.weights.prior);
    read(w, "duration", c.weights.duration);
    read(w, "silence", c.weights.silence);
    read(w, "cfm", c.weights.cfm);
    read(w, "anchor", c.weights.anchor);
    read(tree, "batch_size", c.batch_size);
    read(tree, "max_steps", c.max_steps);
    read(tree, "checkpoint_every", c.checkpoint_every);
    read(tree, "log_every", c.log_every);
    read(tree, "n_utterances", c.n_utterances);
    read(tree, "n_eval", c.n_eval);
    read(tree, "prompt_frames", c.prompt_frames);
    read(tree, "divergence_threshold", c.divergence_threshold);
    read(tree, "seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(source + ": " + e.what());
  }
  return c;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  // Build a nested patch and merge it strictly so unknown keys are rejected.
  json patch = value;
  std::vector<std::string> parts;
  std::stringstream ss(key);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    parts.push_back(part);
  }
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  merge_strict(tree, patch, "", "override '" + assignment + "'");
}

TrainConfig resolve_config(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  json tree = to_json(TrainConfig{});
  if (!file.empty()) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    json parsed = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (parsed.is_discarded()) throw ConfigError(file.string() + ": not valid JSON");
    merge_strict(tree, parsed, "", file.string());
  }
  for (const auto& o : overrides) apply_override(tree, o);
  TrainConfig cfg = config_from_json(tree, file.empty() ? "config" : file.string());
  cfg.validate();
  return cfg;
}

std::string config_to_text(const TrainConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace flamed
