// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "flamed/binary_io.hpp"
#include "flamed/errors.hpp"

namespace flamed::pipeline {

namespace {

constexpr char kCheckpointMagic[] = "FLMDCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kModelInitStream = 0xA11CE;
// Fraction of training examples that see the learned null prompt instead of a segment.
constexpr double kNullPromptRate = 0.1;

std::size_t pick_prompt_below(const task::Dataset& ds, std::size_t target, std::size_t limit, Rng& rng) {
  const std::int32_t speaker = ds.utterances[target].speaker_id;
  std::vector<std::size_t> same;
  for (std::size_t i = 0; i < limit; ++i) {
    if (i != target && ds.utterances[i].speaker_id == speaker) same.push_back(i);
  }
  if (same.empty()) return target;
  return same[rng.uniform_int(static_cast<std::uint64_t>(same.size()))];
}

void check_term(const char* name, double v) {
  if (!std::isfinite(v)) throw NumericError(std::string("total_loss: ") + name + " loss is non-finite");
}

void write_f32(io::ByteWriter& w, const Tensor& t) {
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

Tensor read_f32(io::ByteReader& r, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = static_cast<double>(r.f32());
  return t;
}

struct CheckpointImage {
  CheckpointInfo info;
  std::vector<Tensor> values;
  std::vector<Tensor> m, v;
  std::int64_t optimizer_steps = 0;
};

CheckpointImage read_checkpoint(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  if (r.bytes(8) != std::string_view(kCheckpointMagic, 8)) r.fail("bad checkpoint magic");
  if (const auto v = r.u32(); v != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(v));
  CheckpointImage img;
  const std::size_t config_at = r.offset();
  const std::string text = r.str();
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw DataError(path.string() + ": embedded config is not valid JSON at byte offset " + std::to_string(config_at));
  }
  img.info.config = config_from_json(j, path.string());
  img.info.step = static_cast<std::int64_t>(r.u64());
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = r.str();
    const std::uint32_t rows = r.u32(), cols = r.u32();
    if (static_cast<std::size_t>(rows) * cols * 4 > r.remaining()) r.fail("tensor '" + name + "' is truncated");
    img.values.push_back(read_f32(r, rows, cols));
    img.info.tensors.push_back({std::move(name), {rows, cols}});
  }
  const std::uint8_t has_opt = r.u8();
  if (has_opt > 1) r.fail("bad optimizer flag");
  img.info.has_optimizer = has_opt == 1;
  if (img.info.has_optimizer) {
    img.optimizer_steps = static_cast<std::int64_t>(r.u64());
    for (const auto& [name, shape] : img.info.tensors) {
      if (shape.first * shape.second * 8 > r.remaining()) r.fail("optimizer state of '" + name + "' is truncated");
      img.m.push_back(read_f32(r, shape.first, shape.second));
      img.v.push_back(read_f32(r, shape.first, shape.second));
    }
  }
  if (!r.at_end()) r.fail("trailing bytes after checkpoint");
  return img;
}

void round_state_to_float32(nn::ParamList& params, nn::Adam& opt) {
  for (auto& p : params) task::round_to_float32(p.var.mutable_value());
  for (auto& t : opt.first_moments()) task::round_to_float32(t);
  for (auto& t : opt.second_moments()) task::round_to_float32(t);
}

std::string step_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "step_%06lld.ckpt", static_cast<long long>(step));
  return buf;
}

nlohmann::json grid_json(const CodeGrid& g) {
  nlohmann::json levels = nlohmann::json::array();
  for (std::size_t l = 0; l < kCodeLevels; ++l) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t f = 0; f < g.frames(); ++f) row.push_back(g.at(l, f));
    levels.push_back(std::move(row));
  }
  return levels;
}

}  // namespace

Model::Model(const TrainConfig& cfg) : config(cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, kModelInitStream));
  const auto vocab = static_cast<std::size_t>(cfg.task.codebook_size);
  encoder = codes::PhonemeEncoder(static_cast<std::size_t>(cfg.task.n_phonemes) + 1, cfg.codegen, rng);
  timing = dur::DurationSilence(cfg.codegen.dim, cfg.generator, rng);
  decoder = codes::CodeDecoder(vocab, static_cast<std::size_t>(cfg.task.d_spk), cfg.codegen, rng);
  folder = codes::CodeFolder(vocab, static_cast<std::size_t>(cfg.task.d_lat), cfg.codegen, rng);
  denoiser = denoise::Denoiser(static_cast<std::size_t>(cfg.task.d_lat), cfg.denoiser, rng);
}

nn::ParamList Model::parameters() const {
  nn::ParamList out;
  encoder.collect("encoder", out);
  timing.collect("timing", out);
  decoder.collect("decoder", out);
  folder.collect("folder", out);
  denoiser.collect("denoiser", out);
  return out;
}

codes::PromptBundle make_prompt(const task::Utterance& source, std::size_t max_frames, Rng& rng) {
  const std::size_t n = std::min(max_frames, source.frames());
  codes::PromptBundle p;
  p.speaker_emb = source.speaker_emb;
  if (n == 0) return p;
  const auto lo = static_cast<std::int64_t>(std::max<std::size_t>(1, n / 2));
  const auto len = static_cast<std::size_t>(rng.uniform_int(lo, static_cast<std::int64_t>(n)));
  const auto begin = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(source.frames() - len)));
  p.codes = source.codes.slice(begin, len);
  return p;
}

std::size_t pick_prompt_utterance(const task::Dataset& ds, std::size_t target, Rng& rng) {
  if (target >= ds.utterances.size()) throw ContractError("pick_prompt_utterance: index out of range");
  return pick_prompt_below(ds, target, ds.utterances.size(), rng);
}

std::size_t train_count(const TrainConfig& cfg, const task::Dataset& ds) {
  return std::min(cfg.n_utterances, ds.utterances.size());
}

TotalLoss total_loss(const Model& model, const task::Utterance& utt, const codes::PromptBundle& prompt, Rng& rng) {
  const TrainConfig& cfg = model.config;
  const dur::EncodedPhonemes phon = model.encoder(utt.phonemes);
  const double eps = cfg.generator.eps_frames;
  auto [dur_loss, sil_loss] = dur::dur_sil_training_loss(model.timing, phon, dur::log_targets(utt.durations, eps),
                                                         dur::log_targets(utt.silences, eps), rng);
  const dur::ExpandedAlignment al = dur::expand(phon, utt.durations, utt.silences);
  if (al.frames() != utt.frames()) {
    throw DataError("total_loss: alignment has " + std::to_string(al.frames()) + " frames but the codes have " +
                    std::to_string(utt.frames()));
  }
  const auto dec = model.decoder.forward(al.expanded_hidden, prompt, &utt.codes);
  const Var prior = codes::prior_loss(dec.logits, utt.codes);
  const Var x_pr = model.folder(utt.codes);
  const auto flow = denoise::denoiser_losses(model.denoiser, x_pr, utt.latent, prompt.speaker_emb, cfg.flow, rng);

  TotalLoss out;
  out.terms.prior = prior.item();
  out.terms.duration = dur_loss.item();
  out.terms.silence = sil_loss.item();
  out.terms.cfm = flow.cfm.item();
  out.terms.anchor = flow.anchor.item();
  check_term("prior", out.terms.prior);
  check_term("duration", out.terms.duration);
  check_term("silence", out.terms.silence);
  check_term("cfm", out.terms.cfm);
  check_term("anchor", out.terms.anchor);
  const LossWeights& w = cfg.weights;
  out.total = ag::add(ag::add(ag::add(ag::scale(prior, w.prior), ag::scale(dur_loss, w.duration)),
                              ag::add(ag::scale(sil_loss, w.silence), ag::scale(flow.cfm, w.cfm))),
                      ag::scale(flow.anchor, w.anchor));
  out.terms.total = out.total.item();
  return out;
}

TrainResult train(Model& model, const task::Dataset& ds, const TrainOptions& opts) {
  const TrainConfig& cfg = model.config;
  if (!(ds.spec == cfg.task)) throw ConfigError("train: dataset task settings differ from the model config");
  const std::size_t n_train = train_count(cfg, ds);
  if (n_train == 0) throw DataError("train: no training utterances");

  nn::ParamList params = model.parameters();
  nn::Adam opt(params, cfg.optim);
  std::int64_t step = 0;
  TrainResult result;
  if (opts.resume_from) {
    step = load_checkpoint(*opts.resume_from, model, &opt).step;
    result.last_checkpoint = *opts.resume_from;
  }
  if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  while (step < cfg.max_steps) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    opt.zero_grad();
    StepLog entry;
    entry.step = step + 1;
    entry.lr = opt.current_lr();
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = rng.uniform_int(static_cast<std::uint64_t>(n_train));
      codes::PromptBundle prompt;
      if (rng.bernoulli(kNullPromptRate)) {
        prompt.speaker_emb = ds.utterances[idx].speaker_emb;
      } else {
        const std::size_t src = pick_prompt_below(ds, idx, n_train, rng);
        prompt = make_prompt(ds.utterances[src], cfg.prompt_frames, rng);
      }
      TotalLoss tl;
      try {
        tl = total_loss(model, ds.utterances[idx], prompt, rng);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(step + 1) +
                           "; last good checkpoint: " +
                           (result.last_checkpoint.empty() ? "none" : result.last_checkpoint.string()));
      }
      ag::backward(ag::scale(tl.total, inv_batch));
      entry.loss.prior += tl.terms.prior * inv_batch;
      entry.loss.duration += tl.terms.duration * inv_batch;
      entry.loss.silence += tl.terms.silence * inv_batch;
      entry.loss.cfm += tl.terms.cfm * inv_batch;
      entry.loss.anchor += tl.terms.anchor * inv_batch;
      entry.loss.total += tl.terms.total * inv_batch;
    }
    if (!std::isfinite(entry.loss.total) || entry.loss.total > cfg.divergence_threshold) {
      throw NumericError("train: loss " + std::to_string(entry.loss.total) + " diverged at step " +
                         std::to_string(step + 1) + "; last good checkpoint: " +
                         (result.last_checkpoint.empty() ? "none" : result.last_checkpoint.string()));
    }
    entry.grad_norm = opt.step();
    if (!std::isfinite(entry.grad_norm)) {
      throw NumericError("train: non-finite gradient norm at step " + std::to_string(step + 1) +
                         "; last good checkpoint: " +
                         (result.last_checkpoint.empty() ? "none" : result.last_checkpoint.string()));
    }
    ++step;
    result.log.push_back(entry);
    if (opts.on_step) opts.on_step(entry);

    const bool due = cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0;
    if (!opts.checkpoint_dir.empty() && (due || step == cfg.max_steps)) {
      round_state_to_float32(params, opt);
      const auto path = opts.checkpoint_dir / step_name(step);
      save_checkpoint(path, model, step, &opt);
      save_checkpoint(opts.checkpoint_dir / "latest.ckpt", model, step, &opt);
      result.last_checkpoint = path;
    }
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::int64_t step,
                     const nn::Adam* optimizer) {
  const nn::ParamList params = model.parameters();
  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 8));
  w.u32(kCheckpointVersion);
  w.str(to_json(model.config).dump());
  w.u64(static_cast<std::uint64_t>(step));
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    w.str(p.name);
    w.u32(static_cast<std::uint32_t>(p.var.rows()));
    w.u32(static_cast<std::uint32_t>(p.var.cols()));
    write_f32(w, p.var.value());
  }
  w.u8(optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->params().size() != params.size()) {
      throw ContractError("save_checkpoint: optimizer does not track this model's parameters");
    }
    const nn::Adam& opt = *optimizer;
    w.u64(static_cast<std::uint64_t>(opt.steps_taken()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      write_f32(w, opt.first_moments()[i]);
      write_f32(w, opt.second_moments()[i]);
    }
  }
  io::write_file(path, w.buffer());
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) { return read_checkpoint(path).info; }

CheckpointInfo load_checkpoint(const std::filesystem::path& path, Model& model, nn::Adam* optimizer) {
  CheckpointImage img = read_checkpoint(path);
  nn::ParamList params = model.parameters();
  if (img.info.tensors.size() != params.size()) {
    throw ConfigError(path.string() + ": checkpoint holds " + std::to_string(img.info.tensors.size()) +
                      " tensors but the model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, shape] = img.info.tensors[i];
    if (name != params[i].name) {
      throw ConfigError(path.string() + ": tensor " + std::to_string(i) + " is '" + name + "', model expects '" +
                        params[i].name + "'");
    }
    if (shape.first != params[i].var.rows() || shape.second != params[i].var.cols()) {
      throw ConfigError(path.string() + ": tensor '" + name + "' has shape " + std::to_string(shape.first) + "x" +
                        std::to_string(shape.second) + ", model expects " + params[i].var.value().shape_str());
    }
  }
  if (optimizer) {
    if (!img.info.has_optimizer) throw ConfigError(path.string() + ": checkpoint carries no optimizer state");
    if (optimizer->params().size() != params.size()) {
      throw ContractError("load_checkpoint: optimizer does not track this model's parameters");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].var.mutable_value() = std::move(img.values[i]);
  if (optimizer) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      optimizer->first_moments()[i] = std::move(img.m[i]);
      optimizer->second_moments()[i] = std::move(img.v[i]);
    }
    optimizer->set_steps_taken(img.optimizer_steps);
  }
  return img.info;
}

Alignment Alignment::from(const dur::ExpandedAlignment& a) {
  return {a.durations, a.silences, a.frame_phoneme, a.frame_silent};
}

Alignment Alignment::from_counts(const std::vector<std::int32_t>& durations, const std::vector<std::int32_t>& silences) {
  if (durations.size() != silences.size()) throw ContractError("Alignment::from_counts: length mismatch");
  Alignment a{durations, silences, {}, {}};
  for (std::size_t i = 0; i < durations.size(); ++i) {
    if (durations[i] < 0 || silences[i] < 0) throw ContractError("Alignment::from_counts: negative count");
    a.frame_phoneme.insert(a.frame_phoneme.end(), static_cast<std::size_t>(durations[i] + silences[i]),
                           static_cast<std::int32_t>(i));
    a.frame_silent.insert(a.frame_silent.end(), static_cast<std::size_t>(durations[i]), 0);
    a.frame_silent.insert(a.frame_silent.end(), static_cast<std::size_t>(silences[i]), 1);
  }
  return a;
}

SynthesisResult synthesize(const Model& model, const task::Codec& codec, const std::vector<std::int32_t>& phonemes,
                           const codes::PromptBundle& prompt, const SynthesisOptions& opts, Rng& rng) {
  if (opts.forced_durations.has_value() != opts.forced_silences.has_value()) {
    throw ContractError("synthesize: forced durations and silences must be given together");
  }
  if (!(codec.spec == model.config.task)) throw ConfigError("synthesize: codec differs from the model's task");
  const auto t0 = std::chrono::steady_clock::now();
  ag::NoGradGuard no_grad;
  SynthesisResult r;
  r.phonemes = phonemes;
  const dur::EncodedPhonemes phon = model.encoder(phonemes);
  dur::ExpandedAlignment al = opts.forced_durations
                                  ? dur::expand(phon, *opts.forced_durations, *opts.forced_silences)
                                  : dur::sample_and_expand(model.timing, phon, opts.duration_nfe, rng).alignment;
  if (al.frames() == 0) throw ContractError("synthesize: the alignment has zero frames");
  r.predicted_codes = model.decoder.decode(al.expanded_hidden, prompt);
  r.prior = model.folder(r.predicted_codes).value();
  const auto s0 = std::chrono::steady_clock::now();
  auto sample = denoise::denoiser_sample(model.denoiser, r.prior, prompt.speaker_emb, opts.flow, rng);
  r.sample_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - s0).count();
  r.latent = std::move(sample.latent);
  r.nfe = sample.nfe;
  r.codes = task::codec_decode(r.latent, codec);
  r.alignment = Alignment::from(al);
  r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.generated_seconds = static_cast<double>(r.alignment.frames()) * codec.spec.frame_hop_s;
  r.rtf = r.wall_seconds / r.generated_seconds;
  return r;
}

void write_synthesis(const SynthesisResult& r, const task::TaskSpec& spec, const std::filesystem::path& frames_path,
                     const std::filesystem::path& sidecar_path, const std::filesystem::path& timing_path) {
  task::write_frame_features(task::render_frames(r.latent, spec), frames_path);
  nlohmann::json side;
  side["phonemes"] = r.phonemes;
  side["frames"] = r.alignment.frames();
  side["durations"] = r.alignment.durations;
  side["silences"] = r.alignment.silences;
  side["frame_phoneme"] = r.alignment.frame_phoneme;
  side["frame_silent"] = r.alignment.frame_silent;
  side["predicted_codes"] = grid_json(r.predicted_codes);
  side["codes"] = grid_json(r.codes);
  side["nfe"] = r.nfe;
  side["generated_seconds"] = r.generated_seconds;
  io::write_text_file(sidecar_path, side.dump() + "\n");
  nlohmann::json timing;
  timing["wall_seconds"] = r.wall_seconds;
  timing["sample_seconds"] = r.sample_seconds;
  timing["rtf"] = r.rtf;
  timing["generated_seconds"] = r.generated_seconds;
  io::write_text_file(timing_path, timing.dump() + "\n");
}

}  // namespace flamed::pipeline
