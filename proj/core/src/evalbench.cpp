// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "flamed/errors.hpp"

namespace flamed::eval {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

double ratio_or_inf(double num, double den) {
  if (den > 0.0) return num / den;
  return num > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
}

// JSON has no inf/nan; they are written as strings.
nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

void check_alignment(const pipeline::Alignment& a, std::size_t k) {
  if (a.frames() == 0) throw DataError("temporal_metrics: alignment " + std::to_string(k) + " is missing");
  const long total = std::accumulate(a.durations.begin(), a.durations.end(), 0L) +
                     std::accumulate(a.silences.begin(), a.silences.end(), 0L);
  if (a.durations.size() != a.silences.size() || total != static_cast<long>(a.frames()) ||
      a.frame_silent.size() != a.frames()) {
    throw DataError("temporal_metrics: alignment " + std::to_string(k) + " is inconsistent with its counts");
  }
}

std::size_t voiced_syllables(const std::vector<std::int32_t>& phonemes) {
  return static_cast<std::size_t>(std::count_if(phonemes.begin(), phonemes.end(),
                                                [](std::int32_t p) { return p != task::kSilId; }));
}

std::size_t held_out_begin(const pipeline::Model& model, const task::Dataset& ds) {
  return pipeline::train_count(model.config, ds);
}

pipeline::SynthesisOptions forced_options(const task::Utterance& u, const cfm::FlowConfig& flow) {
  pipeline::SynthesisOptions o;
  o.flow = flow;
  o.forced_durations = u.durations;
  o.forced_silences = u.silences;
  return o;
}

}  // namespace

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  r.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return r;
}

PauseStats pause_stats(const std::vector<std::uint8_t>& frame_silent) {
  PauseStats s;
  std::size_t silent = 0;
  for (std::size_t f = 0; f < frame_silent.size(); ++f) {
    if (frame_silent[f] && (f == 0 || !frame_silent[f - 1])) ++s.count;
    silent += frame_silent[f] ? 1 : 0;
  }
  if (s.count > 0) s.mean_frames = static_cast<double>(silent) / static_cast<double>(s.count);
  return s;
}

TemporalReport temporal_metrics(const std::vector<pipeline::Alignment>& alignments,
                                const std::vector<std::size_t>& syllables, double hop_s) {
  if (alignments.size() != syllables.size()) {
    throw ContractError("temporal_metrics: " + std::to_string(alignments.size()) + " alignments but " +
                        std::to_string(syllables.size()) + " syllable counts");
  }
  if (!(hop_s > 0.0)) throw DomainError("temporal_metrics: hop must be positive");
  std::vector<double> rate, mphd, pauses, mpad;
  for (std::size_t k = 0; k < alignments.size(); ++k) {
    const auto& a = alignments[k];
    check_alignment(a, k);
    rate.push_back(static_cast<double>(syllables[k]) / (static_cast<double>(a.frames()) * hop_s));
    if (a.durations.size() > 1) {
      const double voiced = std::accumulate(a.durations.begin() + 1, a.durations.end(), 0.0);
      mphd.push_back(voiced / static_cast<double>(a.durations.size() - 1) * hop_s);
    }
    const PauseStats ps = pause_stats(a.frame_silent);
    pauses.push_back(static_cast<double>(ps.count));
    if (ps.count > 0) mpad.push_back(ps.mean_frames * hop_s);
  }
  TemporalReport r;
  r.utterances = alignments.size();
  r.speech_rate = mean_std(rate);
  r.mphd = mean_std(mphd);
  r.n_pauses = mean_std(pauses);
  r.mpad = mean_std(mpad);
  r.no_pauses = mpad.empty();
  return r;
}

TemporalReport temporal_metrics(const std::vector<pipeline::SynthesisResult>& results, double hop_s) {
  std::vector<pipeline::Alignment> al;
  std::vector<std::size_t> syl;
  for (const auto& r : results) {
    al.push_back(r.alignment);
    syl.push_back(voiced_syllables(r.phonemes));
  }
  return temporal_metrics(al, syl, hop_s);
}

DurationBaseline::DurationBaseline(std::size_t cond_dim, std::size_t hidden, Rng& rng)
    : in_(cond_dim, hidden, rng), out_(hidden, 2, rng) {}

Var DurationBaseline::operator()(const Var& hidden) const { return out_(ag::gelu(in_(hidden))); }

void DurationBaseline::collect(const std::string& prefix, nn::ParamList& out) const {
  in_.collect(prefix + ".in", out);
  out_.collect(prefix + ".out", out);
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> DurationBaseline::predict(
    const dur::EncodedPhonemes& phon) const {
  phon.check();
  ag::NoGradGuard no_grad;
  const Tensor logs = (*this)(phon.hidden).value();
  Tensor d(logs.rows(), 1), s(logs.rows(), 1);
  for (std::size_t i = 0; i < logs.rows(); ++i) {
    d(i, 0) = logs(i, 0);
    s(i, 0) = logs(i, 1);
  }
  return dur::counts_from_logs(d, s);
}

double train_duration_baseline(DurationBaseline& baseline, const pipeline::Model& model, const task::Dataset& ds,
                               const BaselineTrainConfig& cfg) {
  const std::size_t n_train = pipeline::train_count(model.config, ds);
  if (n_train == 0) throw DataError("train_duration_baseline: no training utterances");
  if (cfg.batch_size < 1 || cfg.steps < 1) throw ConfigError("train_duration_baseline: batch and steps must be >= 1");
  nn::ParamList params;
  baseline.collect("baseline", params);
  nn::AdamConfig ac;
  ac.lr = cfg.lr;
  ac.warmup_steps = 0;
  nn::Adam opt(params, ac);
  const double eps = model.config.generator.eps_frames;
  const double inv_batch = 1.0 / static_cast<double>(cfg.batch_size);
  double last = 0.0;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(step)));
    opt.zero_grad();
    last = 0.0;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const auto& u = ds.utterances[rng.uniform_int(static_cast<std::uint64_t>(n_train))];
      Var hidden;
      {
        ag::NoGradGuard no_grad;
        hidden = ag::constant(model.encoder(u.phonemes).hidden.value());
      }
      const Var pred = baseline(hidden);
      const Var loss = ag::add(ag::mse(ag::slice_cols(pred, 0, 1), ag::constant(dur::log_targets(u.durations, eps))),
                               ag::mse(ag::slice_cols(pred, 1, 1), ag::constant(dur::log_targets(u.silences, eps))));
      ag::backward(ag::scale(loss, inv_batch));
      last += loss.item() * inv_batch;
    }
    opt.step();
  }
  return last;
}

RunSet resynthesize(const pipeline::Model& model, const task::Dataset& ds, const EvalItem& item, std::size_t runs,
                    const DurationBaseline* baseline, std::uint64_t seed) {
  const auto& u = ds.utterances.at(item.index);
  pipeline::SynthesisOptions opts;
  opts.flow = model.config.flow;
  opts.duration_nfe = model.config.generator.nfe;
  if (baseline) {
    ag::NoGradGuard no_grad;
    auto [d, s] = baseline->predict(model.encoder(u.phonemes));
    opts.forced_durations = std::move(d);
    opts.forced_silences = std::move(s);
  }
  RunSet set{u.phonemes, {}};
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng(mix_seed(seed, r));
    set.runs.push_back(pipeline::synthesize(model, ds.codec, u.phonemes, item.prompt, opts, rng).alignment);
  }
  return set;
}

DiversityRecord diversity_compare(const std::vector<RunSet>& probabilistic, const std::vector<RunSet>& deterministic) {
  if (probabilistic.size() != deterministic.size()) {
    throw DataError("diversity_compare: " + std::to_string(probabilistic.size()) + " probabilistic texts but " +
                    std::to_string(deterministic.size()) + " deterministic texts");
  }
  if (probabilistic.empty()) throw DataError("diversity_compare: no texts");
  struct Stats {
    double mean_std = 0.0, max_std = 0.0, pauses_std = 0.0;
  };
  auto stats = [](const RunSet& set, std::size_t k) {
    if (set.runs.size() < 2) throw ContractError("diversity_compare: text " + std::to_string(k) + " has < 2 runs");
    Stats s;
    const std::size_t n = set.phonemes.size();
    std::vector<double> pauses;
    for (const auto& run : set.runs) {
      if (run.durations.size() != n) throw DataError("diversity_compare: run length differs from its text");
      pauses.push_back(static_cast<double>(pause_stats(run.frame_silent).count));
    }
    s.pauses_std = mean_std(pauses).std;
    std::size_t positions = 0;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<double> d;
      for (const auto& run : set.runs) d.push_back(static_cast<double>(run.durations[i]));
      const double sd = mean_std(d).std;
      s.mean_std += sd;
      s.max_std = std::max(s.max_std, sd);
      ++positions;
    }
    if (positions > 0) s.mean_std /= static_cast<double>(positions);
    return s;
  };
  DiversityRecord r;
  const double n = static_cast<double>(probabilistic.size());
  for (std::size_t k = 0; k < probabilistic.size(); ++k) {
    if (probabilistic[k].phonemes != deterministic[k].phonemes) {
      throw DataError("diversity_compare: text " + std::to_string(k) + " differs between the two sets");
    }
    const Stats p = stats(probabilistic[k], k), d = stats(deterministic[k], k);
    r.prob_duration_std += p.mean_std / n;
    r.det_duration_std += d.mean_std / n;
    r.prob_pauses_std += p.pauses_std / n;
    r.det_pauses_std += d.pauses_std / n;
    r.prob_max_position_std = std::max(r.prob_max_position_std, p.max_std);
    r.det_max_position_std = std::max(r.det_max_position_std, d.max_std);
  }
  r.duration_std_ratio = ratio_or_inf(r.prob_duration_std, r.det_duration_std);
  r.pauses_std_ratio = ratio_or_inf(r.prob_pauses_std, r.det_pauses_std);
  r.duration_baseline_degenerate = std::isinf(r.duration_std_ratio);
  r.pauses_baseline_degenerate = std::isinf(r.pauses_std_ratio);
  return r;
}

std::string to_string(SweepAxis a) { return a == SweepAxis::kNfe ? "nfe" : "tau"; }

SweepAxis sweep_axis_from_string(const std::string& s) {
  if (s == "nfe") return SweepAxis::kNfe;
  if (s == "tau") return SweepAxis::kTau;
  throw ConfigError("unknown sweep axis '" + s + "' (expected nfe or tau)");
}

std::vector<EvalItem> make_eval_items(const pipeline::Model& model, const task::Dataset& ds, std::size_t n_eval,
                                      bool cross_speaker, std::uint64_t seed) {
  const std::size_t begin = held_out_begin(model, ds);
  const std::size_t end = std::min(ds.utterances.size(), begin + n_eval);
  if (begin >= end) throw DataError("make_eval_items: the dataset has no held-out utterances");
  std::vector<EvalItem> items;
  for (std::size_t i = begin; i < end; ++i) {
    Rng rng(mix_seed(seed, (cross_speaker ? 0xC505ULL << 32 : 0x5A3EULL << 32) + i));
    const std::int32_t speaker = ds.utterances[i].speaker_id;
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < begin; ++j) {
      if ((ds.utterances[j].speaker_id == speaker) != cross_speaker) pool.push_back(j);
    }
    if (pool.empty()) throw DataError("make_eval_items: no prompt source for utterance " + std::to_string(i));
    const auto& src = ds.utterances[pool[rng.uniform_int(static_cast<std::uint64_t>(pool.size()))]];
    items.push_back({i, pipeline::make_prompt(src, model.config.prompt_frames, rng), src.speaker_id});
  }
  return items;
}

SweepReport sweep(const pipeline::Model& model, const task::Dataset& ds, const std::vector<EvalItem>& items,
                  SweepAxis axis, std::vector<double> values, const cfm::FlowConfig& base, std::uint64_t seed) {
  if (values.empty()) throw ContractError("sweep: no values");
  if (items.empty()) throw ContractError("sweep: no evaluation items");
  std::sort(values.begin(), values.end());
  SweepReport report;
  report.axis = axis;
  for (double value : values) {
    cfm::FlowConfig flow = base;
    if (axis == SweepAxis::kNfe) {
      if (value < 1.0 || value != std::floor(value)) throw DomainError("sweep: nfe values must be integers >= 1");
      flow.nfe = static_cast<int>(value);
    } else {
      flow.tau_infer = value;
    }
    flow.validate();
    SweepPoint p;
    p.value = value;
    double generated = 0.0;
    std::size_t frames = 0, frames_ok = 0;
    for (std::size_t k = 0; k < items.size(); ++k) {
      const auto& u = ds.utterances[items[k].index];
      Rng rng(mix_seed(seed, k));
      const auto r = pipeline::synthesize(model, ds.codec, u.phonemes, items[k].prompt, forced_options(u, flow), rng);
      p.mse += mean_squared(r.latent - u.latent);
      p.wall_seconds += r.wall_seconds;
      p.sample_seconds += r.sample_seconds;
      generated += r.generated_seconds;
      p.nfe = r.nfe;
      for (std::size_t f = 0; f < u.frames(); ++f) frames_ok += r.codes.column(f) == u.codes.column(f) ? 1 : 0;
      frames += u.frames();
    }
    p.mse /= static_cast<double>(items.size());
    p.code_accuracy = static_cast<double>(frames_ok) / static_cast<double>(frames);
    p.rtf = p.wall_seconds / generated;
    report.points.push_back(p);
  }
  return report;
}

AccuracyReport accuracy_report(const pipeline::Model& model, const task::Dataset& ds,
                               const std::vector<EvalItem>& same, const std::vector<EvalItem>& cross,
                               const cfm::FlowConfig& flow, std::uint64_t seed) {
  if (same.empty() || cross.empty()) throw ContractError("accuracy_report: empty evaluation set");
  AccuracyReport rep;
  std::array<std::size_t, kCodeLevels> tf_ok{};
  std::size_t frames = 0, frame_ok = 0, code_ok = 0;
  for (std::size_t k = 0; k < same.size(); ++k) {
    const auto& u = ds.utterances[same[k].index];
    {
      ag::NoGradGuard no_grad;
      const auto phon = model.encoder(u.phonemes);
      const auto al = dur::expand(phon, u.durations, u.silences);
      const CodeGrid pred = codes::greedy_decode(model.decoder.forward(al.expanded_hidden, same[k].prompt, &u.codes).logits);
      for (std::size_t l = 0; l < kCodeLevels; ++l) {
        for (std::size_t f = 0; f < u.frames(); ++f) tf_ok[l] += pred.at(l, f) == u.codes.at(l, f) ? 1 : 0;
      }
    }
    Rng rng(mix_seed(seed, k));
    const auto r = pipeline::synthesize(model, ds.codec, u.phonemes, same[k].prompt, forced_options(u, flow), rng);
    for (std::size_t f = 0; f < u.frames(); ++f) {
      std::size_t match = 0;
      for (std::size_t l = 0; l < kCodeLevels; ++l) match += r.codes.at(l, f) == u.codes.at(l, f) ? 1 : 0;
      code_ok += match;
      frame_ok += match == kCodeLevels ? 1 : 0;
    }
    frames += u.frames();
  }
  for (std::size_t l = 0; l < kCodeLevels; ++l) {
    rep.teacher_forced[l] = static_cast<double>(tf_ok[l]) / static_cast<double>(frames);
  }
  rep.content_teacher_forced = static_cast<double>(tf_ok[1] + tf_ok[2]) / static_cast<double>(2 * frames);
  rep.pipeline_frame = static_cast<double>(frame_ok) / static_cast<double>(frames);
  rep.pipeline_code = static_cast<double>(code_ok) / static_cast<double>(frames * kCodeLevels);
  rep.frames = frames;

  std::size_t cross_frames = 0, follow = 0;
  const std::int32_t sil = ds.spec.silence_code();
  for (std::size_t k = 0; k < cross.size(); ++k) {
    const auto& u = ds.utterances[cross[k].index];
    Rng rng(mix_seed(seed ^ 0xC505C505ULL, k));
    const auto r = pipeline::synthesize(model, ds.codec, u.phonemes, cross[k].prompt, forced_options(u, flow), rng);
    for (std::size_t f = 0; f < r.codes.frames(); ++f) {
      bool ok = true;
      for (std::size_t l = 3; l < kCodeLevels; ++l) {
        const std::int32_t want =
            r.alignment.frame_silent[f] ? sil : ds.codec.acoustic_code(cross[k].prompt_speaker, f, l);
        ok = ok && r.codes.at(l, f) == want;
      }
      follow += ok ? 1 : 0;
    }
    cross_frames += r.codes.frames();
  }
  rep.speaker_follow = static_cast<double>(follow) / static_cast<double>(cross_frames);
  return rep;
}

PriorSufficiencyReport prior_sufficiency(const TrainConfig& cfg, const task::Dataset& ds,
                                         const PriorSufficiencyConfig& pc) {
  const std::size_t n_train = pipeline::train_count(cfg, ds);
  const std::size_t eval_end = std::min(ds.utterances.size(), n_train + pc.n_eval);
  if (n_train == 0 || eval_end <= n_train) throw DataError("prior_sufficiency: need training and held-out utterances");
  const auto V = static_cast<std::size_t>(cfg.task.codebook_size);
  const auto D = static_cast<std::size_t>(cfg.task.d_lat);

  auto run = [&](denoise::Variant variant, bool zero_prior) {
    denoise::DenoiserConfig dc = cfg.denoiser;
    dc.variant = variant;
    Rng init(mix_seed(pc.seed, 0xF01D));
    codes::CodeFolder folder(V, D, cfg.codegen, init);
    denoise::Denoiser den(D, dc, init);
    nn::ParamList params;
    if (!zero_prior) folder.collect("folder", params);
    den.collect("denoiser", params);
    nn::AdamConfig oc = cfg.optim;
    if (oc.decay_steps > 0) oc.decay_steps = pc.steps;  // the schedule spans this run
    nn::Adam opt(params, oc);
    auto prior = [&](const task::Utterance& u) {
      return zero_prior ? ag::constant(Tensor(u.frames(), D)) : folder(u.codes);
    };
    const double inv_batch = 1.0 / static_cast<double>(pc.batch_size);
    for (std::int64_t step = 0; step < pc.steps; ++step) {
      Rng rng(mix_seed(pc.seed, static_cast<std::uint64_t>(step)));
      opt.zero_grad();
      for (std::size_t b = 0; b < pc.batch_size; ++b) {
        const auto& u = ds.utterances[rng.uniform_int(static_cast<std::uint64_t>(n_train))];
        const auto l = denoise::denoiser_losses(den, prior(u), u.latent, u.speaker_emb, cfg.flow, rng);
        const Var total = ag::add(ag::scale(l.cfm, cfg.weights.cfm), ag::scale(l.anchor, cfg.weights.anchor));
        if (!std::isfinite(total.item())) {
          throw NumericError("prior_sufficiency: non-finite loss at step " + std::to_string(step + 1) + " (" +
                             denoise::to_string(variant) + (zero_prior ? ", zero prior)" : ")"));
        }
        ag::backward(ag::scale(total, inv_batch));
      }
      opt.step();
    }
    double mse = 0.0;
    for (std::size_t i = n_train; i < eval_end; ++i) {
      const auto& u = ds.utterances[i];
      Rng rng(mix_seed(pc.seed ^ 0x5EEDULL, i));
      Tensor x_pr;
      {
        ag::NoGradGuard no_grad;
        x_pr = prior(u).value();
      }
      mse += mean_squared(denoise::denoiser_sample(den, x_pr, u.speaker_emb, cfg.flow, rng).latent - u.latent);
    }
    return mse / static_cast<double>(eval_end - n_train);
  };

  PriorSufficiencyReport r;
  r.attention_free_mse = run(denoise::Variant::kAttentionFree, false);
  r.attention_mse = run(denoise::Variant::kAttention, false);
  r.zero_prior_mse = run(denoise::Variant::kAttentionFree, true);
  r.relative_gap = std::abs(r.attention_free_mse - r.attention_mse) / r.attention_mse;
  r.zero_prior_ratio = r.zero_prior_mse / r.attention_free_mse;
  return r;
}

double median_seconds(const std::function<void()>& fn, const TimingOptions& opts) {
  if (opts.reps < 1) throw ContractError("median_seconds: reps must be >= 1");
  for (int i = 0; i < opts.warmup; ++i) fn();
  auto t0 = Clock::now();
  fn();
  const double one = seconds_since(t0);
  const auto batch = static_cast<int>(
      std::clamp(std::ceil(opts.min_sample_seconds / std::max(one, 1e-9)), 1.0, 1e6));
  std::vector<double> samples;
  for (int r = 0; r < opts.reps; ++r) {
    t0 = Clock::now();
    for (int i = 0; i < batch; ++i) fn();
    samples.push_back(seconds_since(t0) / batch);
  }
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  return n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("loglog_slope: need >= 2 paired points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("loglog_slope: values must be positive");
    mx += std::log(x[i]) / n;
    my += std::log(y[i]) / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0.0) throw DomainError("loglog_slope: x values are all equal");
  return sxy / sxx;
}

ComplexityReport complexity_probe(const std::vector<std::size_t>& lengths, const denoise::DenoiserConfig& base,
                                  std::size_t latent_dim, const TimingOptions& opts, std::uint64_t seed) {
  if (lengths.size() < 2) throw ContractError("complexity_probe: need at least two lengths");
  const auto [lo, hi] = std::minmax_element(lengths.begin(), lengths.end());
  if (*hi < 32 * *lo) throw ContractError("complexity_probe: lengths must span at least five octaves");
  ag::NoGradGuard no_grad;
  Rng rng(seed);
  denoise::DenoiserConfig free_cfg = base, attn_cfg = base;
  free_cfg.variant = denoise::Variant::kAttentionFree;
  attn_cfg.variant = denoise::Variant::kAttention;
  const denoise::Denoiser free_model(latent_dim, free_cfg, rng), attn_model(latent_dim, attn_cfg, rng);
  const Tensor spk = Tensor::randn(1, base.d_spk, rng);

  ComplexityReport rep;
  std::vector<double> ls, tf, ta;
  for (std::size_t L : lengths) {
    const Var x = ag::constant(Tensor::randn(L, latent_dim, rng));
    ComplexityPoint p;
    p.length = L;
    p.attention_free_seconds = median_seconds([&] { free_model(x, 0.5, spk); }, opts);
    p.attention_seconds = median_seconds([&] { attn_model(x, 0.5, spk); }, opts);
    rep.points.push_back(p);
    ls.push_back(static_cast<double>(L));
    tf.push_back(p.attention_free_seconds);
    ta.push_back(p.attention_seconds);
  }
  rep.attention_free_slope = loglog_slope(ls, tf);
  rep.attention_slope = loglog_slope(ls, ta);

  std::vector<ComplexityPoint> sorted = rep.points;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.length < b.length; });
  if (sorted.front().attention_seconds <= sorted.front().attention_free_seconds) {
    for (const auto& p : sorted) {
      if (p.attention_seconds > p.attention_free_seconds) {
        rep.crossover_length = static_cast<double>(p.length);
        rep.crossover_measured = true;
        break;
      }
    }
  }
  if (!rep.crossover_length && rep.attention_slope != rep.attention_free_slope) {
    // Intercepts of both fits at the log-mean length, then solve for equality.
    double mlx = 0.0, mf = 0.0, ma = 0.0;
    const double n = static_cast<double>(ls.size());
    for (std::size_t i = 0; i < ls.size(); ++i) {
      mlx += std::log(ls[i]) / n;
      mf += std::log(tf[i]) / n;
      ma += std::log(ta[i]) / n;
    }
    const double log_l = mlx + (mf - ma) / (rep.attention_slope - rep.attention_free_slope);
    rep.crossover_length = std::exp(log_l);
  }

  rep.d_probe_length = std::min<std::size_t>(1024, *hi);
  const std::size_t L = rep.d_probe_length;
  std::vector<double> ds, tm, tw;
  for (std::size_t mult : {1u, 2u, 4u}) {
    const std::size_t d = base.dim * mult;
    const Var x = ag::constant(Tensor::randn(L, d, rng));
    const Var w = ag::constant(Tensor::randn(base.kernel, d, rng));
    const Var b = ag::constant(Tensor::randn(1, d, rng));
    ds.push_back(static_cast<double>(d));
    tm.push_back(median_seconds([&] { ag::depthwise_conv1d(x, w, b); }, opts));
    denoise::DenoiserConfig c = free_cfg;
    c.dim = d;
    const denoise::Denoiser m(latent_dim, c, rng);
    const Var xl = ag::constant(Tensor::randn(L, latent_dim, rng));
    tw.push_back(median_seconds([&] { m(xl, 0.5, spk); }, opts));
  }
  rep.mixer_d_slope = loglog_slope(ds, tm);
  rep.forward_d_slope = loglog_slope(ds, tw);
  return rep;
}

nlohmann::json to_json(const TemporalReport& r) {
  auto ms = [](const MeanStd& m) { return nlohmann::json{{"mean", num(m.mean)}, {"std", num(m.std)}}; };
  return {{"utterances", r.utterances}, {"speech_rate", ms(r.speech_rate)}, {"mphd_s", ms(r.mphd)},
          {"n_pauses", ms(r.n_pauses)}, {"mpad_s", ms(r.mpad)},           {"no_pauses", r.no_pauses}};
}

nlohmann::json to_json(const DiversityRecord& r) {
  return {{"prob_duration_std", num(r.prob_duration_std)},
          {"det_duration_std", num(r.det_duration_std)},
          {"prob_pauses_std", num(r.prob_pauses_std)},
          {"det_pauses_std", num(r.det_pauses_std)},
          {"prob_max_position_std", num(r.prob_max_position_std)},
          {"det_max_position_std", num(r.det_max_position_std)},
          {"duration_std_ratio", num(r.duration_std_ratio)},
          {"pauses_std_ratio", num(r.pauses_std_ratio)},
          {"duration_flag", r.duration_baseline_degenerate ? "baseline-degenerate" : ""},
          {"pauses_flag", r.pauses_baseline_degenerate ? "baseline-degenerate" : ""}};
}

nlohmann::json to_json(const SweepReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"value", p.value}, {"mse", num(p.mse)}, {"code_accuracy", p.code_accuracy}, {"nfe", p.nfe}});
  }
  return {{"axis", to_string(r.axis)}, {"points", pts}};
}

nlohmann::json timing_json(const SweepReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"value", p.value},
                   {"wall_seconds", p.wall_seconds},
                   {"sample_seconds", p.sample_seconds},
                   {"rtf", num(p.rtf)}});
  }
  return {{"axis", to_string(r.axis)}, {"points", pts}};
}

nlohmann::json to_json(const AccuracyReport& r) {
  return {{"teacher_forced", r.teacher_forced},     {"content_teacher_forced", r.content_teacher_forced},
          {"pipeline_frame", r.pipeline_frame},     {"pipeline_code", r.pipeline_code},
          {"speaker_follow", r.speaker_follow},     {"frames", r.frames}};
}

nlohmann::json to_json(const PriorSufficiencyReport& r) {
  return {{"attention_free_mse", num(r.attention_free_mse)}, {"attention_mse", num(r.attention_mse)},
          {"zero_prior_mse", num(r.zero_prior_mse)},         {"relative_gap", num(r.relative_gap)},
          {"zero_prior_ratio", num(r.zero_prior_ratio)}};
}

nlohmann::json to_json(const ComplexityReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"length", p.length},
                   {"attention_free_seconds", p.attention_free_seconds},
                   {"attention_seconds", p.attention_seconds}});
  }
  return {{"points", pts},
          {"attention_free_slope", r.attention_free_slope},
          {"attention_slope", r.attention_slope},
          {"crossover_length", r.crossover_length ? nlohmann::json(*r.crossover_length) : nlohmann::json(nullptr)},
          {"crossover_measured", r.crossover_measured},
          {"d_probe_length", r.d_probe_length},
          {"mixer_d_slope", r.mixer_d_slope},
          {"forward_d_slope", r.forward_d_slope}};
}

std::string sweep_csv(const SweepReport& r) {
  std::string out = to_string(r.axis) + ",mse,code_accuracy,counted_nfe\n";
  for (const auto& p : r.points) out += fmt::format("{},{:.17g},{:.17g},{}\n", p.value, p.mse, p.code_accuracy, p.nfe);
  return out;
}

std::string sweep_timing_csv(const SweepReport& r) {
  std::string out = to_string(r.axis) + ",wall_seconds,sample_seconds,rtf\n";
  for (const auto& p : r.points) {
    out += fmt::format("{},{:.6e},{:.6e},{:.6e}\n", p.value, p.wall_seconds, p.sample_seconds, p.rtf);
  }
  return out;
}

std::string complexity_csv(const ComplexityReport& r) {
  std::string out = "length,attention_free_seconds,attention_seconds\n";
  for (const auto& p : r.points) {
    out += fmt::format("{},{:.6e},{:.6e}\n", p.length, p.attention_free_seconds, p.attention_seconds);
  }
  return out;
}

std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool log_x, bool log_y) {
  constexpr double W = 640, H = 420, ml = 70, mr = 150, mt = 40, mb = 55;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0) && (!log_y || y > 0);
  };
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  }
  if (x0 > x1) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return ml + (tx(v) - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return H - mb - (ty(v) - y0) / (y1 - y0) * (H - mt - mb); };

  std::ostringstream o;
  o << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                   W, H)
    << "\n";
  o << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", W, H) << "\n";
  o << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)", W / 2, title) << "\n";
  o << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/>)", ml, H - mb, W - mr) << "\n";
  o << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/>)", ml, mt, H - mb) << "\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0, fy = y0 + (y1 - y0) * i / 4.0;
    const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
    o << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="middle">{:.3g}</text>)", px(vx), H - mb + 18, vx)
      << "\n";
    o << fmt::format(R"(<text x="{:.1f}" y="{:.1f}" text-anchor="end">{:.3g}</text>)", ml - 6, py(vy) + 4, vy) << "\n";
  }
  o << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", (ml + W - mr) / 2, H - 12, x_label) << "\n";
  o << fmt::format(R"svg(<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>)svg",
                   (mt + H - mb) / 2, y_label)
    << "\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* c = colors[k % 5];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      pts += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
      o << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3" fill="{}"/>)", px(s.x[i]), py(s.y[i]), c) << "\n";
    }
    o << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>)", c, pts) << "\n";
    o << fmt::format(R"(<text x="{}" y="{}" fill="{}">{}</text>)", W - mr + 10, mt + 18 * (k + 1), c, s.label) << "\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace flamed::eval
