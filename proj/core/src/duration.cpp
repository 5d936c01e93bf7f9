// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/duration.hpp"

#include <cmath>
#include <string>

#include "flamed/cfm.hpp"
#include "flamed/errors.hpp"
#include "flamed/synthetic.hpp"

namespace flamed::dur {

namespace {

// Larger sampled counts are treated as divergence rather than silently clipped.
constexpr double kMaxFramesPerSegment = 1e5;

std::int32_t round_count(double log_value, std::size_t index, const char* what) {
  if (!std::isfinite(log_value)) {
    throw NumericError(std::string("non-finite sampled log-") + what + " at position " + std::to_string(index));
  }
  const double frames = std::exp(log_value);
  if (frames > kMaxFramesPerSegment) {
    throw NumericError(std::string("sampled ") + what + " of " + std::to_string(frames) + " frames at position " +
                       std::to_string(index));
  }
  return static_cast<std::int32_t>(std::round(frames));
}

void require_targets(const Tensor& target, std::size_t n, const char* name) {
  if (target.rows() != n || target.cols() != 1) {
    throw ContractError(std::string(name) + ": expected " + std::to_string(n) + "x1, got " + target.shape_str());
  }
  if (!target.all_finite()) {
    throw DataError(std::string(name) + ": non-finite target at row " + std::to_string(target.first_nonfinite_row()));
  }
}

}  // namespace

void GeneratorConfig::validate() const {
  if (hidden == 0) throw ConfigError("generator.hidden must be positive");
  if (blocks == 0) throw ConfigError("generator.blocks must be positive");
  if (kernel < 1 || kernel % 2 == 0) throw ConfigError("generator.kernel must be odd");
  if (expansion == 0) throw ConfigError("generator.expansion must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw ConfigError("generator.time_dim must be even and >= 2");
  if (!(eps_frames > 0.0 && eps_frames < 0.5)) {
    throw ConfigError("generator.eps_frames must lie in (0, 0.5) so zero counts round back to zero");
  }
  if (nfe < 1) throw ConfigError("generator.nfe must be >= 1");
}

void EncodedPhonemes::check() const {
  if (ids.empty()) throw ContractError("encoded phonemes: empty sequence");
  if (ids.front() != task::kSilId) throw ContractError("encoded phonemes: first token must be [SIL]");
  if (!hidden || hidden.rows() != ids.size()) {
    throw ContractError("encoded phonemes: hidden rows do not match " + std::to_string(ids.size()) + " ids");
  }
}

std::vector<std::int32_t> ExpandedAlignment::frame_tokens(const std::vector<std::int32_t>& ids) const {
  std::vector<std::int32_t> out(frames());
  for (std::size_t f = 0; f < out.size(); ++f) {
    out[f] = frame_silent[f] ? task::kSilId : ids[static_cast<std::size_t>(frame_phoneme[f])];
  }
  return out;
}

FlowGenerator::FlowGenerator(std::size_t cond_dim, const GeneratorConfig& cfg, Rng& rng)
    : input_(cond_dim + 1, cfg.hidden, rng), time_(cfg.time_dim, cfg.hidden, rng), norm_(cfg.hidden),
      head_(cfg.hidden, 1, rng) {
  for (std::size_t b = 0; b < cfg.blocks; ++b) blocks_.emplace_back(cfg.hidden, cfg.kernel, cfg.expansion, rng);
}

Var FlowGenerator::operator()(const Var& x_t, const Var& hidden, double t) const {
  if (x_t.rows() != hidden.rows() || x_t.cols() != 1) {
    throw ContractError("flow generator: x_t is " + x_t.value().shape_str() + " but hidden has " +
                        std::to_string(hidden.rows()) + " rows");
  }
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("flow generator: t outside [0, 1]");
  Var h = ag::add_row(input_(ag::concat_cols({x_t, hidden})), time_(t));
  for (const auto& block : blocks_) h = block(h);
  return head_(norm_(h));
}

void FlowGenerator::collect(const std::string& prefix, nn::ParamList& out) const {
  input_.collect(prefix + ".input", out);
  time_.collect(prefix + ".time", out);
  for (std::size_t b = 0; b < blocks_.size(); ++b) blocks_[b].collect(prefix + ".block" + std::to_string(b), out);
  norm_.collect(prefix + ".norm", out);
  head_.collect(prefix + ".head", out);
}

DurationSilence::DurationSilence(std::size_t cond_dim, const GeneratorConfig& cfg, Rng& rng)
    : config(cfg), duration(cond_dim, cfg, rng), silence(cond_dim, cfg, rng) {
  cfg.validate();
}

void DurationSilence::collect(const std::string& prefix, nn::ParamList& out) const {
  duration.collect(prefix + ".duration", out);
  silence.collect(prefix + ".silence", out);
}

Tensor log_targets(const std::vector<std::int32_t>& counts, double eps) {
  Tensor out(counts.size(), 1);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0) throw DataError("negative frame count at position " + std::to_string(i));
    out[i] = std::log(std::max(static_cast<double>(counts[i]), eps));
  }
  return out;
}

std::pair<Var, Var> dur_sil_training_loss(const DurationSilence& model, const EncodedPhonemes& phon,
                                          const Tensor& d1_log, const Tensor& s1_log, double t,
                                          const Tensor& d0, const Tensor& s0) {
  phon.check();
  const std::size_t n = phon.size();
  require_targets(d1_log, n, "duration target");
  require_targets(s1_log, n, "silence target");
  require_same_shape(d0, d1_log, "duration noise");
  require_same_shape(s0, s1_log, "silence noise");
  const Tensor d_t = d1_log * t + d0 * (1.0 - t);
  const Tensor s_t = s1_log * t + s0 * (1.0 - t);
  Var vd = model.duration(ag::constant(d_t), phon.hidden, t);
  Var vs = model.silence(ag::constant(s_t), phon.hidden, t);
  return {ag::mse(vd, ag::constant(d1_log - d0)), ag::mse(vs, ag::constant(s1_log - s0))};
}

std::pair<Var, Var> dur_sil_training_loss(const DurationSilence& model, const EncodedPhonemes& phon,
                                          const Tensor& d1_log, const Tensor& s1_log, Rng& rng) {
  const double t = rng.uniform();
  const Tensor d0 = Tensor::randn(d1_log.rows(), 1, rng);
  const Tensor s0 = Tensor::randn(s1_log.rows(), 1, rng);
  return dur_sil_training_loss(model, phon, d1_log, s1_log, t, d0, s0);
}

std::pair<std::vector<std::int32_t>, std::vector<std::int32_t>> counts_from_logs(const Tensor& d_log,
                                                                                 const Tensor& s_log) {
  require_same_shape(d_log, s_log, "counts_from_logs");
  const std::size_t n = d_log.rows();
  std::vector<std::int32_t> durations(n, 0), silences(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) durations[i] = std::max(round_count(d_log[i], i, "duration"), 1);
    silences[i] = round_count(s_log[i], i, "silence");
  }
  return {durations, silences};
}

ExpandedAlignment expand(const EncodedPhonemes& phon, std::vector<std::int32_t> durations,
                         std::vector<std::int32_t> silences) {
  phon.check();
  const std::size_t n = phon.size();
  if (durations.size() != n || silences.size() != n) {
    throw ContractError("expand: " + std::to_string(n) + " phonemes but " + std::to_string(durations.size()) +
                        " durations and " + std::to_string(silences.size()) + " silences");
  }
  if (durations[0] != 0) throw ContractError("expand: the leading [SIL] must have duration 0");
  ExpandedAlignment a;
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && durations[i] < 1) throw ContractError("expand: duration < 1 at position " + std::to_string(i));
    if (silences[i] < 0) throw ContractError("expand: negative silence at position " + std::to_string(i));
    for (std::int32_t k = 0; k < durations[i]; ++k) {
      rows.push_back(i);
      a.frame_phoneme.push_back(static_cast<std::int32_t>(i));
      a.frame_silent.push_back(0);
    }
    for (std::int32_t k = 0; k < silences[i]; ++k) {
      rows.push_back(0);
      a.frame_phoneme.push_back(static_cast<std::int32_t>(i));
      a.frame_silent.push_back(1);
    }
  }
  a.expanded_hidden = ag::gather_rows(phon.hidden, rows);
  a.durations = std::move(durations);
  a.silences = std::move(silences);
  return a;
}

SampledTiming sample_and_expand(const DurationSilence& model, const EncodedPhonemes& phon, int nfe, Rng& rng) {
  phon.check();
  if (nfe < 1) throw DomainError("sample_and_expand: nfe must be >= 1");
  ag::NoGradGuard no_grad;
  const std::size_t n = phon.size();
  Tensor d0 = Tensor::randn(n, 1, rng);
  Tensor s0 = Tensor::randn(n, 1, rng);
  auto field = [&phon](const FlowGenerator& gen) {
    return [&phon, &gen](const Tensor& x, double t) { return gen(ag::constant(x), phon.hidden, t).value(); };
  };
  SampledTiming out;
  out.d_log = cfm::euler_sample(field(model.duration), std::move(d0), nfe).x1;
  out.s_log = cfm::euler_sample(field(model.silence), std::move(s0), nfe).x1;
  auto [durations, silences] = counts_from_logs(out.d_log, out.s_log);
  out.alignment = expand(phon, std::move(durations), std::move(silences));
  return out;
}

StochasticityReport duration_stochasticity_probe(const DurationSilence& model, const EncodedPhonemes& phon,
                                                 int n_runs, int nfe, std::uint64_t seed, bool fixed_seed) {
  if (n_runs < 2) throw DomainError("duration_stochasticity_probe: n_runs must be >= 2");
  const std::size_t n = phon.size();
  const auto runs = static_cast<std::size_t>(n_runs);
  std::vector<std::vector<double>> dur(n), sil(n), logd(n);
  for (std::size_t r = 0; r < runs; ++r) {
    Rng rng(fixed_seed ? seed : seed + r);
    const SampledTiming s = sample_and_expand(model, phon, nfe, rng);
    for (std::size_t i = 0; i < n; ++i) {
      dur[i].push_back(s.alignment.durations[i]);
      sil[i].push_back(s.alignment.silences[i]);
      logd[i].push_back(s.d_log[i]);
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    return m / static_cast<double>(v.size());
  };
  auto sample_std = [&mean](const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
  };
  StochasticityReport rep;
  for (std::size_t i = 0; i < n; ++i) {
    rep.duration_std.push_back(sample_std(dur[i]));
    rep.silence_std.push_back(sample_std(sil[i]));
    rep.mean_log_duration.push_back(mean(logd[i]));
    rep.log_duration_std.push_back(sample_std(logd[i]));
  }
  return rep;
}

}  // namespace flamed::dur
