// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "flamed/synthetic.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "flamed/binary_io.hpp"
#include "flamed/errors.hpp"

namespace flamed::task {

namespace {

constexpr char kDatasetMagic[] = "FLMDDATA";
constexpr char kFramesMagic[] = "FLMDFRMS";
constexpr std::uint32_t kFormatVersion = 1;
constexpr std::uint64_t kDataStreamSalt = 0xD1B54A32D192ED03ULL;

std::int32_t draw_code(Rng& rng, std::int32_t vocab_without_silence) {
  return static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(vocab_without_silence)));
}

std::int32_t round_count(double x) {
  return static_cast<std::int32_t>(std::round(std::min(x, 1e6)));
}

void write_tensor_f32(io::ByteWriter& w, const Tensor& t) {
  for (double v : t.values()) w.f32(static_cast<float>(v));
}

Tensor read_tensor_f32(io::ByteReader& r, std::size_t rows, std::size_t cols) {
  Tensor t(rows, cols);
  for (auto& v : t.values()) v = r.f32();
  return t;
}

void write_spec(io::ByteWriter& w, const TaskSpec& s) {
  w.i32(s.n_phonemes);
  w.i32(s.n_speakers);
  w.i32(s.codebook_size);
  w.i32(s.n_levels);
  w.i32(s.d_lat);
  w.i32(s.d_spk);
  w.i32(s.min_phonemes);
  w.i32(s.max_phonemes);
  w.f64(s.frame_hop_s);
  w.u64(s.seed);
  w.f64(s.dur_log_mean_lo);
  w.f64(s.dur_log_mean_hi);
  w.f64(s.dur_log_std);
  w.f64(s.silence_prob);
  w.f64(s.sil_log_mean);
  w.f64(s.sil_log_std);
  w.f64(s.latent_noise_std);
}

TaskSpec read_spec(io::ByteReader& r) {
  TaskSpec s;
  s.n_phonemes = r.i32();
  s.n_speakers = r.i32();
  s.codebook_size = r.i32();
  s.n_levels = r.i32();
  s.d_lat = r.i32();
  s.d_spk = r.i32();
  s.min_phonemes = r.i32();
  s.max_phonemes = r.i32();
  s.frame_hop_s = r.f64();
  s.seed = r.u64();
  s.dur_log_mean_lo = r.f64();
  s.dur_log_mean_hi = r.f64();
  s.dur_log_std = r.f64();
  s.silence_prob = r.f64();
  s.sil_log_mean = r.f64();
  s.sil_log_std = r.f64();
  s.latent_noise_std = r.f64();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("invalid task spec (") + e.what() + ")");
  }
  return s;
}

void write_int_vector(io::ByteWriter& w, const std::vector<std::int32_t>& v) {
  for (auto x : v) w.i32(x);
}

std::vector<std::int32_t> read_int_vector(io::ByteReader& r, std::size_t n) {
  std::vector<std::int32_t> v(n);
  for (auto& x : v) x = r.i32();
  return v;
}

}  // namespace

void TaskSpec::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("task." + msg); };
  if (n_levels != static_cast<std::int32_t>(kCodeLevels)) fail("n_levels must be 6");
  if (n_phonemes < 1) fail("n_phonemes must be >= 1");
  if (n_speakers < 1) fail("n_speakers must be >= 1");
  if (codebook_size < 2) fail("codebook_size must be >= 2");
  if (d_lat < 7) fail("d_lat must be >= 7 (six code blocks plus a speaker block)");
  if (d_spk < 1) fail("d_spk must be >= 1");
  if (!(frame_hop_s > 0.0)) fail("frame_hop_s must be > 0");
  if (min_phonemes < 1 || max_phonemes < min_phonemes) fail("phoneme count range is empty");
  if (!(dur_log_std >= 0.0) || !(sil_log_std >= 0.0)) fail("log-duration stds must be >= 0");
  if (!(dur_log_mean_hi >= dur_log_mean_lo)) fail("dur_log_mean_hi must be >= dur_log_mean_lo");
  if (!(silence_prob >= 0.0 && silence_prob <= 1.0)) fail("silence_prob must lie in [0,1]");
  if (!(latent_noise_std >= 0.0)) fail("latent_noise_std must be >= 0");
}

void round_to_float32(Tensor& t) {
  for (auto& v : t.values()) v = static_cast<double>(static_cast<float>(v));
}

Codec Codec::create(const TaskSpec& spec) {
  spec.validate();
  Codec c;
  c.spec = spec;
  Rng rng(spec.seed);
  const auto V = static_cast<std::size_t>(spec.codebook_size);
  const auto d = static_cast<std::size_t>(spec.d_lat);
  const std::size_t width = spec.block_width();
  const double emb_std = std::pow(static_cast<double>(d), -0.25);

  for (std::size_t level = 0; level < kCodeLevels; ++level) {
    Tensor e(V, d);
    for (std::size_t code = 0; code < V; ++code)
      for (std::size_t j = level * width; j < (level + 1) * width; ++j) e(code, j) = emb_std * rng.normal();
    round_to_float32(e);
    c.embeddings[level] = std::move(e);
  }

  const auto S = static_cast<std::size_t>(spec.n_speakers);
  const auto ds = static_cast<std::size_t>(spec.d_spk);
  c.speaker_emb = Tensor::randn(S, ds, rng);
  round_to_float32(c.speaker_emb);
  c.speaker_proj = Tensor(ds, d);
  const double proj_std = emb_std / std::sqrt(static_cast<double>(ds));
  for (std::size_t k = 0; k < ds; ++k)
    for (std::size_t j = kCodeLevels * width; j < d; ++j) c.speaker_proj(k, j) = proj_std * rng.normal();
  round_to_float32(c.speaker_proj);

  const auto P = static_cast<std::size_t>(spec.n_phonemes) + 1;
  const std::int32_t voiced_vocab = spec.codebook_size - 1;
  c.phoneme_log_mean.assign(P, 0.0);
  for (std::size_t p = 1; p < P; ++p) {
    c.phoneme_log_mean[p] = rng.uniform(spec.dur_log_mean_lo, spec.dur_log_mean_hi);
  }
  c.prosody.assign(P * S, 0);
  for (std::size_t p = 1; p < P; ++p)
    for (std::size_t s = 0; s < S; ++s) c.prosody[p * S + s] = draw_code(rng, voiced_vocab);
  c.content_a.assign(P, 0);
  c.content_b.assign(P, 0);
  for (std::size_t p = 1; p < P; ++p) {
    c.content_a[p] = draw_code(rng, voiced_vocab);
    c.content_b[p] = draw_code(rng, voiced_vocab);
  }
  c.acoustic.assign(S * kAcousticPeriod * 3, 0);
  for (auto& a : c.acoustic) a = draw_code(rng, voiced_vocab);
  return c;
}

std::int32_t Codec::prosody_code(std::int32_t phoneme, std::int32_t speaker) const {
  return prosody[static_cast<std::size_t>(phoneme) * static_cast<std::size_t>(spec.n_speakers) +
                 static_cast<std::size_t>(speaker)];
}

std::int32_t Codec::acoustic_code(std::int32_t speaker, std::size_t frame, std::size_t level) const {
  return acoustic[(static_cast<std::size_t>(speaker) * kAcousticPeriod + frame % kAcousticPeriod) * 3 +
                  (level - 3)];
}

std::array<std::int32_t, kCodeLevels> Codec::frame_codes(std::int32_t phoneme, std::int32_t speaker,
                                                         std::size_t frame) const {
  const auto p = static_cast<std::size_t>(phoneme);
  return {prosody_code(phoneme, speaker), content_a[p], content_b[p], acoustic_code(speaker, frame, 3),
          acoustic_code(speaker, frame, 4), acoustic_code(speaker, frame, 5)};
}

std::array<std::int32_t, kCodeLevels> Codec::silence_codes() const {
  std::array<std::int32_t, kCodeLevels> c{};
  c.fill(spec.silence_code());
  return c;
}

Tensor Codec::speaker_embedding(std::int32_t speaker) const {
  Tensor e(1, speaker_emb.cols());
  for (std::size_t k = 0; k < e.cols(); ++k) e[k] = speaker_emb(static_cast<std::size_t>(speaker), k);
  return e;
}

Tensor Codec::speaker_offset(std::int32_t speaker) const {
  Tensor off(1, speaker_proj.cols());
  for (std::size_t k = 0; k < speaker_proj.rows(); ++k) {
    const double e = speaker_emb(static_cast<std::size_t>(speaker), k);
    for (std::size_t j = 0; j < off.cols(); ++j) off[j] += e * speaker_proj(k, j);
  }
  return off;
}

Tensor Codec::codes_to_latent(const CodeGrid& codes, std::int32_t speaker, double noise_std,
                              Rng* rng) const {
  const auto d = static_cast<std::size_t>(spec.d_lat);
  const Tensor off = speaker_offset(speaker);
  Tensor lat(codes.frames(), d);
  for (std::size_t f = 0; f < codes.frames(); ++f) {
    auto row = lat.row(f);
    for (std::size_t j = 0; j < d; ++j) row[j] = off[j];
    for (std::size_t l = 0; l < kCodeLevels; ++l) {
      const auto code = static_cast<std::size_t>(codes.at(l, f));
      for (std::size_t j = 0; j < d; ++j) row[j] += embeddings[l](code, j);
    }
    if (rng != nullptr && noise_std > 0.0) {
      for (auto& v : row) v += noise_std * rng->normal();
    }
  }
  round_to_float32(lat);
  return lat;
}

Utterance make_utterance(const Codec& codec, std::vector<std::int32_t> phonemes, std::int32_t speaker,
                         std::vector<std::int32_t> durations, std::vector<std::int32_t> silences,
                         double noise_std, Rng* rng) {
  if (phonemes.empty() || phonemes.front() != kSilId) throw DataError("make_utterance: phonemes must start with [SIL]");
  if (durations.size() != phonemes.size() || silences.size() != phonemes.size()) {
    throw DataError("make_utterance: durations/silences length must match phonemes");
  }
  if (speaker < 0 || speaker >= codec.spec.n_speakers) throw DataError("make_utterance: speaker out of range");
  std::size_t total = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    if (durations[i] < 0 || silences[i] < 0) throw DataError("make_utterance: negative duration");
    if (i > 0 && durations[i] < 1) throw DataError("make_utterance: phoneme duration must be >= 1");
    if (phonemes[i] < 0 || phonemes[i] > codec.spec.n_phonemes) throw DataError("make_utterance: phoneme id out of range");
    total += static_cast<std::size_t>(durations[i] + silences[i]);
  }
  Utterance u;
  u.codes = CodeGrid(total);
  std::size_t f = 0;
  for (std::size_t i = 0; i < phonemes.size(); ++i) {
    for (std::int32_t k = 0; k < durations[i]; ++k, ++f) u.codes.set_column(f, codec.frame_codes(phonemes[i], speaker, f));
    for (std::int32_t k = 0; k < silences[i]; ++k, ++f) u.codes.set_column(f, codec.silence_codes());
  }
  u.latent = codec.codes_to_latent(u.codes, speaker, noise_std, rng);
  u.phonemes = std::move(phonemes);
  u.speaker_id = speaker;
  u.speaker_emb = codec.speaker_embedding(speaker);
  u.durations = std::move(durations);
  u.silences = std::move(silences);
  return u;
}

TimedText sample_timed_text(const Codec& codec, Rng& rng) {
  const TaskSpec& s = codec.spec;
  const auto n = static_cast<std::size_t>(rng.uniform_int(s.min_phonemes, s.max_phonemes));
  TimedText tt;
  tt.phonemes.push_back(kSilId);
  for (std::size_t i = 0; i < n; ++i) tt.phonemes.push_back(static_cast<std::int32_t>(rng.uniform_int(1, s.n_phonemes)));
  for (std::size_t i = 0; i < tt.phonemes.size(); ++i) {
    if (i == 0) {
      tt.durations.push_back(0);
    } else {
      const double mu = codec.phoneme_log_mean[static_cast<std::size_t>(tt.phonemes[i])];
      tt.durations.push_back(std::max(1, round_count(std::exp(rng.normal(mu, s.dur_log_std)))));
    }
    if (rng.bernoulli(s.silence_prob)) {
      tt.silences.push_back(std::max(1, round_count(std::exp(rng.normal(s.sil_log_mean, s.sil_log_std)))));
    } else {
      tt.silences.push_back(0);
    }
  }
  return tt;
}

Dataset generate_dataset(const TaskSpec& spec, std::size_t n_utterances) {
  if (n_utterances < 1) throw ConfigError("generate_dataset: n_utterances must be >= 1");
  Dataset ds;
  ds.spec = spec;
  ds.codec = Codec::create(spec);
  Rng rng(spec.seed ^ kDataStreamSalt);
  ds.utterances.reserve(n_utterances);
  for (std::size_t i = 0; i < n_utterances; ++i) {
    const auto speaker = static_cast<std::int32_t>(rng.uniform_int(static_cast<std::uint64_t>(spec.n_speakers)));
    TimedText tt = sample_timed_text(ds.codec, rng);
    ds.utterances.push_back(make_utterance(ds.codec, std::move(tt.phonemes), speaker, std::move(tt.durations),
                                           std::move(tt.silences), spec.latent_noise_std, &rng));
  }
  return ds;
}

CodeGrid codec_decode(const Tensor& latent, const Codec& codec) {
  const auto d = static_cast<std::size_t>(codec.spec.d_lat);
  if (latent.cols() != d && !latent.empty()) {
    throw ContractError("codec_decode: latent has " + std::to_string(latent.cols()) + " columns, expected " +
                        std::to_string(d));
  }
  const auto V = static_cast<std::size_t>(codec.spec.codebook_size);
  CodeGrid out(latent.rows());
  std::vector<double> residual(d);
  for (std::size_t f = 0; f < latent.rows(); ++f) {
    auto row = latent.row(f);
    residual.assign(row.begin(), row.end());
    for (std::size_t l = 0; l < kCodeLevels; ++l) {
      const Tensor& e = codec.embeddings[l];
      std::size_t best = 0;
      double best_dist = std::numeric_limits<double>::infinity();
      for (std::size_t code = 0; code < V; ++code) {
        double dist = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double diff = residual[j] - e(code, j);
          dist += diff * diff;
        }
        if (dist < best_dist) {
          best_dist = dist;
          best = code;
        }
      }
      out.at(l, f) = static_cast<std::int32_t>(best);
      for (std::size_t j = 0; j < d; ++j) residual[j] -= e(best, j);
    }
  }
  return out;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 8));
  w.u32(kFormatVersion);
  write_spec(w, ds.spec);
  const Codec& c = ds.codec;
  for (const auto& e : c.embeddings) write_tensor_f32(w, e);
  write_tensor_f32(w, c.speaker_emb);
  write_tensor_f32(w, c.speaker_proj);
  for (double m : c.phoneme_log_mean) w.f64(m);
  write_int_vector(w, c.prosody);
  write_int_vector(w, c.content_a);
  write_int_vector(w, c.content_b);
  write_int_vector(w, c.acoustic);
  w.u32(static_cast<std::uint32_t>(ds.utterances.size()));
  for (const auto& u : ds.utterances) {
    io::ByteWriter rec;
    rec.i32(u.speaker_id);
    rec.u32(static_cast<std::uint32_t>(u.phonemes.size()));
    write_int_vector(rec, u.phonemes);
    write_int_vector(rec, u.durations);
    write_int_vector(rec, u.silences);
    rec.u32(static_cast<std::uint32_t>(u.frames()));
    write_int_vector(rec, u.codes.raw());
    write_tensor_f32(rec, u.latent);
    w.u32(static_cast<std::uint32_t>(rec.size()));
    w.append(rec);
  }
  io::write_file(path, w.buffer());
}

Dataset load_dataset(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  if (r.bytes(8) != std::string_view(kDatasetMagic, 8)) r.fail("bad dataset magic");
  if (const auto v = r.u32(); v != kFormatVersion) r.fail("unsupported dataset version " + std::to_string(v));
  Dataset ds;
  ds.spec = read_spec(r);
  Codec c = Codec::create(ds.spec);  // shapes; contents overwritten below
  const auto V = static_cast<std::size_t>(ds.spec.codebook_size);
  const auto d = static_cast<std::size_t>(ds.spec.d_lat);
  for (auto& e : c.embeddings) e = read_tensor_f32(r, V, d);
  c.speaker_emb = read_tensor_f32(r, c.speaker_emb.rows(), c.speaker_emb.cols());
  c.speaker_proj = read_tensor_f32(r, c.speaker_proj.rows(), c.speaker_proj.cols());
  for (auto& m : c.phoneme_log_mean) m = r.f64();
  c.prosody = read_int_vector(r, c.prosody.size());
  c.content_a = read_int_vector(r, c.content_a.size());
  c.content_b = read_int_vector(r, c.content_b.size());
  c.acoustic = read_int_vector(r, c.acoustic.size());
  ds.codec = std::move(c);
  const std::uint32_t n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t rec_len = r.u32();
    const std::size_t start = r.offset();
    if (r.remaining() < rec_len) r.fail("truncated utterance record " + std::to_string(i));
    Utterance u;
    u.speaker_id = r.i32();
    if (u.speaker_id < 0 || u.speaker_id >= ds.spec.n_speakers) r.fail("speaker id out of range");
    const std::uint32_t n_ph = r.u32();
    if (static_cast<std::size_t>(n_ph) * 12 > rec_len) r.fail("phoneme count exceeds record length");
    u.phonemes = read_int_vector(r, n_ph);
    u.durations = read_int_vector(r, n_ph);
    u.silences = read_int_vector(r, n_ph);
    const std::uint32_t frames = r.u32();
    if (static_cast<std::size_t>(frames) * (kCodeLevels + d) * 4 > rec_len) r.fail("frame count exceeds record length");
    u.codes = CodeGrid(frames);
    u.codes.raw() = read_int_vector(r, kCodeLevels * frames);
    u.latent = read_tensor_f32(r, frames, d);
    if (r.offset() - start != rec_len) r.fail("utterance record length mismatch");
    u.speaker_emb = ds.codec.speaker_embedding(u.speaker_id);
    ds.utterances.push_back(std::move(u));
  }
  if (!r.at_end()) r.fail("trailing bytes after last record");
  return ds;
}

FrameFeatures render_frames(const Tensor& latent, const TaskSpec& spec) {
  FrameFeatures ff;
  ff.hop_s = spec.frame_hop_s;
  ff.frames = latent.empty() ? Tensor(0, static_cast<std::size_t>(spec.d_lat)) : latent;
  return ff;
}

void write_frame_features(const FrameFeatures& ff, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.bytes(std::string_view(kFramesMagic, 8));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(ff.frames.rows()));
  w.f64(ff.hop_s);
  w.u32(static_cast<std::uint32_t>(ff.frames.cols()));
  write_tensor_f32(w, ff.frames);
  io::write_file(path, w.buffer());
}

FrameFeatures read_frame_features(const std::filesystem::path& path) {
  io::ByteReader r(io::read_file(path), path.string());
  if (r.bytes(8) != std::string_view(kFramesMagic, 8)) r.fail("bad frame-feature magic");
  if (const auto v = r.u32(); v != kFormatVersion) r.fail("unsupported frame-feature version " + std::to_string(v));
  const std::uint32_t frames = r.u32();
  FrameFeatures ff;
  ff.hop_s = r.f64();
  const std::uint32_t cols = r.u32();
  if (static_cast<std::size_t>(frames) * cols * 4 != r.remaining()) r.fail("frame payload size mismatch");
  ff.frames = read_tensor_f32(r, frames, cols);
  return ff;
}

}  // namespace flamed::task
