// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "flamed/binary_io.hpp"
#include "flamed/config.hpp"
#include "flamed/errors.hpp"
#include "flamed/evalbench.hpp"
#include "flamed/pipeline.hpp"

namespace flamed::cli {
namespace {

namespace fs = std::filesystem;
using io::write_text_file;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Config file (JSON)");
  sub->add_option("--set", c.sets, "Override, dotted key=value (repeatable)")->take_all();
  c.seed_opt = sub->add_option("--seed", c.seed, "Seed for every random stream of the command");
  sub->add_option("--out", c.out, "Output directory")->required();
}

// Layers defaults, then the config file (or the checkpoint's embedded config
// when no file is given), then --set overrides, then --seed.
TrainConfig resolve(const Common& c, const TrainConfig* embedded) {
  std::vector<std::string> overrides = c.sets;
  if (c.seed_opt && c.seed_opt->count() > 0) overrides.push_back("seed=" + std::to_string(c.seed));
  if (c.config.empty() && embedded) {
    nlohmann::json tree = to_json(*embedded);
    for (const auto& o : overrides) apply_override(tree, o);
    TrainConfig cfg = config_from_json(tree, "checkpoint config");
    cfg.validate();
    return cfg;
  }
  return resolve_config(c.config, overrides);
}

void echo_config(const TrainConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  const std::string text = config_to_text(cfg);
  out << text;
  if (text.empty() || text.back() != '\n') out << '\n';
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.echo", text);
}

task::Dataset load_or_generate(const TrainConfig& cfg, const std::string& data) {
  if (data.empty()) return task::generate_dataset(cfg.task, cfg.n_utterances + cfg.n_eval);
  task::Dataset ds = task::load_dataset(data);
  if (!(ds.spec == cfg.task)) throw ConfigError("dataset " + data + " was generated with a different task config");
  return ds;
}

std::string jsonl(const std::vector<nlohmann::json>& records) {
  std::string s;
  for (const auto& r : records) s += r.dump() + "\n";
  return s;
}

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ContractError(flag + ": '" + item + "' is not a number");
    }
  }
  if (v.empty()) throw ContractError(flag + ": empty list");
  return v;
}

std::string loss_plot(const std::vector<pipeline::StepLog>& log) {
  eval::Series s{"total loss", {}, {}};
  const std::size_t stride = std::max<std::size_t>(1, log.size() / 500);
  for (std::size_t i = 0; i < log.size(); i += stride) {
    double sum = 0.0;
    const std::size_t end = std::min(log.size(), i + stride);
    for (std::size_t j = i; j < end; ++j) sum += log[j].loss.total;
    s.x.push_back(static_cast<double>(log[i].step));
    s.y.push_back(sum / static_cast<double>(end - i));
  }
  return eval::svg_line_plot("Training loss", "step", "loss", {s}, false, true);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- gen-data

int cmd_gen_data(const Common& c, std::int64_t n, std::ostream& out) {
  const TrainConfig cfg = resolve(c, nullptr);
  const fs::path dir = c.out;
  echo_config(cfg, dir, out);
  const std::size_t count = n > 0 ? static_cast<std::size_t>(n) : cfg.n_utterances + cfg.n_eval;
  const task::Dataset ds = task::generate_dataset(cfg.task, count);
  task::save_dataset(ds, dir / "dataset.bin");

  std::string csv = "index,speaker,phonemes,frames,pauses\n";
  std::vector<pipeline::Alignment> al;
  std::vector<std::size_t> syl;
  for (std::size_t i = 0; i < ds.utterances.size(); ++i) {
    const auto& u = ds.utterances[i];
    al.push_back(pipeline::Alignment::from_counts(u.durations, u.silences));
    syl.push_back(u.phonemes.size() - 1);
    csv += fmt::format("{},{},{},{},{}\n", i, u.speaker_id, u.phonemes.size(), u.frames(),
                       eval::pause_stats(al.back().frame_silent).count);
  }
  write_text_file(dir / "metrics.csv", csv);
  const auto temporal = eval::temporal_metrics(al, syl, cfg.task.frame_hop_s);
  write_text_file(dir / "report.jsonl",
                  jsonl({{{"record", "dataset"}, {"utterances", ds.utterances.size()}},
                         {{"record", "temporal_ground_truth"}, {"metrics", eval::to_json(temporal)}}}));
  fmt::print(out, "wrote {} utterances to {}\n", ds.utterances.size(), (dir / "dataset.bin").string());
  return kExitOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const Common& c, const std::string& data, const std::string& resume, std::ostream& out) {
  const TrainConfig cfg = resolve(c, nullptr);
  const fs::path dir = c.out;
  echo_config(cfg, dir, out);
  const task::Dataset ds = load_or_generate(cfg, data);
  pipeline::Model model(cfg);
  pipeline::TrainOptions opts;
  opts.checkpoint_dir = dir / "checkpoints";
  if (!resume.empty()) opts.resume_from = resume;
  opts.on_step = [&](const pipeline::StepLog& s) {
    if (cfg.log_every > 0 && (s.step % cfg.log_every == 0 || s.step == cfg.max_steps)) {
      fmt::print(out, "step {:6d}  loss {:.5f}  grad {:.4f}  lr {:.2e}\n", s.step, s.loss.total, s.grad_norm, s.lr);
      out.flush();
    }
  };
  const pipeline::TrainResult res = pipeline::train(model, ds, opts);

  std::string csv = "step,total,prior,duration,silence,cfm,anchor,grad_norm,lr\n";
  for (const auto& s : res.log) {
    csv += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", s.step, s.loss.total,
                       s.loss.prior, s.loss.duration, s.loss.silence, s.loss.cfm, s.loss.anchor, s.grad_norm, s.lr);
  }
  write_text_file(dir / "metrics.csv", csv);
  fs::create_directories(dir / "plots");
  write_text_file(dir / "plots" / "loss.svg", loss_plot(res.log));

  const std::size_t window = std::max<std::size_t>(1, std::min<std::size_t>(1000, res.log.size() / 10));
  std::vector<double> first, last;
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    if (i < window) first.push_back(res.log[i].loss.total);
    if (i + window >= res.log.size()) last.push_back(res.log[i].loss.total);
  }
  nlohmann::json rec = {{"record", "train"},
                        {"steps", res.log.empty() ? 0 : res.log.back().step},
                        {"window", window},
                        {"median_loss_first_window", median(first)},
                        {"median_loss_last_window", median(last)},
                        {"checkpoint", fs::relative(res.last_checkpoint, dir).generic_string()}};
  write_text_file(dir / "report.jsonl", jsonl({rec}));
  fmt::print(out, "last checkpoint {}\n", res.last_checkpoint.string());
  return kExitOk;
}

// Model and resolved config for commands that start from a checkpoint.
struct Loaded {
  TrainConfig cfg;
  pipeline::Model model;
};

Loaded load_model(const Common& c, const std::string& checkpoint, std::ostream& out) {
  const pipeline::CheckpointInfo info = pipeline::inspect_checkpoint(checkpoint);
  Loaded l{resolve(c, &info.config), {}};
  echo_config(l.cfg, c.out, out);
  l.model = pipeline::Model(l.cfg);
  pipeline::load_checkpoint(checkpoint, l.model);
  return l;
}

// ------------------------------------------------------------------- synth

int cmd_synth(const Common& c, const std::string& checkpoint, const std::string& data, std::int64_t index,
              std::int64_t prompt_index, bool forced_timing, std::ostream& out) {
  const Loaded l = load_model(c, checkpoint, out);
  const fs::path dir = c.out;
  const task::Dataset ds = load_or_generate(l.cfg, data);
  const std::size_t n = ds.utterances.size();
  const std::size_t target = index >= 0 ? static_cast<std::size_t>(index) : pipeline::train_count(l.cfg, ds) % n;
  if (target >= n) throw ContractError(fmt::format("--index {} is out of range (dataset has {})", target, n));
  Rng rng(mix_seed(l.cfg.seed, 0x5E17));
  const std::size_t source =
      prompt_index >= 0 ? static_cast<std::size_t>(prompt_index) : pipeline::pick_prompt_utterance(ds, target, rng);
  if (source >= n) throw ContractError(fmt::format("--prompt-index {} is out of range (dataset has {})", source, n));
  const auto prompt = pipeline::make_prompt(ds.utterances[source], l.cfg.prompt_frames, rng);

  const auto& u = ds.utterances[target];
  pipeline::SynthesisOptions so;
  so.flow = l.cfg.flow;
  so.duration_nfe = l.cfg.generator.nfe;
  if (forced_timing) {
    so.forced_durations = u.durations;
    so.forced_silences = u.silences;
  }
  const auto r = pipeline::synthesize(l.model, ds.codec, u.phonemes, prompt, so, rng);
  pipeline::write_synthesis(r, ds.spec, dir / "frames.bin", dir / "report.jsonl", dir / "timing.json");

  std::string mse = "", acc = "";
  if (r.latent.same_shape(u.latent)) {
    std::size_t ok = 0;
    for (std::size_t f = 0; f < u.frames(); ++f) ok += r.codes.column(f) == u.codes.column(f) ? 1 : 0;
    mse = fmt::format("{:.17g}", mean_squared(r.latent - u.latent));
    acc = fmt::format("{:.17g}", static_cast<double>(ok) / static_cast<double>(u.frames()));
  }
  write_text_file(dir / "metrics.csv",
                  fmt::format("index,prompt_index,frames,ground_truth_frames,nfe,latent_mse,frame_accuracy\n"
                              "{},{},{},{},{},{},{}\n",
                              target, source, r.codes.frames(), u.frames(), r.nfe, mse, acc));
  fmt::print(out, "synthesized utterance {} ({} frames, nfe {}) in {:.3f} s, rtf {:.4f}\n", target, r.codes.frames(),
             r.nfe, r.wall_seconds, r.rtf);
  return kExitOk;
}

// -------------------------------------------------------------------- eval

struct EvalOptions {
  std::int64_t texts = 4;
  std::int64_t runs = 10;
  std::int64_t baseline_steps = 500;
};

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data, const EvalOptions& eo,
             std::ostream& out) {
  const Loaded l = load_model(c, checkpoint, out);
  const fs::path dir = c.out;
  const TrainConfig& cfg = l.cfg;
  const task::Dataset ds = load_or_generate(cfg, data);
  if (eo.texts < 1 || eo.runs < 2) throw ContractError("--texts must be >= 1 and --runs >= 2");
  const auto same = eval::make_eval_items(l.model, ds, cfg.n_eval, false, cfg.seed);
  const auto cross = eval::make_eval_items(l.model, ds, cfg.n_eval, true, cfg.seed);
  const eval::AccuracyReport acc = eval::accuracy_report(l.model, ds, same, cross, cfg.flow, cfg.seed);

  pipeline::SynthesisOptions free_run;
  free_run.flow = cfg.flow;
  free_run.duration_nfe = cfg.generator.nfe;
  std::vector<pipeline::Alignment> gt, synth;
  std::vector<std::size_t> syl;
  for (std::size_t k = 0; k < same.size(); ++k) {
    const auto& u = ds.utterances[same[k].index];
    gt.push_back(pipeline::Alignment::from_counts(u.durations, u.silences));
    syl.push_back(u.phonemes.size() - 1);
    Rng rng(mix_seed(cfg.seed, 0xE7A10000ULL + k));
    synth.push_back(pipeline::synthesize(l.model, ds.codec, u.phonemes, same[k].prompt, free_run, rng).alignment);
  }
  const auto t_gt = eval::temporal_metrics(gt, syl, cfg.task.frame_hop_s);
  const auto t_synth = eval::temporal_metrics(synth, syl, cfg.task.frame_hop_s);

  eval::BaselineTrainConfig bc;
  bc.steps = eo.baseline_steps;
  bc.seed = mix_seed(cfg.seed, 0xBA5E);
  Rng init(bc.seed);
  eval::DurationBaseline baseline(cfg.codegen.dim, bc.hidden, init);
  const double baseline_loss = eval::train_duration_baseline(baseline, l.model, ds, bc);

  std::vector<eval::RunSet> prob, det;
  const std::size_t n_texts = std::min<std::size_t>(static_cast<std::size_t>(eo.texts), same.size());
  for (std::size_t t = 0; t < n_texts; ++t) {
    const std::uint64_t seed = mix_seed(cfg.seed, 0xD1F00000ULL + t);
    prob.push_back(eval::resynthesize(l.model, ds, same[t], static_cast<std::size_t>(eo.runs), nullptr, seed));
    det.push_back(eval::resynthesize(l.model, ds, same[t], static_cast<std::size_t>(eo.runs), &baseline, seed));
  }
  const eval::DiversityRecord div = eval::diversity_compare(prob, det);

  std::string csv = "metric,value\n";
  auto row = [&](const std::string& k, double v) { csv += fmt::format("{},{:.17g}\n", k, v); };
  for (std::size_t lv = 0; lv < kCodeLevels; ++lv) row(fmt::format("teacher_forced_level{}", lv + 1), acc.teacher_forced[lv]);
  row("content_teacher_forced", acc.content_teacher_forced);
  row("pipeline_frame_accuracy", acc.pipeline_frame);
  row("pipeline_code_accuracy", acc.pipeline_code);
  row("speaker_follow", acc.speaker_follow);
  row("speech_rate_ground_truth", t_gt.speech_rate.mean);
  row("speech_rate_synthesized", t_synth.speech_rate.mean);
  row("mphd_ground_truth", t_gt.mphd.mean);
  row("mphd_synthesized", t_synth.mphd.mean);
  row("n_pauses_ground_truth", t_gt.n_pauses.mean);
  row("n_pauses_synthesized", t_synth.n_pauses.mean);
  row("mpad_ground_truth", t_gt.mpad.mean);
  row("mpad_synthesized", t_synth.mpad.mean);
  row("prob_duration_std", div.prob_duration_std);
  row("det_duration_std", div.det_duration_std);
  row("prob_pauses_std", div.prob_pauses_std);
  row("det_pauses_std", div.det_pauses_std);
  row("baseline_final_loss", baseline_loss);
  write_text_file(dir / "metrics.csv", csv);
  write_text_file(dir / "report.jsonl",
                  jsonl({{{"record", "accuracy"}, {"metrics", eval::to_json(acc)}},
                         {{"record", "temporal_ground_truth"}, {"metrics", eval::to_json(t_gt)}},
                         {{"record", "temporal_synthesized"}, {"metrics", eval::to_json(t_synth)}},
                         {{"record", "diversity"}, {"texts", n_texts}, {"runs", eo.runs}, {"metrics", eval::to_json(div)}},
                         {{"record", "duration_baseline"}, {"steps", bc.steps}, {"final_loss", baseline_loss}}}));
  fmt::print(out, "content teacher-forced {:.4f}  pipeline frame {:.4f}  speaker follow {:.4f}\n",
             acc.content_teacher_forced, acc.pipeline_frame, acc.speaker_follow);
  fmt::print(out, "duration std prob {:.4f} det {:.4f}; pauses std prob {:.4f} det {:.4f}\n", div.prob_duration_std,
             div.det_duration_std, div.prob_pauses_std, div.det_pauses_std);
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

int cmd_sweep(const Common& c, const std::string& checkpoint, const std::string& data, const std::string& axis_name,
              const std::string& values_text, std::ostream& out) {
  const eval::SweepAxis axis = eval::sweep_axis_from_string(axis_name);
  const Loaded l = load_model(c, checkpoint, out);
  const fs::path dir = c.out;
  const task::Dataset ds = load_or_generate(l.cfg, data);
  const std::string text = !values_text.empty() ? values_text : axis == eval::SweepAxis::kNfe ? "2,4,8,16,32" : "0,0.3,1.0";
  const auto values = parse_list(text, "--values");
  const auto items = eval::make_eval_items(l.model, ds, l.cfg.n_eval, false, l.cfg.seed);
  const eval::SweepReport rep = eval::sweep(l.model, ds, items, axis, values, l.cfg.flow, l.cfg.seed);

  write_text_file(dir / "metrics.csv", eval::sweep_csv(rep));
  write_text_file(dir / "timing.csv", eval::sweep_timing_csv(rep));
  write_text_file(dir / "report.jsonl", jsonl({{{"record", "sweep"}, {"items", items.size()}, {"report", eval::to_json(rep)}}}));
  write_text_file(dir / "timing.jsonl", jsonl({{{"record", "sweep_timing"}, {"report", eval::timing_json(rep)}}}));
  eval::Series s{"reconstruction MSE", {}, {}};
  for (const auto& p : rep.points) {
    s.x.push_back(p.value);
    s.y.push_back(p.mse);
    fmt::print(out, "{} {:>6}  mse {:.6e}  frame acc {:.4f}  sample {:.3f} s\n", eval::to_string(axis), p.value, p.mse,
               p.code_accuracy, p.sample_seconds);
  }
  fs::create_directories(dir / "plots");
  const bool log_x = axis == eval::SweepAxis::kNfe;
  write_text_file(dir / "plots" / ("sweep_" + eval::to_string(axis) + ".svg"),
                  eval::svg_line_plot("MSE vs " + eval::to_string(axis), eval::to_string(axis), "MSE", {s}, log_x, true));
  return kExitOk;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const Common& c, const std::string& lengths_text, int reps, int warmup, std::ostream& out) {
  const TrainConfig cfg = resolve(c, nullptr);
  const fs::path dir = c.out;
  echo_config(cfg, dir, out);
  std::vector<std::size_t> lengths;
  for (double v : parse_list(lengths_text, "--lengths")) {
    if (v < 1.0 || v != std::floor(v)) throw ContractError("--lengths: values must be positive integers");
    lengths.push_back(static_cast<std::size_t>(v));
  }
  eval::TimingOptions opts;
  opts.reps = reps;
  opts.warmup = warmup;
  const auto d_lat = static_cast<std::size_t>(cfg.task.d_lat);
  const eval::ComplexityReport rep = eval::complexity_probe(lengths, cfg.denoiser, d_lat, opts, cfg.seed);

  denoise::DenoiserConfig free_cfg = cfg.denoiser, attn_cfg = cfg.denoiser;
  free_cfg.variant = denoise::Variant::kAttentionFree;
  attn_cfg.variant = denoise::Variant::kAttention;
  auto count = [&](const denoise::DenoiserConfig& dc) {
    Rng rng(cfg.seed);
    nn::ParamList params;
    denoise::Denoiser(d_lat, dc, rng).collect("denoiser", params);
    return nn::count_parameters(params);
  };
  const std::size_t n_free = count(free_cfg), n_attn = count(attn_cfg);
  std::string csv = "length,attention_free_parameters,attention_parameters\n";
  for (std::size_t L : lengths) csv += fmt::format("{},{},{}\n", L, n_free, n_attn);
  write_text_file(dir / "metrics.csv", csv);
  write_text_file(dir / "report.jsonl", jsonl({{{"record", "bench"},
                                                {"lengths", lengths},
                                                {"attention_free_parameters", n_free},
                                                {"attention_parameters", n_attn},
                                                {"reps", reps},
                                                {"warmup", warmup}}}));
  write_text_file(dir / "timing.csv", eval::complexity_csv(rep));
  write_text_file(dir / "timing.jsonl", jsonl({{{"record", "complexity"}, {"report", eval::to_json(rep)}}}));
  eval::Series sf{"attention-free", {}, {}}, sa{"attention", {}, {}};
  for (const auto& p : rep.points) {
    sf.x.push_back(static_cast<double>(p.length));
    sf.y.push_back(p.attention_free_seconds);
    sa.x.push_back(static_cast<double>(p.length));
    sa.y.push_back(p.attention_seconds);
  }
  fs::create_directories(dir / "plots");
  write_text_file(dir / "plots" / "timing_complexity.svg",
                  eval::svg_line_plot("Denoiser forward time", "L (frames)", "seconds", {sf, sa}, true, true));
  fmt::print(out, "slope attention-free {:.3f}  attention {:.3f}\n", rep.attention_free_slope, rep.attention_slope);
  if (rep.crossover_length) {
    fmt::print(out, "crossover L = {:.1f} ({})\n", *rep.crossover_length, rep.crossover_measured ? "measured" : "fitted");
  }
  fmt::print(out, "d-slope at L={}: depthwise conv {:.3f}, full forward {:.3f}\n", rep.d_probe_length,
             rep.mixer_d_slope, rep.forward_d_slope);
  return kExitOk;
}

// ----------------------------------------------------------------- inspect

std::string file_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file " + path.string());
  std::string magic(8, '\0');
  in.read(magic.data(), 8);
  magic.resize(static_cast<std::size_t>(in.gcount()));
  return magic;
}

void describe_task(const task::TaskSpec& s, std::ostream& o) {
  fmt::print(o, "task: {} phonemes, {} speakers, codebook {}, {} levels, d_lat {}, d_spk {}, hop {} s, seed {}\n",
             s.n_phonemes, s.n_speakers, s.codebook_size, s.n_levels, s.d_lat, s.d_spk, s.frame_hop_s, s.seed);
}

void inspect_checkpoint_file(const fs::path& path, std::ostream& o) {
  const auto info = pipeline::inspect_checkpoint(path);
  fmt::print(o, "checkpoint {}\nstep {}\noptimizer state: {}\n", path.string(), info.step,
             info.has_optimizer ? "yes" : "no");
  describe_task(info.config.task, o);
  fmt::print(o, "flow defaults: sigma_min {} tau_infer {} nfe {}\n", info.config.flow.sigma_min,
             info.config.flow.tau_infer, info.config.flow.nfe);
  std::map<std::string, std::size_t> modules;
  std::size_t total = 0;
  for (const auto& [name, shape] : info.tensors) {
    const std::size_t n = shape.first * shape.second;
    fmt::print(o, "  {:<48} {:>5} x {:<5}\n", name, shape.first, shape.second);
    modules[name.substr(0, name.find('.'))] += n;
    total += n;
  }
  for (const auto& [m, n] : modules) fmt::print(o, "{:<10} {:>10} parameters\n", m, n);
  fmt::print(o, "total      {:>10} parameters\n", total);
  const std::size_t analytic =
      denoise::analytic_parameter_count(static_cast<std::size_t>(info.config.task.d_lat), info.config.denoiser);
  fmt::print(o, "denoiser analytic count {} ({})\n", analytic, analytic == modules["denoiser"] ? "matches" : "MISMATCH");
  o << "config:\n" << config_to_text(info.config);
}

void inspect_dataset_file(const fs::path& path, std::ostream& o) {
  const task::Dataset ds = task::load_dataset(path);
  fmt::print(o, "dataset {}\nutterances {}\n", path.string(), ds.utterances.size());
  describe_task(ds.spec, o);
  if (ds.utterances.empty()) return;
  std::size_t lo = SIZE_MAX, hi = 0, sum = 0;
  for (const auto& u : ds.utterances) {
    lo = std::min(lo, u.frames());
    hi = std::max(hi, u.frames());
    sum += u.frames();
  }
  fmt::print(o, "frames per utterance: min {} mean {:.1f} max {}\n", lo, static_cast<double>(sum) / ds.utterances.size(),
             hi);
  constexpr std::size_t kBins = 8;
  std::array<std::size_t, kBins> hist{};
  const double width = static_cast<double>(hi - lo + 1) / kBins;
  for (const auto& u : ds.utterances) {
    hist[std::min(kBins - 1, static_cast<std::size_t>(static_cast<double>(u.frames() - lo) / width))]++;
  }
  for (std::size_t b = 0; b < kBins; ++b) {
    const double a = lo + b * width;
    fmt::print(o, "  [{:7.1f}, {:7.1f})  {:6}\n", a, a + width, hist[b]);
  }
}

int cmd_inspect(const std::string& path, std::ostream& out) {
  std::ostringstream o;  // nothing is printed unless the whole file parses
  const std::string magic = file_magic(path);
  if (magic == "FLMDCKPT") {
    inspect_checkpoint_file(path, o);
  } else if (magic == "FLMDDATA") {
    inspect_dataset_file(path, o);
  } else if (magic == "FLMDFRMS") {
    const auto ff = task::read_frame_features(path);
    fmt::print(o, "frame features {}\nframes {} x {}\nhop {} s\nduration {} s\n", path, ff.frames.rows(),
               ff.frames.cols(), ff.hop_s, ff.duration_s());
  } else {
    throw DataError(path + ": unrecognised file type at byte offset 0");
  }
  out << o.str();
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"flamed: flow-matching TTS on a synthetic codec task", args.empty() ? "flamed" : args[0]};
  app.require_subcommand(1);

  Common gen_c, train_c, synth_c, eval_c, sweep_c, bench_c;
  std::int64_t gen_n = 0;
  std::string train_data, train_resume;
  std::string ckpt, data;
  std::int64_t synth_index = -1, synth_prompt = -1;
  bool synth_forced = false;
  EvalOptions eo;
  std::string axis = "nfe", values;
  std::string lengths = "128,256,512,1024,2048,4096";
  int reps = 20, warmup = 3;
  std::string inspect_path;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  add_common(gen, gen_c);
  gen->add_option("--n", gen_n, "Utterances (default n_utterances + n_eval)");

  auto* train = app.add_subcommand("train", "Train every module jointly");
  add_common(train, train_c);
  train->add_option("--data", train_data, "Dataset file (default: generated from the config)");
  train->add_option("--resume", train_resume, "Checkpoint to resume from");

  auto* synth = app.add_subcommand("synth", "Synthesize one utterance");
  add_common(synth, synth_c);
  synth->add_option("--checkpoint", ckpt, "Checkpoint")->required();
  synth->add_option("--data", data, "Dataset file (default: generated from the config)");
  synth->add_option("--index", synth_index, "Utterance whose text is spoken (default: first held-out)");
  synth->add_option("--prompt-index", synth_prompt, "Utterance the prompt is cut from");
  synth->add_flag("--forced-timing", synth_forced, "Use ground-truth durations and silences");

  auto* ev = app.add_subcommand("eval", "Accuracy, temporal and diversity metrics");
  add_common(ev, eval_c);
  ev->add_option("--checkpoint", ckpt, "Checkpoint")->required();
  ev->add_option("--data", data, "Dataset file (default: generated from the config)");
  ev->add_option("--texts", eo.texts, "Texts for the diversity comparison");
  ev->add_option("--runs", eo.runs, "Resyntheses per text");
  ev->add_option("--baseline-steps", eo.baseline_steps, "Training steps of the deterministic duration baseline");

  auto* sw = app.add_subcommand("sweep", "Reconstruction MSE across NFE or tau");
  add_common(sw, sweep_c);
  sw->add_option("--checkpoint", ckpt, "Checkpoint")->required();
  sw->add_option("--data", data, "Dataset file (default: generated from the config)");
  sw->add_option("--axis", axis, "nfe or tau");
  sw->add_option("--values", values, "Comma-separated values");

  auto* bench = app.add_subcommand("bench", "Denoiser forward time versus sequence length");
  add_common(bench, bench_c);
  bench->add_option("--lengths", lengths, "Comma-separated sequence lengths");
  bench->add_option("--reps", reps, "Timed repetitions per point");
  bench->add_option("--warmup", warmup, "Warmup calls per point");

  auto* insp = app.add_subcommand("inspect", "Summarize a checkpoint, dataset or frame file");
  insp->add_option("path", inspect_path, "File to inspect")->required();

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  if (argv.empty()) argv.push_back("flamed");
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_c, gen_n, out);
    if (train->parsed()) return cmd_train(train_c, train_data, train_resume, out);
    if (synth->parsed()) return cmd_synth(synth_c, ckpt, data, synth_index, synth_prompt, synth_forced, out);
    if (ev->parsed()) return cmd_eval(eval_c, ckpt, data, eo, out);
    if (sw->parsed()) return cmd_sweep(sweep_c, ckpt, data, axis, values, out);
    if (bench->parsed()) return cmd_bench(bench_c, lengths, reps, warmup, out);
    if (insp->parsed()) return cmd_inspect(inspect_path, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "file error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  err << "error: no command\n";
  return kExitUsage;
}

}  // namespace flamed::cli
