// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and a
// JSON summary under the work directory. Exit status is non-zero when any
// selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "cli.hpp"
#include "flamed/binary_io.hpp"
#include "flamed/evalbench.hpp"
#include "support/gradcheck.hpp"

namespace flamed::acceptance {
namespace {

namespace fs = std::filesystem;
using ag::Var;
using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
  nlohmann::json data;
};

void log(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

// ------------------------------------------------------------ 1: CFM math

Outcome cfm_math() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  auto track = [&](double e) { worst = std::max(worst, e); };
  for (int trial = 0; trial < 200; ++trial) {
    const Tensor x_pr = Tensor::randn(9, 6, rng), x1 = Tensor::randn(9, 6, rng), noise = Tensor::randn(9, 6, rng);
    const double sigma = trial % 2 ? 1e-4 : 0.05 * rng.uniform();
    const double tau = rng.uniform();
    const Tensor x0 = cfm::enriched_prior(x_pr, tau, noise);
    track(max_abs_diff(x0, x_pr + noise * tau));
    // Endpoints: x_0 = x0', x_1 = x1 + sigma x0'.
    track(max_abs_diff(cfm::ot_path(x0, x1, 0.0, sigma), x0));
    track(max_abs_diff(cfm::ot_path(x0, x1, 1.0, sigma), x1 + x0 * sigma));
    // The path is affine in t, so a difference quotient equals the velocity.
    const double t = rng.uniform(), h = 1e-3;
    const Tensor dq = (cfm::ot_path(x0, x1, t + h, sigma) - cfm::ot_path(x0, x1, t, sigma)) * (1.0 / h);
    track(max_abs_diff(dq, cfm::ot_velocity(x0, x1, sigma)));
    // Loss is zero at the oracle field.
    track(std::abs(cfm::cfm_loss(x1 - x0, x1, x0)));
    const Tensor xt = cfm::ot_path(x0, x1, t, 0.0);
    track(std::abs(cfm::anchor_loss(x1 - x0, xt, x1, t)));
    // Constant-field Euler is exact at any step count.
    const Tensor c = Tensor::randn(9, 6, rng);
    const int nfe = 1 + static_cast<int>(rng.uniform_int(32));
    const auto e = cfm::euler_sample([&](const Tensor&, double) { return c; }, x0, nfe);
    track(max_abs_diff(e.x1, x0 + c));
    track(e.evaluations == nfe ? 0.0 : 1.0);
  }
  const double secs = since(t0);
  const bool pass = worst <= 1e-10 && secs < 5.0;
  return {pass, fmt::format("max abs error {:.2e} (limit 1e-10), {:.2f} s (limit 5 s)", worst, secs),
          {{"max_abs_error", worst}, {"seconds", secs}}};
}

// ---------------------------------------------------- 2: gradient checks

struct SmallField {
  explicit SmallField(Rng& rng) : a(3, 8, rng), b(8, 3, rng), time(1, 8, rng) {}
  Var operator()(const Tensor& x, double t) const {
    return b(ag::gelu(ag::add(a(ag::constant(x)), ag::scale(time(ag::constant(Tensor(x.rows(), 1, 1.0))), t))));
  }
  nn::ParamList params() const {
    nn::ParamList p;
    a.collect("a", p);
    b.collect("b", p);
    time.collect("time", p);
    return p;
  }
  nn::Linear a, b, time;
};

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  nlohmann::json data;
  double worst = 0.0;
  std::string where;
  auto note = [&](const std::string& name, const testing::GradCheckReport& r) {
    data[name] = {{"max_rel_error", r.max_rel_error}, {"checked", r.checked}};
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = name + " " + r.worst;
    }
  };

  Rng rng(202);
  SmallField field(rng);
  testing::randomize(field.params(), 203, 0.5);
  const Tensor x_pr = Tensor::randn(5, 3, rng), x1 = Tensor::randn(5, 3, rng);
  const auto s = cfm::draw_flow_sample(x_pr, x1, 1.0, 1e-4, rng);
  note("cfm_loss", testing::check_gradients([&] { return cfm::cfm_loss(field(s.xt, s.t), s.x1, s.x0_prime); },
                                            field.params(), 1e-5, 64));
  note("anchor_loss", testing::check_gradients([&] { return cfm::anchor_loss(field(s.xt, s.t), s.xt, s.x1, s.t); },
                                               field.params(), 1e-5, 64));

  dur::GeneratorConfig gc;
  gc.hidden = 8;
  gc.blocks = 2;
  gc.time_dim = 4;
  dur::DurationSilence gen(4, gc, rng);
  nn::ParamList gp;
  gen.collect("generator", gp);
  testing::randomize(gp, 204, 0.3);
  dur::EncodedPhonemes phon;
  phon.ids = {0, 3, 1, 4, 2, 5};
  phon.hidden = ag::parameter(Tensor::randn(6, 4, rng));
  gp.push_back({"hidden", phon.hidden});
  const Tensor d1 = dur::log_targets({0, 2, 3, 1, 5, 2}, gc.eps_frames);
  const Tensor s1 = dur::log_targets({1, 0, 0, 4, 0, 2}, gc.eps_frames);
  const Tensor d0 = Tensor::randn(6, 1, rng), s0 = Tensor::randn(6, 1, rng);
  note("duration_loss", testing::check_gradients(
                            [&] { return dur::dur_sil_training_loss(gen, phon, d1, s1, 0.37, d0, s0).first; }, gp,
                            1e-5, 6));
  note("silence_loss", testing::check_gradients(
                           [&] { return dur::dur_sil_training_loss(gen, phon, d1, s1, 0.37, d0, s0).second; }, gp,
                           1e-5, 6));

  denoise::DenoiserConfig dc;
  dc.n_blocks = 2;
  dc.dim = 16;
  dc.kernel = 5;
  dc.expansion = 2;
  dc.d_spk = 3;
  dc.time_dim = 8;
  dc.heads = 2;
  denoise::Denoiser den(5, dc, rng);
  nn::ParamList dp;
  den.collect("denoiser", dp);
  testing::randomize(dp, 205, 0.25);
  const Var prior = ag::parameter(Tensor::randn(7, 5, rng));
  dp.push_back({"x_pr", prior});
  const Tensor y1 = Tensor::randn(7, 5, rng), noise = Tensor::randn(7, 5, rng), spk = Tensor::randn(1, 3, rng);
  const cfm::FlowConfig flow;
  note("denoiser_2_block", testing::check_gradients(
                               [&] {
                                 const auto l = denoise::denoiser_losses(den, prior, y1, spk, flow, 0.37, noise);
                                 return ag::add(l.cfm, l.anchor);
                               },
                               dp, 1e-5, 4));
  const double secs = since(t0);
  data["seconds"] = secs;
  const bool pass = worst < 1e-4 && secs < 120.0;
  return {pass, fmt::format("max relative error {:.2e} at {} (limit 1e-4), {:.1f} s (limit 120 s)", worst, where, secs),
          data};
}

// ------------------------------------------------------ 3: expand suite

Outcome expand_suite() {
  const auto t0 = Clock::now();
  std::vector<std::string> failures;
  Rng rng(303);
  {
    dur::EncodedPhonemes phon;
    phon.ids = {task::kSilId, 1, 2};
    phon.hidden = ag::constant(Tensor::randn(3, 4, rng));
    Tensor d(3, 1), s(3, 1);
    d[0] = 0.7;
    d[1] = 0.0;
    d[2] = std::log(2.0);
    s[0] = 0.0;
    s[1] = -10.0;
    s[2] = 0.0;
    const auto [dur_counts, sil_counts] = dur::counts_from_logs(d, s);
    const auto a = dur::expand(phon, dur_counts, sil_counts);
    if (a.frame_tokens(phon.ids) != std::vector<std::int32_t>{0, 1, 2, 2, 0}) failures.push_back("hand trace tokens");
    if (a.frame_silent != std::vector<std::uint8_t>{1, 0, 0, 0, 1}) failures.push_back("hand trace silence mask");
    if (a.frames() != 5) failures.push_back("hand trace length");
  }
  std::size_t samples = 0;
  for (; samples < 10000 && failures.size() < 5; ++samples) {
    const std::size_t n = 1 + rng.uniform_int(24);
    const Tensor d = Tensor::randn(n, 1, rng, 1.5), s = Tensor::randn(n, 1, rng, 1.5);
    const auto [durations, silences] = dur::counts_from_logs(d, s);
    dur::EncodedPhonemes phon;
    phon.ids.assign(n, 1);
    phon.ids[0] = task::kSilId;
    phon.hidden = ag::constant(Tensor::randn(n, 2, rng));
    const auto a = dur::expand(phon, durations, silences);
    std::int64_t total = 0, voiced = 0, silent = 0;
    if (durations[0] != 0) failures.push_back(fmt::format("sample {}: d_1 = {}", samples, durations[0]));
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0 && durations[i] < 1) failures.push_back(fmt::format("sample {}: d_{} < 1", samples, i + 1));
      if (silences[i] < 0) failures.push_back(fmt::format("sample {}: s_{} < 0", samples, i + 1));
      total += durations[i] + silences[i];
      voiced += durations[i];
    }
    for (auto f : a.frame_silent) silent += f;
    if (static_cast<std::int64_t>(a.frames()) != total || silent != total - voiced ||
        a.expanded_hidden.rows() != a.frames()) {
      failures.push_back(fmt::format("sample {}: length bookkeeping", samples));
    }
  }
  const double secs = since(t0);
  const bool pass = failures.empty() && samples == 10000 && secs < 30.0;
  return {pass,
          fmt::format("hand trace + {} random samples, {} failures{}, {:.2f} s (limit 30 s)", samples, failures.size(),
                      failures.empty() ? "" : " (first: " + failures.front() + ")", secs),
          {{"samples", samples}, {"failures", failures}, {"seconds", secs}}};
}

// ----------------------------------------------- shared trained model

struct Trained {
  TrainConfig cfg;
  task::Dataset ds;
  pipeline::Model model;
  double train_seconds = 0.0;
  std::int64_t steps = 0;
  bool trained_here = false;
  std::vector<eval::EvalItem> same, cross;
};

Trained& trained(const fs::path& config, const std::string& checkpoint, const fs::path& work) {
  static std::unique_ptr<Trained> t;
  if (t) return *t;
  t = std::make_unique<Trained>();
  t->cfg = resolve_config(config, {});
  t->ds = task::generate_dataset(t->cfg.task, t->cfg.n_utterances + t->cfg.n_eval);
  t->model = pipeline::Model(t->cfg);
  if (!checkpoint.empty()) {
    log("loading " + checkpoint);
    t->steps = pipeline::load_checkpoint(checkpoint, t->model).step;
  } else {
    log(fmt::format("training {} steps of {}", t->cfg.max_steps, config.string()));
    pipeline::TrainOptions opts;
    opts.checkpoint_dir = work / "desk" / "checkpoints";
    opts.on_step = [&](const pipeline::StepLog& s) {
      if (s.step % 250 == 0) log(fmt::format("step {} loss {:.4f}", s.step, s.loss.total));
    };
    const auto t0 = Clock::now();
    const auto res = pipeline::train(t->model, t->ds, opts);
    t->train_seconds = since(t0);
    t->steps = res.log.back().step;
    t->trained_here = true;
  }
  t->same = eval::make_eval_items(t->model, t->ds, t->cfg.n_eval, false, t->cfg.seed);
  t->cross = eval::make_eval_items(t->model, t->ds, t->cfg.n_eval, true, t->cfg.seed);
  return *t;
}

// ------------------------------------------------------ 4: end to end

Outcome end_to_end(Trained& t) {
  const auto acc = eval::accuracy_report(t.model, t.ds, t.same, t.cross, t.cfg.flow, t.cfg.seed);
  const bool budget = t.steps <= 20000 && (!t.trained_here || t.train_seconds < 1800.0);
  const bool a = acc.content_teacher_forced >= 0.95, b = acc.pipeline_frame >= 0.85, c = acc.speaker_follow > 0.90;
  nlohmann::json data = eval::to_json(acc);
  data["steps"] = t.steps;
  data["train_seconds"] = t.train_seconds;
  return {a && b && c && budget,
          fmt::format("(a) content teacher-forced {:.4f} (>= 0.95) {}; (b) pipeline frame {:.4f} (>= 0.85) {}; "
                      "(c) speaker follow {:.4f} (> 0.90) {}; {} steps in {}",
                      acc.content_teacher_forced, a ? "ok" : "MISS", acc.pipeline_frame, b ? "ok" : "MISS",
                      acc.speaker_follow, c ? "ok" : "MISS", t.steps,
                      t.trained_here ? fmt::format("{:.0f} s", t.train_seconds) : "a loaded checkpoint"),
          data};
}

// --------------------------------------------------------- 5: NFE trend

Outcome nfe_trend(Trained& t) {
  const auto rep = eval::sweep(t.model, t.ds, t.same, eval::SweepAxis::kNfe, {2, 4, 8, 16, 32}, t.cfg.flow, t.cfg.seed);
  int inversions = 0;
  double worst_inversion = 0.0;
  for (std::size_t i = 1; i < rep.points.size(); ++i) {
    const double rise = (rep.points[i].mse - rep.points[i - 1].mse) / rep.points[i - 1].mse;
    if (rise > 0.0) {
      ++inversions;
      worst_inversion = std::max(worst_inversion, rise);
    }
  }
  const bool mse_ok = inversions == 0 || (inversions == 1 && worst_inversion <= 0.02);
  const double ratio = rep.points[4].sample_seconds / rep.points[3].sample_seconds;
  const double wall_ratio = rep.points[4].wall_seconds / rep.points[3].wall_seconds;
  const bool time_ok = std::abs(ratio - 2.0) <= 0.25 * 2.0;
  std::string mses;
  for (const auto& p : rep.points) mses += fmt::format("{}:{:.4e} ", p.value, p.mse);
  nlohmann::json data = eval::to_json(rep);
  data["timing"] = eval::timing_json(rep);
  return {mse_ok && time_ok,
          fmt::format("MSE {}({} inversions, worst {:.2f}%); sampler time 32/16 = {:.3f} (2 +- 25%), whole synthesis "
                      "{:.3f}",
                      mses, inversions, 100.0 * worst_inversion, ratio, wall_ratio),
          data};
}

// --------------------------------------------------------- 6: tau trend

Outcome tau_trend(Trained& t) {
  const auto rep = eval::sweep(t.model, t.ds, t.same, eval::SweepAxis::kTau, {0.0, 0.3, 1.0}, t.cfg.flow, t.cfg.seed);
  const double m0 = rep.points[0].mse, m3 = rep.points[1].mse, m10 = rep.points[2].mse;
  return {m10 >= m3, fmt::format("MSE tau=0 {:.4e}, tau=0.3 {:.4e}, tau=1.0 {:.4e}", m0, m3, m10), eval::to_json(rep)};
}

// ---------------------------------------------------- 7: complexity probe

Outcome complexity(std::uint64_t seed) {
  const auto t0 = Clock::now();
  denoise::DenoiserConfig dc;
  dc.n_blocks = 2;
  dc.dim = 32;
  dc.kernel = 7;
  dc.expansion = 2;
  dc.heads = 1;
  dc.time_dim = 16;
  const eval::TimingOptions opts;  // median of 20 after 3 warmup calls
  const auto rep = eval::complexity_probe({128, 256, 512, 1024, 2048, 4096}, dc, 42, opts, seed);
  const double secs = since(t0);
  const bool pass = rep.attention_free_slope < 1.2 && rep.attention_slope > 1.7 && rep.crossover_length.has_value() &&
                    secs < 600.0;
  nlohmann::json data = eval::to_json(rep);
  data["seconds"] = secs;
  return {pass,
          fmt::format("slope attention-free {:.3f} (< 1.2), attention {:.3f} (> 1.7), crossover L = {} ({}); "
                      "d-slope conv {:.3f}, forward {:.3f}; {:.0f} s (limit 600 s)",
                      rep.attention_free_slope, rep.attention_slope,
                      rep.crossover_length ? fmt::format("{:.0f}", *rep.crossover_length) : "none",
                      rep.crossover_measured ? "measured" : "fitted", rep.mixer_d_slope, rep.forward_d_slope, secs),
          data};
}

// ---------------------------------------------- 8: prior sufficiency

Outcome prior_sufficiency(const fs::path& config, std::int64_t steps) {
  const TrainConfig cfg = resolve_config(config, {});
  const task::Dataset ds = task::generate_dataset(cfg.task, cfg.n_utterances + cfg.n_eval);
  eval::PriorSufficiencyConfig pc;
  pc.steps = steps;
  pc.seed = cfg.seed;
  const auto t0 = Clock::now();
  const auto r = eval::prior_sufficiency(cfg, ds, pc);
  const bool close = r.attention_free_mse <= 1.10 * r.attention_mse;
  const bool zero_worse = r.zero_prior_ratio >= 2.0;
  nlohmann::json data = eval::to_json(r);
  data["seconds"] = since(t0);
  return {close && zero_worse,
          fmt::format("attention-free {:.4e} vs attention {:.4e} ({:+.1f}%, limit +10%); zero prior {:.4e} = {:.2f}x "
                      "(>= 2x)",
                      r.attention_free_mse, r.attention_mse,
                      100.0 * (r.attention_free_mse - r.attention_mse) / r.attention_mse, r.zero_prior_mse,
                      r.zero_prior_ratio),
          data};
}

// --------------------------------------------------- 9: temporal diversity

Outcome diversity(Trained& t) {
  eval::BaselineTrainConfig bc;
  bc.seed = mix_seed(t.cfg.seed, 0xBA5E);
  Rng init(bc.seed);
  eval::DurationBaseline baseline(t.cfg.codegen.dim, bc.hidden, init);
  const double loss = eval::train_duration_baseline(baseline, t.model, t.ds, bc);
  std::vector<eval::RunSet> prob, det;
  constexpr std::size_t kTexts = 4, kRuns = 10;
  for (std::size_t i = 0; i < kTexts; ++i) {
    const std::uint64_t seed = mix_seed(t.cfg.seed, 0xD1F00000ULL + i);
    prob.push_back(eval::resynthesize(t.model, t.ds, t.same[i], kRuns, nullptr, seed));
    det.push_back(eval::resynthesize(t.model, t.ds, t.same[i], kRuns, &baseline, seed));
  }
  const auto r = eval::diversity_compare(prob, det);
  const bool pass = r.prob_max_position_std > 0.0 && r.prob_pauses_std > 0.0 && r.det_max_position_std == 0.0 &&
                    r.det_pauses_std == 0.0;
  nlohmann::json data = eval::to_json(r);
  data["baseline_final_loss"] = loss;
  return {pass,
          fmt::format("{} texts x {} runs: probabilistic duration std {:.4f} (max {:.4f}), pauses std {:.4f}; "
                      "deterministic duration std {}, pauses std {}",
                      kTexts, kRuns, r.prob_duration_std, r.prob_max_position_std, r.prob_pauses_std,
                      r.det_max_position_std, r.det_pauses_std),
          data};
}

// ---------------------------------------------------- 10: reproducibility

const char* kReproConfig = R"({
  "task": {"min_phonemes": 6, "max_phonemes": 12, "n_speakers": 4},
  "codegen": {"dim": 16, "heads": 2, "ffn_dim": 32, "encoder_blocks": 1, "stage1_blocks": 1, "stage_blocks": 1,
              "fold_dim": 4, "fold_hidden": 16},
  "generator": {"hidden": 16, "blocks": 1, "time_dim": 8},
  "denoiser": {"n_blocks": 2, "dim": 16, "kernel": 5, "expansion": 2, "time_dim": 8, "heads": 2},
  "optim": {"lr": 0.003, "warmup_steps": 10},
  "batch_size": 4, "max_steps": 40, "checkpoint_every": 20, "n_utterances": 48, "n_eval": 8
})";

Outcome reproducibility(const fs::path& work) {
  const fs::path root = work / "repro";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string cfg = (root / "config.json").string();
  std::ofstream(cfg) << kReproConfig;
  auto commands = [&](const std::string& tag) -> std::vector<std::vector<std::string>> {
    const std::string o = (root / tag).string();
    const std::string ckpt = o + "/train/checkpoints/latest.ckpt";
    return {{"gen-data", "--config", cfg, "--seed", "3", "--out", o + "/gen"},
            {"train", "--config", cfg, "--seed", "3", "--data", o + "/gen/dataset.bin", "--out", o + "/train"},
            {"synth", "--checkpoint", ckpt, "--seed", "3", "--out", o + "/synth"},
            {"eval", "--checkpoint", ckpt, "--seed", "3", "--runs", "3", "--baseline-steps", "20", "--out", o + "/eval"},
            {"sweep", "--checkpoint", ckpt, "--seed", "3", "--axis", "nfe", "--out", o + "/sweep_nfe"},
            {"sweep", "--checkpoint", ckpt, "--seed", "3", "--axis", "tau", "--out", o + "/sweep_tau"},
            {"bench", "--config", cfg, "--seed", "3", "--lengths", "16,128,512", "--reps", "2", "--out", o + "/bench"}};
  };
  for (const std::string tag : {"a", "b"}) {
    for (auto args : commands(tag)) {
      args.insert(args.begin(), "flamed");
      std::ostringstream out, err;
      const int code = cli::run(args, out, err);
      if (code != 0) return {false, fmt::format("'{}' exited {}: {}", args[1], code, err.str()), {}};
    }
  }
  std::size_t compared = 0, skipped = 0;
  std::vector<std::string> differ;
  for (const auto& e : fs::recursive_directory_iterator(root / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), root / "a");
    if (rel.filename().string().rfind("timing", 0) == 0) {
      ++skipped;
      continue;
    }
    ++compared;
    const fs::path other = root / "b" / rel;
    if (!fs::exists(other) || io::read_file(e.path()) != io::read_file(other)) differ.push_back(rel.generic_string());
  }
  const bool pass = differ.empty() && compared > 0;
  return {pass,
          fmt::format("7 commands run twice: {} files bitwise identical, {} differ{}; {} wall-clock timing files "
                      "excluded",
                      compared - differ.size(), differ.size(), differ.empty() ? "" : " (" + differ.front() + ")",
                      skipped),
          {{"compared", compared}, {"differ", differ}, {"timing_files_excluded", skipped}}};
}

}  // namespace
}  // namespace flamed::acceptance

int main(int argc, char** argv) {
  using namespace flamed;
  using namespace flamed::acceptance;
  CLI::App app{"Acceptance criteria 1-10"};
  std::string config = FLAMED_SOURCE_DIR "/configs/desk.json";
  std::string checkpoint, only;
  std::string work = (fs::temp_directory_path() / "flamed_acceptance").string();
  std::int64_t prior_steps = 1500;
  app.add_option("--config", config, "Config for the trained-model criteria");
  app.add_option("--checkpoint", checkpoint, "Reuse a trained checkpoint instead of training");
  app.add_option("--work", work, "Work directory");
  app.add_option("--only", only, "Comma-separated criteria to run");
  app.add_option("--prior-steps", prior_steps, "Training steps per prior-sufficiency model");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  if (only.empty()) {
    for (int i = 1; i <= 10; ++i) selected.insert(i);
  } else {
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ',')) selected.insert(std::stoi(item));
  }
  fs::create_directories(work);

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, [] { return cfm_math(); }},
      {2, [] { return gradient_checks(); }},
      {3, [] { return expand_suite(); }},
      {4, [&] { return end_to_end(trained(config, checkpoint, work)); }},
      {5, [&] { return nfe_trend(trained(config, checkpoint, work)); }},
      {6, [&] { return tau_trend(trained(config, checkpoint, work)); }},
      {7, [] { return complexity(7); }},
      {8, [&] { return prior_sufficiency(config, prior_steps); }},
      {9, [&] { return diversity(trained(config, checkpoint, work)); }},
      {10, [&] { return reproducibility(work); }},
  };
  nlohmann::json summary;
  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (!selected.count(id)) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what(), {}};
    }
    all = all && o.pass;
    std::cout << fmt::format("criterion {:2d}: {}  {}", id, o.pass ? "PASS" : "FAIL", o.detail) << std::endl;
    summary[std::to_string(id)] = {{"pass", o.pass}, {"detail", o.detail}, {"data", o.data}};
  }
  io::write_text_file(fs::path(work) / "acceptance.json", summary.dump(2) + "\n");
  return all ? 0 : 1;
}
