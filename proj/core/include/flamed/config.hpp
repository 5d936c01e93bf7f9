// Copyright 2026 The flamed-desk Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Training/run configuration and its JSON form. Files and overrides may only
// name keys that exist in the default tree; anything else is a ConfigError.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flamed/cfm.hpp"
#include "flamed/code_generator.hpp"
#include "flamed/denoiser.hpp"
#include "flamed/duration.hpp"
#include "flamed/optim.hpp"
#include "flamed/synthetic.hpp"

namespace flamed {

struct LossWeights {
  double prior = 1.0;
  double duration = 1.0;
  double silence = 1.0;
  double cfm = 1.0;
  double anchor = 1.0;
};

struct TrainConfig {
  task::TaskSpec task;
  cfm::FlowConfig flow;
  codes::CodeGenConfig codegen;
  dur::GeneratorConfig generator;
  denoise::DenoiserConfig denoiser;
  nn::AdamConfig optim;
  LossWeights weights;

  std::size_t batch_size = 16;
  std::int64_t max_steps = 20000;
  std::int64_t checkpoint_every = 1000;
  std::int64_t log_every = 50;
  std::size_t n_utterances = 2000;  // generated training set size
  std::size_t n_eval = 64;          // held-out utterances for evaluation
  std::size_t prompt_frames = 32;   // longest prompt segment
  double divergence_threshold = 1e4;
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the first violated field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Strict: every key of `j` must exist in the default tree with a matching
/// type; missing keys keep their defaults. `source` prefixes error messages.
TrainConfig config_from_json(const nlohmann::json& j, const std::string& source = "config");

/// Sets a dotted key (e.g. "denoiser.dim=64") in a full config tree. The value
/// is parsed as JSON when possible, otherwise taken as a string.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Defaults, then the file (if non-empty path), then overrides, validated.
TrainConfig resolve_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

std::string config_to_text(const TrainConfig& cfg);

}  // namespace flamed
