#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nmf/forecaster.hpp"
#include "nmf/harness.hpp"
#include "nmf/protocol.hpp"

namespace nmf {

/// Everything a run reads from a --config file. The file is a JSON object
/// with optional sections "model", "train", "protocol" and "experiment";
/// keys not listed below are rejected.
///
///   model:      num_classes, feature_dim, hidden_visual, hidden_label,
///               mem_visual {slots, slot_dim}, mem_label {slots, slot_dim},
///               decoder_hidden, persist_memory, future_visual_input
///   train:      epochs, batch_size, learning_rate, clip_norm, seed,
///               teacher_forcing, beta1, beta2, epsilon,
///               observed_fractions, predicted_fraction
///   protocol:   observed_fractions, predicted_fractions
///   experiment: variants, seeds, observed_fraction, predicted_fraction,
///               corruption_levels, jobs
struct RunConfig {
  ForecasterConfig model;
  TrainConfig train;
  EvalProtocol protocol;
  ExperimentSetup experiment;  // its model/train fields mirror the ones above
};

RunConfig default_run_config();
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

}  // namespace nmf
