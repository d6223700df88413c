#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ssondo/losses.hpp"
#include "ssondo/nn.hpp"

namespace ssondo {

/// Every training hyperparameter, including the choices the method leaves open.
/// Serialised verbatim into every checkpoint.
struct TrainConfig {
  int epochs = 200;
  int batch_size = 64;
  double base_lr = 8e-4;
  std::int64_t epoch_sample_size = 100000;  // clamped to the dataset size
  int k_clusters = 50;
  LossKind loss = kDefaultLoss;
  bool bds_enabled = true;
  double bds_offset = 100.0;
  bool cluster_normalize = false;
  int kmeans_max_iter = 100;
  double kmeans_tol = 1e-6;
  std::uint64_t seed = 0;

  std::vector<int> student_dims = {128, 256, 128};  // input, hidden..., d_s
  int head_hidden = 1280;
  Activation activation = Activation::relu;
  std::optional<Activation> head_activation;  // defaults to `activation`

  std::string init = "kaiming_uniform";
  ScheduleShape scheduler = ScheduleShape::warmup_cosine;
  double warmup_frac = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  LossOptions loss_options;
  double log_mel_floor = 1e-5;
  bool export_mapped = false;

  Activation resolved_head_activation() const { return head_activation.value_or(activation); }
  int student_dim() const { return student_dims.back(); }

  /// Throws UsageError on any out-of-range field.
  void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Missing keys take defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Stable FNV-1a hash of the serialised config, as 16 hex digits.
std::string config_hash(const TrainConfig& config);

struct ProbeConfig {
  int max_epochs = 500;
  double lr = 0.01;
  double l2 = 1e-4;
  double plateau = 1e-6;
  bool standardize = true;
};

nlohmann::json to_json(const ProbeConfig& config);
ProbeConfig probe_config_from_json(const nlohmann::json& j);

struct TaskPaths {
  std::string name;
  std::filesystem::path train_inputs;
  std::filesystem::path train_labels;
  std::filesystem::path test_inputs;
  std::filesystem::path test_labels;
};

/// Top-level configuration file: {"train": {...}, "paths": {...}, "eval": {...}}.
struct CliConfig {
  TrainConfig train;
  std::filesystem::path inputs;
  std::filesystem::path teacher;
  std::filesystem::path out_dir = "ssondo_out";
  std::vector<TaskPaths> tasks;
  ProbeConfig probe;
  std::optional<std::filesystem::path> teacher_report;
  int knn_k = 0;  // > 0 switches the probe to cosine kNN
};

nlohmann::json to_json(const CliConfig& config);
CliConfig cli_config_from_json(const nlohmann::json& j);
CliConfig load_cli_config(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace ssondo
