#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ssondo/config.hpp"
#include "ssondo/eval.hpp"
#include "ssondo/features.hpp"
#include "ssondo/pipeline.hpp"
#include "ssondo/synthetic.hpp"

namespace ssondo {

enum class ExtractMode { mean, windowed };

struct ExtractOptions {
  std::filesystem::path wav_dir;
  std::filesystem::path out;
  ExtractMode mode = ExtractMode::mean;
  FrontendConfig frontend;
};

/// One SSND row per clip (id = file stem): mean-pooled log-mel or flattened T x 128.
void cmd_extract(const ExtractOptions& options);

struct ClusterOptions {
  std::filesystem::path teacher;
  std::filesystem::path out_dir;
  int k = 50;
  std::uint64_t seed = 0;
  bool normalize = false;
  int max_iter = 100;
  double tol = 1e-6;
  double offset = 100.0;
};

/// Writes centroids.ssnd, assignments.csv (id,cluster), weights.csv (id,weight).
ClusterModel cmd_cluster(const ClusterOptions& options);

/// Trains and writes checkpoint/, train_log.csv, train_report.json, resolved_config.json.
TrainReport cmd_distill(const CliConfig& config, const std::optional<std::filesystem::path>& resume,
                        std::ostream& log);

struct EvalOptions {
  std::optional<std::filesystem::path> checkpoint;  // default <out_dir>/checkpoint
  bool raw = false;                                  // probe split files as-is (teacher side)
};

/// Writes eval_report.csv (and exported split embeddings unless raw).
EvalReport cmd_eval(const CliConfig& config, const EvalOptions& options, std::ostream& out);

/// Writes cluster_sweep.csv: one row per k plus the uniform-sampling baseline.
std::vector<SweepRow> cmd_ablate_clusters(const CliConfig& config, const std::vector<int>& k_list, std::ostream& log);

/// Writes a complete desk-scale demo: features, teacher embeddings, a labelled
/// task, and ready-to-run student/teacher config files.
void cmd_make_synthetic(const std::filesystem::path& out_dir, const DeskDatasetOptions& options);

std::vector<EvalTask> load_eval_tasks(const CliConfig& config);
PairedDataset load_training_pairs(const CliConfig& config);

/// Entry point of the `ssondo` executable. Exit codes: 0 ok, 1 usage, 2 data/format, 3 numerical.
int run_cli(int argc, const char* const* argv);

}  // namespace ssondo
