#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ssondo/bds.hpp"
#include "ssondo/config.hpp"
#include "ssondo/embed_store.hpp"
#include "ssondo/nn.hpp"

namespace ssondo {

/// f_θ: maps student inputs to d_s-dimensional embeddings.
struct StudentNet {
  Mlp<double> net;
  bool operator==(const StudentNet&) const = default;
};

/// h_β: projects student embeddings into the teacher space (d_s -> hidden -> d_t).
struct MappingHead {
  Mlp<double> net;
  bool operator==(const MappingHead&) const = default;
};

StudentNet make_student(const TrainConfig& config);
MappingHead make_head(const TrainConfig& config, int teacher_dim);

/// Everything needed to resume training bit-exactly.
struct TrainState {
  StudentNet student;
  MappingHead head;
  AdamState<double> adam;
  int epochs_completed = 0;
  std::vector<double> epoch_losses;
  TrainConfig config;
};

struct LogRow {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double wall_ms = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_losses;  // mean loss per epoch, over all epochs so far
  double final_loss = 0.0;
  double wall_seconds = 0.0;
  std::string checkpoint_path;
  std::string config_hash;
  std::vector<std::string> warnings;
  std::vector<LogRow> log;
};

struct DistillOptions {
  const TrainState* resume = nullptr;
  std::optional<int> stop_after_epoch;  // stop once this many epochs are complete
  std::function<void(const LogRow&)> on_step;
};

struct DistillResult {
  TrainState state;
  TrainReport report;
  std::optional<ClusterModel> clusters;
};

/// Runs the distillation loop: sample an epoch, forward student and head,
/// align with the teacher embeddings, backprop through both, Adam update.
DistillResult distill(const PairedDataset& data, const TrainConfig& config, const DistillOptions& options = {});

/// Applies f_θ (and h_β when `head` is given) to every row, in batches.
EmbeddingSet export_student_embeddings(const StudentNet& student, const EmbeddingSet& inputs,
                                       const MappingHead* head = nullptr, Eigen::Index batch_size = 256);
Eigen::MatrixXd embed(const StudentNet& student, const Eigen::MatrixXd& inputs, const MappingHead* head = nullptr,
                      Eigen::Index batch_size = 256);

void write_train_log(const std::filesystem::path& path, const std::vector<LogRow>& log);

}  // namespace ssondo
