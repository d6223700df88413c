#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ssondo/eval.hpp"
#include "ssondo/trainer.hpp"

namespace ssondo {

/// A downstream task whose split embeddings are raw student inputs; the
/// student is applied before probing.
struct EvalTask {
  std::string name;
  LabeledSplit train;
  LabeledSplit test;
};

/// Embeds both splits of every task with f_θ (or h_β∘f_θ) and probes them.
EvalReport evaluate_student(const StudentNet& student, const std::vector<EvalTask>& tasks, const ProbeConfig& probe,
                            int knn_k = 0, const MappingHead* head = nullptr);

/// Probes the split embeddings as they are (e.g. teacher embeddings).
EvalReport evaluate_embeddings(const std::vector<EvalTask>& tasks, const ProbeConfig& probe, int knn_k = 0);

struct SweepRow {
  std::string k;  // cluster count, or "random" for the uniform-sampling baseline
  double final_loss = 0.0;
  EvalReport report;
};

/// Runs distill + evaluation once per k (BDS on) and once with uniform sampling.
std::vector<SweepRow> cluster_sweep(const PairedDataset& data, const TrainConfig& base, const std::vector<int>& k_values,
                                    const std::vector<EvalTask>& tasks, const ProbeConfig& probe, int knn_k = 0);

/// Header: k,final_loss,<task>...,average
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace ssondo
