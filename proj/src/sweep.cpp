#include "ssondo/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <set>

#include "ssondo/error.hpp"

namespace ssondo {
namespace {

LabeledSplit with_embeddings(const LabeledSplit& split, Eigen::MatrixXd embeddings) {
  LabeledSplit out = split;
  out.embeddings = std::move(embeddings);
  return out;
}

}  // namespace

EvalReport evaluate_student(const StudentNet& student, const std::vector<EvalTask>& tasks, const ProbeConfig& probe,
                            int knn_k, const MappingHead* head) {
  std::vector<TaskScore> scores;
  for (const auto& task : tasks) {
    const auto train = with_embeddings(task.train, embed(student, task.train.embeddings, head));
    const auto test = with_embeddings(task.test, embed(student, task.test.embeddings, head));
    scores.push_back(score_task(task.name, train, test, probe, knn_k));
  }
  return make_report(std::move(scores));
}

EvalReport evaluate_embeddings(const std::vector<EvalTask>& tasks, const ProbeConfig& probe, int knn_k) {
  std::vector<TaskScore> scores;
  for (const auto& task : tasks) scores.push_back(score_task(task.name, task.train, task.test, probe, knn_k));
  return make_report(std::move(scores));
}

std::vector<SweepRow> cluster_sweep(const PairedDataset& data, const TrainConfig& base, const std::vector<int>& k_values,
                                    const std::vector<EvalTask>& tasks, const ProbeConfig& probe, int knn_k) {
  if (k_values.empty()) throw UsageError("cluster_sweep: no cluster counts given");
  std::set<int> seen;
  for (int k : k_values) {
    if (k < 1) throw UsageError("cluster_sweep: cluster counts must be positive");
    if (!seen.insert(k).second) throw UsageError("cluster_sweep: duplicate cluster count " + std::to_string(k));
  }
  if (tasks.empty()) throw UsageError("cluster_sweep: no evaluation tasks");

  std::vector<SweepRow> rows;
  auto run = [&](const TrainConfig& config, std::string label) {
    const auto result = distill(data, config);
    rows.push_back({std::move(label), result.report.final_loss,
                    evaluate_student(result.state.student, tasks, probe, knn_k,
                                     config.export_mapped ? &result.state.head : nullptr)});
  };
  for (int k : k_values) {
    TrainConfig config = base;
    config.bds_enabled = true;
    config.k_clusters = k;
    run(config, std::to_string(k));
  }
  TrainConfig baseline = base;
  baseline.bds_enabled = false;
  run(baseline, "random");
  return rows;
}

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17) << "k,final_loss";
  if (!rows.empty()) {
    for (const auto& t : rows.front().report.tasks) out << ',' << t.task;
  }
  out << ",average\n";
  for (const auto& r : rows) {
    out << r.k << ',' << r.final_loss;
    for (const auto& t : r.report.tasks) out << ',' << t.value;
    out << ',' << r.report.macro_average << '\n';
  }
}

}  // namespace ssondo
