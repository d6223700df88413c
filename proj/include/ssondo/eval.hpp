#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ssondo/config.hpp"
#include "ssondo/embed_store.hpp"

namespace ssondo {

enum class LabelKind { single, multi };

/// Frozen embeddings with either one class per row or a multi-hot row.
struct LabeledSplit {
  Eigen::MatrixXd embeddings;
  LabelKind kind = LabelKind::single;
  std::vector<int> labels;    // single-label, values in [0, num_classes)
  Eigen::MatrixXi multi_hot;  // multi-label, M x num_classes of {0,1}
  int num_classes = 0;

  Eigen::Index size() const { return embeddings.rows(); }
  void validate() const;
};

/// Multinomial (single-label) or one-vs-rest (multi-label) logistic regression on
/// standardised embeddings, full-batch Adam. Returns M_test x C class scores.
Eigen::MatrixXd linear_probe(const LabeledSplit& train, const LabeledSplit& test, const ProbeConfig& config = {});

/// Cosine-similarity k nearest neighbours; scores are vote fractions.
Eigen::MatrixXd knn_classify(const LabeledSplit& train, const LabeledSplit& test, int k = 5);

/// Percentage of rows whose argmax (lowest index on ties) equals the label.
double accuracy(const Eigen::MatrixXd& scores, const std::vector<int>& labels);

/// Non-interpolated AP of one ranked list; ties ranked by original index.
double average_precision(const Eigen::VectorXd& scores, const Eigen::VectorXi& relevant);

struct MapResult {
  double map = 0.0;
  std::vector<double> per_class;  // NaN for skipped classes
  std::vector<int> skipped_classes;
};

MapResult mean_average_precision(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& multi_hot);

struct TaskScore {
  std::string task;
  std::string metric;  // "acc" or "mAP"; both on a 0-100 scale
  double value = 0.0;
};

struct EvalReport {
  std::vector<TaskScore> tasks;
  double macro_average = 0.0;
  std::optional<double> retention;  // percent of a reference report
};

/// 100 * student / teacher.
double retention(double student_average, double teacher_average);
double retention(const EvalReport& student, const EvalReport& teacher);

/// Probes one task: accuracy for single-label splits, mAP x 100 for multi-label ones.
TaskScore score_task(const std::string& name, const LabeledSplit& train, const LabeledSplit& test,
                     const ProbeConfig& probe, int knn_k = 0);

EvalReport make_report(std::vector<TaskScore> tasks);

void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report_csv(const std::filesystem::path& path);
std::string format_report_table(const EvalReport& report);

// Label sidecar CSV: header "id,label"; label is an integer class or a multi-hot bitstring.
struct LabelTable {
  LabelKind kind = LabelKind::single;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<std::string> bits;
};

LabelTable read_labels_csv(const std::filesystem::path& path);
void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<int>& labels);
void write_multi_hot_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Eigen::MatrixXi& multi_hot);

/// Joins embeddings with a label table on id (embedding order). Every embedding row needs a label.
LabeledSplit make_split(const EmbeddingSet& embeddings, const LabelTable& labels, int num_classes);

/// Class count implied by a pair of label tables (max label + 1, or bitstring width).
int infer_num_classes(const LabelTable& a, const LabelTable& b);

}  // namespace ssondo
