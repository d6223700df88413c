#include "ssondo/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "ssondo/error.hpp"
#include "ssondo/losses.hpp"
#include "ssondo/nn.hpp"

namespace ssondo {
namespace {

Eigen::MatrixXd targets_of(const LabeledSplit& s) {
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(s.size(), s.num_classes);
  if (s.kind == LabelKind::single) {
    for (Eigen::Index i = 0; i < s.size(); ++i) y(i, s.labels[static_cast<std::size_t>(i)]) = 1.0;
  } else {
    y = s.multi_hot.cast<double>();
  }
  return y;
}

void check_pair(const LabeledSplit& train, const LabeledSplit& test, const char* what) {
  train.validate();
  test.validate();
  if (train.embeddings.cols() != test.embeddings.cols()) {
    throw DataError(std::string(what) + ": train and test embedding dims differ");
  }
  if (train.kind != test.kind || train.num_classes != test.num_classes) {
    throw DataError(std::string(what) + ": train and test label spaces differ");
  }
  if (train.size() == 0) throw DataError(std::string(what) + ": empty training split");
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void LabeledSplit::validate() const {
  if (num_classes <= 0) throw DataError("labeled split: num_classes must be positive");
  if (!embeddings.allFinite()) throw DataError("labeled split: non-finite embeddings");
  if (kind == LabelKind::single) {
    if (labels.size() != static_cast<std::size_t>(size())) throw DataError("labeled split: label count mismatch");
    for (int l : labels) {
      if (l < 0 || l >= num_classes) throw DataError("labeled split: label " + std::to_string(l) + " out of range");
    }
  } else {
    if (multi_hot.rows() != size() || multi_hot.cols() != num_classes) {
      throw DataError("labeled split: multi-hot matrix shape mismatch");
    }
    if (((multi_hot.array() != 0) && (multi_hot.array() != 1)).any()) {
      throw DataError("labeled split: multi-hot entries must be 0 or 1");
    }
  }
}

Eigen::MatrixXd linear_probe(const LabeledSplit& train, const LabeledSplit& test, const ProbeConfig& config) {
  check_pair(train, test, "linear_probe");
  const int C = train.num_classes;
  const Eigen::MatrixXd y = targets_of(train);
  const Eigen::MatrixXd y_test = targets_of(test);
  for (int c = 0; c < C; ++c) {
    if (y.col(c).sum() == 0.0 && y_test.col(c).sum() > 0.0) {
      throw DataError("linear_probe: class " + std::to_string(c) + " occurs in the test split but not in training");
    }
  }

  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(train.embeddings.cols());
  Eigen::RowVectorXd scale = Eigen::RowVectorXd::Ones(train.embeddings.cols());
  if (config.standardize) {
    mean = train.embeddings.colwise().mean();
    const Eigen::RowVectorXd var = (train.embeddings.rowwise() - mean).array().square().colwise().mean();
    scale = var.array().sqrt().unaryExpr([](double s) { return s > 1e-12 ? 1.0 / s : 1.0; });
  }
  const Eigen::MatrixXd x = (train.embeddings.rowwise() - mean).array().rowwise() * scale.array();

  DenseLayer<double> layer{Eigen::MatrixXd::Zero(C, x.cols()), Eigen::VectorXd::Zero(C)};
  Mlp<double> probe({layer}, Activation::relu);
  auto params = probe.parameters("probe");
  AdamState<double> adam;
  const double inv_m = 1.0 / static_cast<double>(x.rows());
  const bool single = train.kind == LabelKind::single;

  ForwardCache<double> cache;
  double prev = std::numeric_limits<double>::infinity();
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const Eigen::MatrixXd logits = probe.forward(x, &cache);
    double loss = 0.0;
    Eigen::MatrixXd dlogits;
    if (single) {
      const Eigen::MatrixXd logp = detail::log_softmax_rows<double>(logits);
      loss = -(y.array() * logp.array()).sum() * inv_m;
      dlogits = (logp.array().exp().matrix() - y) * inv_m;
    } else {
      // Stable BCE with logits: max(z,0) - z*y + log(1 + exp(-|z|)).
      const Eigen::ArrayXXd z = logits.array();
      loss = (z.max(0.0) - z * y.array() + (-z.abs()).exp().log1p()).sum() * inv_m;
      dlogits = ((1.0 / (1.0 + (-z).exp())) - y.array()).matrix() * inv_m;
    }
    const auto& W = probe.layers()[0].W;
    loss += 0.5 * config.l2 * W.squaredNorm();
    auto grads = probe.backward(cache, dlogits);
    grads.dW[0] += config.l2 * W;
    if (!std::isfinite(loss)) throw NumericalError("linear_probe: loss diverged");
    if (std::abs(prev - loss) < config.plateau) break;
    prev = loss;
    adam_step<double>(params, grads.views("probe"), adam, config.lr);
  }

  const Eigen::MatrixXd xt = (test.embeddings.rowwise() - mean).array().rowwise() * scale.array();
  const Eigen::MatrixXd logits = probe.forward(xt);
  if (single) return detail::log_softmax_rows<double>(logits).array().exp().matrix();
  return (1.0 / (1.0 + (-logits.array()).exp())).matrix();
}

Eigen::MatrixXd knn_classify(const LabeledSplit& train, const LabeledSplit& test, int k) {
  check_pair(train, test, "knn_classify");
  if (k < 1 || k > train.size()) {
    throw UsageError("knn_classify: k=" + std::to_string(k) + " must be in [1, " + std::to_string(train.size()) + "]");
  }
  auto normalized = [](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      const double n = out.row(i).norm();
      if (n > 0.0) out.row(i) /= n;
    }
    return out;
  };
  const Eigen::MatrixXd sim = normalized(test.embeddings) * normalized(train.embeddings).transpose();
  const Eigen::MatrixXd y = targets_of(train);

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(test.size(), train.num_classes);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.size()));
  for (Eigen::Index i = 0; i < test.size(); ++i) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return sim(i, a) > sim(i, b) || (sim(i, a) == sim(i, b) && a < b);
    });
    for (int j = 0; j < k; ++j) scores.row(i) += y.row(order[static_cast<std::size_t>(j)]);
    scores.row(i) /= k;
  }
  return scores;
}

double accuracy(const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
  if (scores.rows() != static_cast<Eigen::Index>(labels.size())) throw UsageError("accuracy: row count mismatch");
  if (labels.empty()) throw UsageError("accuracy: no rows");
  long correct = 0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < scores.cols(); ++c) {
      if (scores(i, c) > scores(i, best)) best = c;
    }
    correct += best == labels[static_cast<std::size_t>(i)];
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(labels.size());
}

double average_precision(const Eigen::VectorXd& scores, const Eigen::VectorXi& relevant) {
  if (scores.size() != relevant.size()) throw UsageError("average_precision: size mismatch");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });
  const long n_pos = relevant.sum();
  if (n_pos == 0) return std::nan("");
  double sum = 0.0;
  long hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (relevant(order[r]) != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(r + 1);
    }
  }
  return sum / static_cast<double>(n_pos);
}

MapResult mean_average_precision(const Eigen::MatrixXd& scores, const Eigen::MatrixXi& multi_hot) {
  if (scores.rows() != multi_hot.rows() || scores.cols() != multi_hot.cols()) {
    throw UsageError("mean_average_precision: shape mismatch");
  }
  MapResult out;
  double total = 0.0;
  int used = 0;
  for (Eigen::Index c = 0; c < scores.cols(); ++c) {
    const double ap = average_precision(scores.col(c), multi_hot.col(c));
    out.per_class.push_back(ap);
    if (std::isnan(ap)) {
      out.skipped_classes.push_back(static_cast<int>(c));
    } else {
      total += ap;
      ++used;
    }
  }
  if (used == 0) throw DataError("mean_average_precision: no class has a positive example");
  out.map = total / used;
  return out;
}

double retention(double student_average, double teacher_average) {
  if (!(teacher_average > 0.0)) throw DataError("retention: teacher average must be positive");
  return 100.0 * student_average / teacher_average;
}

double retention(const EvalReport& student, const EvalReport& teacher) {
  if (student.tasks.size() != teacher.tasks.size()) throw DataError("retention: reports cover different task sets");
  for (std::size_t i = 0; i < student.tasks.size(); ++i) {
    if (student.tasks[i].task != teacher.tasks[i].task || student.tasks[i].metric != teacher.tasks[i].metric) {
      throw DataError("retention: task '" + student.tasks[i].task + "' does not match reference task '" +
                      teacher.tasks[i].task + "'");
    }
  }
  return retention(student.macro_average, teacher.macro_average);
}

TaskScore score_task(const std::string& name, const LabeledSplit& train, const LabeledSplit& test,
                     const ProbeConfig& probe, int knn_k) {
  const Eigen::MatrixXd scores = knn_k > 0 ? knn_classify(train, test, knn_k) : linear_probe(train, test, probe);
  if (test.kind == LabelKind::single) return {name, "acc", accuracy(scores, test.labels)};
  return {name, "mAP", 100.0 * mean_average_precision(scores, test.multi_hot).map};
}

EvalReport make_report(std::vector<TaskScore> tasks) {
  if (tasks.empty()) throw UsageError("evaluation report needs at least one task");
  EvalReport r;
  r.tasks = std::move(tasks);
  double sum = 0.0;
  for (const auto& t : r.tasks) sum += t.value;
  r.macro_average = sum / static_cast<double>(r.tasks.size());
  return r;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  out << "task,metric,value\n";
  for (const auto& t : report.tasks) out << t.task << ',' << t.metric << ',' << t.value << '\n';
  out << "average,macro," << report.macro_average << '\n';
  if (report.retention) out << "retention,percent," << *report.retention << '\n';
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "task,metric,value") {
    throw DataError(path.string() + ": not an evaluation report (bad header)");
  }
  std::vector<TaskScore> tasks;
  std::optional<double> kept_retention;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 3) throw DataError(path.string() + ": malformed row '" + line + "'");
    if (cells[0] == "average") continue;
    double value = 0.0;
    try {
      value = std::stod(cells[2]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": bad value in row '" + line + "'");
    }
    if (cells[0] == "retention") {
      kept_retention = value;
    } else {
      tasks.push_back({cells[0], cells[1], value});
    }
  }
  auto report = make_report(std::move(tasks));
  report.retention = kept_retention;
  return report;
}

std::string format_report_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  std::size_t width = 7;
  for (const auto& t : report.tasks) width = std::max(width, t.task.size());
  for (const auto& t : report.tasks) {
    os << std::left << std::setw(static_cast<int>(width)) << t.task << "  " << std::setw(4) << t.metric << ' '
       << std::right << std::setw(6) << t.value << '\n';
  }
  os << std::left << std::setw(static_cast<int>(width)) << "Avg." << "       " << std::right << std::setw(6)
     << report.macro_average;
  if (report.retention) os << " (" << *report.retention << "%)";
  os << '\n';
  return os.str();
}

LabelTable read_labels_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("id,label", 0) != 0) {
    throw DataError(path.string() + ": label file must start with header 'id,label'");
  }
  LabelTable t;
  bool decided = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 2 || cells[0].empty() || cells[1].empty()) {
      throw DataError(path.string() + ": malformed label row '" + line + "'");
    }
    const std::string& v = cells[1];
    const bool is_bits = v.size() > 1 && v.find_first_not_of("01") == std::string::npos;
    if (!decided) {
      t.kind = is_bits ? LabelKind::multi : LabelKind::single;
      decided = true;
    }
    t.ids.push_back(cells[0]);
    if (t.kind == LabelKind::multi) {
      if (v.find_first_not_of("01") != std::string::npos) throw DataError(path.string() + ": bad bitstring '" + v + "'");
      if (!t.bits.empty() && v.size() != t.bits.front().size()) {
        throw DataError(path.string() + ": inconsistent bitstring width");
      }
      t.bits.push_back(v);
    } else {
      std::size_t pos = 0;
      int label = -1;
      try {
        label = std::stoi(v, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos != v.size() || label < 0) throw DataError(path.string() + ": bad class label '" + v + "'");
      t.labels.push_back(label);
    }
  }
  return t;
}

void write_labels_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                      const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) out << ids[i] << ',' << labels[i] << '\n';
}

void write_multi_hot_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                         const Eigen::MatrixXi& multi_hot) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',';
    for (Eigen::Index c = 0; c < multi_hot.cols(); ++c) out << multi_hot(static_cast<Eigen::Index>(i), c);
    out << '\n';
  }
}

int infer_num_classes(const LabelTable& a, const LabelTable& b) {
  if (a.kind != b.kind) throw DataError("label tables disagree on single- vs multi-label");
  if (a.kind == LabelKind::multi) {
    const std::size_t w = a.bits.empty() ? (b.bits.empty() ? 0 : b.bits.front().size()) : a.bits.front().size();
    if (!b.bits.empty() && b.bits.front().size() != w) throw DataError("label tables disagree on class count");
    return static_cast<int>(w);
  }
  int max_label = -1;
  for (const auto* t : {&a, &b}) {
    for (int l : t->labels) max_label = std::max(max_label, l);
  }
  return max_label + 1;
}

LabeledSplit make_split(const EmbeddingSet& embeddings, const LabelTable& labels, int num_classes) {
  std::unordered_map<std::string_view, std::size_t> row_of;
  for (std::size_t i = 0; i < labels.ids.size(); ++i) {
    if (!row_of.emplace(labels.ids[i], i).second) throw DataError("duplicate id '" + labels.ids[i] + "' in labels");
  }
  LabeledSplit s;
  s.kind = labels.kind;
  s.num_classes = num_classes;
  s.embeddings = embeddings.data.cast<double>();
  if (s.kind == LabelKind::multi) s.multi_hot.resize(embeddings.size(), num_classes);
  for (std::size_t i = 0; i < embeddings.ids.size(); ++i) {
    const auto it = row_of.find(embeddings.ids[i]);
    if (it == row_of.end()) throw DataError("no label for sample id '" + embeddings.ids[i] + "'");
    if (s.kind == LabelKind::single) {
      s.labels.push_back(labels.labels[it->second]);
    } else {
      const std::string& bits = labels.bits[it->second];
      for (int c = 0; c < num_classes; ++c) s.multi_hot(static_cast<Eigen::Index>(i), c) = bits[static_cast<std::size_t>(c)] == '1';
    }
  }
  s.validate();
  return s;
}

}  // namespace ssondo
