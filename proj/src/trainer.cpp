#include "ssondo/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ssondo/error.hpp"
#include "ssondo/losses.hpp"
#include "ssondo/random.hpp"

namespace ssondo {
namespace {

enum SeedTag : std::uint64_t { kStudentInit = 1, kHeadInit = 2, kClustering = 3, kEpochBase = 1000 };

std::vector<ParamRef<double>> all_parameters(TrainState& s) {
  auto params = s.student.net.parameters("student");
  auto head = s.head.net.parameters("head");
  for (auto& p : head) params.push_back(std::move(p));
  return params;
}

}  // namespace

StudentNet make_student(const TrainConfig& config) {
  return {Mlp<double>::kaiming_uniform(config.student_dims, config.activation, derive_seed(config.seed, kStudentInit))};
}

MappingHead make_head(const TrainConfig& config, int teacher_dim) {
  return {Mlp<double>::kaiming_uniform({config.student_dim(), config.head_hidden, teacher_dim},
                                       config.resolved_head_activation(), derive_seed(config.seed, kHeadInit))};
}

DistillResult distill(const PairedDataset& data, const TrainConfig& config, const DistillOptions& options) {
  config.validate();
  const Eigen::Index n = data.inputs.rows();
  if (n == 0 || data.targets.rows() != n) throw DataError("distill: empty or misaligned dataset");
  if (data.inputs.cols() != config.student_dims.front()) {
    throw DataError("distill: inputs have " + std::to_string(data.inputs.cols()) + " features, student expects " +
                    std::to_string(config.student_dims.front()));
  }
  if (!data.inputs.allFinite() || !data.targets.allFinite()) throw DataError("distill: non-finite data");
  const auto teacher_dim = static_cast<int>(data.targets.cols());

  const auto start = std::chrono::steady_clock::now();
  DistillResult result;
  TrainState& state = result.state;
  if (options.resume) {
    state = *options.resume;
    if (to_json(state.config) != to_json(config)) {
      throw UsageError("distill: resume checkpoint was produced with a different configuration");
    }
    if (state.head.net.out_dim() != teacher_dim) {
      throw DataError("distill: checkpoint head outputs " + std::to_string(state.head.net.out_dim()) +
                      " dims, teacher embeddings have " + std::to_string(teacher_dim));
    }
  } else {
    state.student = make_student(config);
    state.head = make_head(config, teacher_dim);
    state.adam.beta1 = config.adam_beta1;
    state.adam.beta2 = config.adam_beta2;
    state.adam.eps = config.adam_eps;
    state.config = config;
  }

  TrainReport& report = result.report;
  report.config_hash = config_hash(config);

  const Eigen::Index m = std::min<Eigen::Index>(config.epoch_sample_size, n);
  if (m < config.epoch_sample_size) {
    report.warnings.push_back("epoch_sample_size " + std::to_string(config.epoch_sample_size) +
                              " exceeds dataset size; clamped to " + std::to_string(n));
  }

  SamplerWeights weights;
  if (config.bds_enabled) {
    const Eigen::MatrixXd cluster_input = config.cluster_normalize ? l2_normalize_rows(data.targets) : data.targets;
    result.clusters = kmeans(cluster_input, config.k_clusters,
                             {config.kmeans_max_iter, config.kmeans_tol, derive_seed(config.seed, kClustering)});
    weights = bds_weights(result.clusters->assignments, config.bds_offset);
  } else {
    weights = uniform_weights(n);
  }

  const std::int64_t steps_per_epoch = (m + config.batch_size - 1) / config.batch_size;
  const LrSchedule schedule{config.base_lr, std::max<std::int64_t>(1, steps_per_epoch * config.epochs),
                            config.warmup_frac, config.scheduler};
  const int last_epoch = options.stop_after_epoch ? std::min(*options.stop_after_epoch, config.epochs) : config.epochs;

  auto params = all_parameters(state);
  ForwardCache<double> student_cache, head_cache;
  for (int epoch = state.epochs_completed; epoch < last_epoch; ++epoch) {
    const auto order = sample_epoch(weights, m, derive_seed(config.seed, kEpochBase + static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    for (Eigen::Index begin = 0; begin < m; begin += config.batch_size) {
      const Eigen::Index end = std::min<Eigen::Index>(begin + config.batch_size, m);
      const std::vector<Eigen::Index> rows(order.begin() + begin, order.begin() + end);
      const Eigen::MatrixXd x = data.inputs(rows, Eigen::all);
      const Eigen::MatrixXd zt = data.targets(rows, Eigen::all);

      const Eigen::MatrixXd zs = state.student.net.forward(x, &student_cache);
      const Eigen::MatrixXd zp = state.head.net.forward(zs, &head_cache);
      const auto loss = loss_eval(config.loss, zp, zt, config.loss_options);
      const std::int64_t step = state.adam.t + 1;
      if (!std::isfinite(loss.value) || !loss.grad.allFinite()) {
        throw NumericalError("distill: non-finite loss at step " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch + 1) + ")");
      }

      const auto head_grads = state.head.net.backward(head_cache, loss.grad);
      const auto student_grads = state.student.net.backward(student_cache, head_grads.dX);
      auto grads = student_grads.views("student");
      auto hg = head_grads.views("head");
      for (const auto& g : hg) grads.push_back(g);

      // Update k uses the schedule value at k, so the very first step is not a no-op.
      const double lr = lr_at(schedule, std::min<std::int64_t>(step, schedule.total_steps));
      adam_step<double>(params, grads, state.adam, lr);

      loss_sum += loss.value * static_cast<double>(end - begin);
      LogRow row{epoch + 1, step, lr, loss.value,
                 std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()};
      if (options.on_step) options.on_step(row);
      report.log.push_back(row);
    }
    state.epoch_losses.push_back(loss_sum / static_cast<double>(m));
    state.epochs_completed = epoch + 1;
  }

  report.epoch_losses = state.epoch_losses;
  report.final_loss = state.epoch_losses.empty() ? std::nan("") : state.epoch_losses.back();
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Eigen::MatrixXd embed(const StudentNet& student, const Eigen::MatrixXd& inputs, const MappingHead* head,
                      Eigen::Index batch_size) {
  if (batch_size <= 0) throw UsageError("embed: batch size must be positive");
  if (inputs.cols() != student.net.in_dim()) {
    throw DataError("embed: inputs have " + std::to_string(inputs.cols()) + " features, student expects " +
                    std::to_string(student.net.in_dim()));
  }
  const Eigen::Index out_dim = head ? head->net.out_dim() : student.net.out_dim();
  Eigen::MatrixXd out(inputs.rows(), out_dim);
  for (Eigen::Index begin = 0; begin < inputs.rows(); begin += batch_size) {
    const Eigen::Index len = std::min(batch_size, inputs.rows() - begin);
    Eigen::MatrixXd z = student.net.forward(inputs.middleRows(begin, len));
    if (head) z = head->net.forward(z);
    out.middleRows(begin, len) = z;
  }
  return out;
}

EmbeddingSet export_student_embeddings(const StudentNet& student, const EmbeddingSet& inputs, const MappingHead* head,
                                       Eigen::Index batch_size) {
  return make_embedding_set(inputs.ids, embed(student, inputs.data.cast<double>(), head, batch_size));
}

void write_train_log(const std::filesystem::path& path, const std::vector<LogRow>& log) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << "epoch,step,lr,loss,wall_ms\n";
  out.precision(17);
  for (const auto& r : log) out << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss << ',' << r.wall_ms << '\n';
}

}  // namespace ssondo
