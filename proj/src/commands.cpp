#include "ssondo/commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "ssondo/bds.hpp"
#include "ssondo/checkpoint.hpp"
#include "ssondo/error.hpp"
#include "ssondo/wav.hpp"

namespace ssondo {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw UsageError(what + " path not set");
  if (!fs::exists(p)) throw DataError(what + " file '" + p.string() + "' does not exist");
}

}  // namespace

void cmd_extract(const ExtractOptions& o) {
  if (!fs::is_directory(o.wav_dir)) throw DataError("'" + o.wav_dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(o.wav_dir)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".wav") files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("no .wav files in '" + o.wav_dir.string() + "'");
  std::sort(files.begin(), files.end());

  std::set<std::string> stems;
  for (const auto& f : files) {
    if (!stems.insert(f.stem().string()).second) {
      throw DataError("clip id collision: more than one file with stem '" + f.stem().string() + "'");
    }
  }

  std::vector<std::string> ids;
  std::vector<Eigen::RowVectorXd> rows;
  for (const auto& f : files) {
    const LogMelSpec spec = log_mel(read_wav(f, o.frontend.sample_rate), o.frontend);
    if (o.mode == ExtractMode::mean) {
      rows.emplace_back(spec.frames.colwise().mean());
    } else {
      const Eigen::MatrixXd row_major = spec.frames.transpose();  // frame-major flattening
      rows.emplace_back(Eigen::Map<const Eigen::RowVectorXd>(row_major.data(), row_major.size()));
      if (rows.size() > 1 && rows.back().size() != rows.front().size()) {
        throw DataError("windowed mode needs equal clip lengths; '" + f.filename().string() + "' differs");
      }
    }
    ids.push_back(f.stem().string());
  }
  Eigen::MatrixXd data(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) data.row(static_cast<Eigen::Index>(i)) = rows[i];
  if (o.out.has_parent_path()) fs::create_directories(o.out.parent_path());
  write_embeddings(o.out, make_embedding_set(std::move(ids), data));
}

ClusterModel cmd_cluster(const ClusterOptions& o) {
  require_file(o.teacher, "teacher embedding");
  const EmbeddingSet teacher = read_embeddings(o.teacher);
  Eigen::MatrixXd emb = teacher.data.cast<double>();
  if (o.normalize) emb = l2_normalize_rows(emb);
  const ClusterModel model = kmeans(emb, o.k, {o.max_iter, o.tol, o.seed});
  const SamplerWeights weights = bds_weights(model.assignments, o.offset);

  fs::create_directories(o.out_dir);
  std::vector<std::string> centroid_ids;
  for (Eigen::Index c = 0; c < model.k(); ++c) centroid_ids.push_back("c" + std::to_string(c));
  write_embeddings(o.out_dir / "centroids.ssnd", make_embedding_set(centroid_ids, model.centroids));

  std::ofstream assignments(o.out_dir / "assignments.csv", std::ios::trunc);
  std::ofstream weight_file(o.out_dir / "weights.csv", std::ios::trunc);
  if (!assignments || !weight_file) throw DataError("cannot write cluster outputs in '" + o.out_dir.string() + "'");
  assignments << "id,cluster\n";
  weight_file << std::setprecision(17) << "id,weight\n";
  for (std::size_t i = 0; i < teacher.ids.size(); ++i) {
    assignments << teacher.ids[i] << ',' << model.assignments[i] << '\n';
    weight_file << teacher.ids[i] << ',' << weights.weights(static_cast<Eigen::Index>(i)) << '\n';
  }
  save_json(o.out_dir / "resolved_config.json",
            {{"teacher", o.teacher.string()}, {"k_clusters", o.k}, {"seed", o.seed}, {"normalize", o.normalize},
             {"kmeans_max_iter", o.max_iter}, {"kmeans_tol", o.tol}, {"bds_offset", o.offset},
             {"inertia", model.inertia}, {"iterations", model.iterations}});
  return model;
}

PairedDataset load_training_pairs(const CliConfig& config) {
  require_file(config.inputs, "student input");
  require_file(config.teacher, "teacher embedding");
  return align_pairs(read_embeddings(config.inputs), read_embeddings(config.teacher));
}

TrainReport cmd_distill(const CliConfig& config, const std::optional<fs::path>& resume, std::ostream& log) {
  const PairedDataset data = load_training_pairs(config);
  if (data.dropped_inputs > 0 || data.dropped_targets > 0) {
    log << "warning: " << data.dropped_inputs << " input ids and " << data.dropped_targets
        << " teacher ids have no partner and were dropped\n";
  }
  fs::create_directories(config.out_dir);
  save_json(config.out_dir / "resolved_config.json", to_json(config));

  std::optional<TrainState> resume_state;
  DistillOptions options;
  if (resume) {
    resume_state = load_checkpoint(*resume);
    options.resume = &*resume_state;
  }
  const auto steps_per_report = std::max<std::int64_t>(1, config.train.epoch_sample_size / config.train.batch_size);
  options.on_step = [&](const LogRow& row) {
    if (row.step % steps_per_report == 0) {
      log << "epoch " << row.epoch << " step " << row.step << " lr " << row.lr << " loss " << row.loss << "\n";
    }
  };
  DistillResult result = distill(data, config.train, options);
  for (const auto& w : result.report.warnings) log << "warning: " << w << "\n";

  const fs::path ckpt = config.out_dir / "checkpoint";
  save_checkpoint(ckpt, result.state);
  result.report.checkpoint_path = ckpt.string();
  write_train_log(config.out_dir / "train_log.csv", result.report.log);
  save_json(config.out_dir / "train_report.json",
            {{"epoch_losses", result.report.epoch_losses},
             {"final_loss", result.report.final_loss},
             {"wall_seconds", result.report.wall_seconds},
             {"checkpoint", result.report.checkpoint_path},
             {"config_hash", result.report.config_hash},
             {"dropped_input_ids", data.dropped_inputs},
             {"dropped_teacher_ids", data.dropped_targets},
             {"warnings", result.report.warnings}});
  log << "final loss " << result.report.final_loss << " after " << result.state.epochs_completed << " epochs ("
      << result.report.wall_seconds << " s)\n";
  return result.report;
}

std::vector<EvalTask> load_eval_tasks(const CliConfig& config) {
  if (config.tasks.empty()) throw UsageError("no evaluation tasks configured (eval.tasks)");
  std::vector<EvalTask> tasks;
  std::set<std::string> names;
  for (const auto& t : config.tasks) {
    if (!names.insert(t.name).second) throw UsageError("duplicate evaluation task '" + t.name + "'");
    for (const auto& [p, what] : {std::pair{t.train_inputs, "train split"}, {t.train_labels, "train labels"},
                                  {t.test_inputs, "test split"}, {t.test_labels, "test labels"}}) {
      require_file(p, t.name + " " + what);
    }
    const LabelTable train_labels = read_labels_csv(t.train_labels);
    const LabelTable test_labels = read_labels_csv(t.test_labels);
    const int classes = infer_num_classes(train_labels, test_labels);
    tasks.push_back({t.name, make_split(read_embeddings(t.train_inputs), train_labels, classes),
                     make_split(read_embeddings(t.test_inputs), test_labels, classes)});
  }
  return tasks;
}

EvalReport cmd_eval(const CliConfig& config, const EvalOptions& options, std::ostream& out) {
  const std::vector<EvalTask> tasks = load_eval_tasks(config);
  fs::create_directories(config.out_dir);
  save_json(config.out_dir / "resolved_eval_config.json", to_json(config));

  EvalReport report;
  if (options.raw) {
    report = evaluate_embeddings(tasks, config.probe, config.knn_k);
  } else {
    const fs::path ckpt = options.checkpoint.value_or(config.out_dir / "checkpoint");
    const TrainState state = load_checkpoint(ckpt);
    const MappingHead* head = state.config.export_mapped ? &state.head : nullptr;
    const fs::path emb_dir = config.out_dir / "embeddings";
    fs::create_directories(emb_dir);
    for (const auto& t : config.tasks) {
      write_embeddings(emb_dir / (t.name + "_train.ssnd"),
                       export_student_embeddings(state.student, read_embeddings(t.train_inputs), head));
      write_embeddings(emb_dir / (t.name + "_test.ssnd"),
                       export_student_embeddings(state.student, read_embeddings(t.test_inputs), head));
    }
    report = evaluate_student(state.student, tasks, config.probe, config.knn_k, head);
  }
  if (config.teacher_report) {
    require_file(*config.teacher_report, "teacher report");
    report.retention = retention(report, read_report_csv(*config.teacher_report));
  }
  write_report_csv(config.out_dir / "eval_report.csv", report);
  out << format_report_table(report);
  return report;
}

std::vector<SweepRow> cmd_ablate_clusters(const CliConfig& config, const std::vector<int>& k_list, std::ostream& log) {
  if (k_list.empty()) throw UsageError("ablate-clusters: --k-list is empty");
  const PairedDataset data = load_training_pairs(config);
  const std::vector<EvalTask> tasks = load_eval_tasks(config);
  fs::create_directories(config.out_dir);
  json resolved = to_json(config);
  resolved["k_list"] = k_list;
  save_json(config.out_dir / "resolved_config.json", resolved);

  const auto rows = cluster_sweep(data, config.train, k_list, tasks, config.probe, config.knn_k);
  write_sweep_csv(config.out_dir / "cluster_sweep.csv", rows);
  for (const auto& r : rows) log << "k=" << r.k << " final_loss=" << r.final_loss << " avg=" << r.report.macro_average << "\n";
  return rows;
}

void cmd_make_synthetic(const fs::path& out_dir, const DeskDatasetOptions& options) {
  const DeskDataset d = make_desk_dataset(options);
  fs::create_directories(out_dir);
  write_embeddings(out_dir / "inputs.ssnd", d.inputs);
  write_embeddings(out_dir / "teacher.ssnd", d.teacher);

  const SplitIndices split = interleaved_split(d.inputs.size());
  auto labels_of = [&](const std::vector<Eigen::Index>& rows) {
    std::vector<int> out;
    for (Eigen::Index r : rows) out.push_back(d.classes[static_cast<std::size_t>(r)]);
    return out;
  };
  const EmbeddingSet train_in = select_rows(d.inputs, split.train);
  const EmbeddingSet test_in = select_rows(d.inputs, split.test);
  write_embeddings(out_dir / "classes_train_inputs.ssnd", train_in);
  write_embeddings(out_dir / "classes_test_inputs.ssnd", test_in);
  write_embeddings(out_dir / "classes_train_teacher.ssnd", select_rows(d.teacher, split.train));
  write_embeddings(out_dir / "classes_test_teacher.ssnd", select_rows(d.teacher, split.test));
  write_labels_csv(out_dir / "classes_train_labels.csv", train_in.ids, labels_of(split.train));
  write_labels_csv(out_dir / "classes_test_labels.csv", test_in.ids, labels_of(split.test));

  const fs::path abs = fs::absolute(out_dir);
  CliConfig student;
  student.train.student_dims = {options.input_dim, 32, 16};
  student.train.epochs = 50;
  student.inputs = abs / "inputs.ssnd";
  student.teacher = abs / "teacher.ssnd";
  student.out_dir = abs / "student_run";
  student.tasks.push_back({"classes", abs / "classes_train_inputs.ssnd", abs / "classes_train_labels.csv",
                           abs / "classes_test_inputs.ssnd", abs / "classes_test_labels.csv"});
  student.teacher_report = abs / "teacher_run" / "eval_report.csv";
  save_json(out_dir / "student_config.json", to_json(student));

  CliConfig teacher = student;
  teacher.out_dir = abs / "teacher_run";
  teacher.teacher_report.reset();
  teacher.tasks = {{"classes", abs / "classes_train_teacher.ssnd", abs / "classes_train_labels.csv",
                    abs / "classes_test_teacher.ssnd", abs / "classes_test_labels.csv"}};
  save_json(out_dir / "teacher_eval_config.json", to_json(teacher));
}

// ---------------------------------------------------------------------------
// Command line

namespace {

struct TrainOverrides {
  std::optional<std::string> loss;
  std::optional<int> k_clusters;
  bool no_bds = false;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::string> inputs, teacher, out_dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--loss", loss, "Distillation loss: mse, l1, cosine, clap, kl");
    cmd->add_option("--k-clusters", k_clusters, "Number of k-means clusters for balanced sampling");
    cmd->add_flag("--no-bds", no_bds, "Uniform sampling instead of cluster-balanced sampling");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--seed", seed, "Random seed");
    cmd->add_option("--batch-size", batch_size, "Batch size");
    cmd->add_option("--lr", lr, "Base learning rate");
    cmd->add_option("--inputs", inputs, "Student input features (SSND)");
    cmd->add_option("--teacher", teacher, "Teacher embeddings (SSND)");
    cmd->add_option("--out-dir", out_dir, "Output directory");
  }

  void apply(CliConfig& c) const {
    if (loss) c.train.loss = parse_loss_kind(*loss);
    if (k_clusters) c.train.k_clusters = *k_clusters;
    if (no_bds) c.train.bds_enabled = false;
    if (epochs) c.train.epochs = *epochs;
    if (seed) c.train.seed = *seed;
    if (batch_size) c.train.batch_size = *batch_size;
    if (lr) c.train.base_lr = *lr;
    if (inputs) c.inputs = *inputs;
    if (teacher) c.teacher = *teacher;
    if (out_dir) c.out_dir = *out_dir;
    c.train.validate();
  }
};

CliConfig resolve(const std::string& config_path, const TrainOverrides& overrides) {
  CliConfig c = config_path.empty() ? CliConfig{} : load_cli_config(config_path);
  overrides.apply(c);
  return c;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Self-supervised embedding distillation toolkit"};
  app.require_subcommand(1);

  ExtractOptions extract;
  std::string extract_mode = "mean";
  auto* cmd_ex = app.add_subcommand("extract", "Log-mel features for a directory of 32 kHz mono WAV files");
  cmd_ex->add_option("--wav-dir", extract.wav_dir, "Directory of .wav clips")->required();
  cmd_ex->add_option("--out", extract.out, "Output SSND file")->required();
  cmd_ex->add_option("--mode", extract_mode, "mean (128-dim) or windowed (T x 128 flattened)")
      ->check(CLI::IsMember({"mean", "windowed"}));

  ClusterOptions cluster;
  auto* cmd_cl = app.add_subcommand("cluster", "k-means pseudo-labels and balanced-sampling weights");
  cmd_cl->add_option("--teacher", cluster.teacher, "Teacher embeddings (SSND)")->required();
  cmd_cl->add_option("--k-clusters", cluster.k, "Number of clusters");
  cmd_cl->add_option("--out-dir", cluster.out_dir, "Output directory")->required();
  cmd_cl->add_option("--seed", cluster.seed, "Random seed");
  cmd_cl->add_flag("--normalize", cluster.normalize, "L2-normalise embeddings before clustering");
  cmd_cl->add_option("--max-iter", cluster.max_iter, "Maximum Lloyd iterations");
  cmd_cl->add_option("--tol", cluster.tol, "Centroid-shift tolerance");
  cmd_cl->add_option("--offset", cluster.offset, "Weight offset in 1/(freq + offset)");

  std::string distill_config;
  std::string resume;
  TrainOverrides distill_over;
  auto* cmd_di = app.add_subcommand("distill", "Train a student against teacher embeddings");
  cmd_di->add_option("--config", distill_config, "JSON config file");
  cmd_di->add_option("--resume", resume, "Checkpoint directory to resume from");
  distill_over.attach(cmd_di);

  std::string eval_config, eval_checkpoint, teacher_report;
  bool eval_raw = false;
  std::optional<int> knn;
  std::optional<std::string> eval_out;
  auto* cmd_ev = app.add_subcommand("eval", "Probe exported student embeddings on labelled tasks");
  cmd_ev->add_option("--config", eval_config, "JSON config file with eval.tasks")->required();
  cmd_ev->add_option("--checkpoint", eval_checkpoint, "Checkpoint directory (default <out_dir>/checkpoint)");
  cmd_ev->add_flag("--raw", eval_raw, "Probe the split files directly (e.g. teacher embeddings)");
  cmd_ev->add_option("--teacher-report", teacher_report, "Reference report for retention");
  cmd_ev->add_option("--knn", knn, "Use cosine kNN with this k instead of the linear probe");
  cmd_ev->add_option("--out-dir", eval_out, "Output directory");

  std::string ablate_config;
  std::vector<int> k_list;
  TrainOverrides ablate_over;
  auto* cmd_ab = app.add_subcommand("ablate-clusters", "Sweep the cluster count, plus a uniform-sampling baseline");
  cmd_ab->add_option("--config", ablate_config, "JSON config file")->required();
  cmd_ab->add_option("--k-list", k_list, "Cluster counts, e.g. 10,50,100")->required()->delimiter(',');
  ablate_over.attach(cmd_ab);

  std::string synth_out;
  DeskDatasetOptions synth;
  auto* cmd_sy = app.add_subcommand("make-synthetic", "Write a desk-scale synthetic dataset and configs");
  cmd_sy->add_option("--out-dir", synth_out, "Output directory")->required();
  cmd_sy->add_option("--samples", synth.samples, "Number of samples");
  cmd_sy->add_option("--seed", synth.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*cmd_ex) {
      extract.mode = extract_mode == "windowed" ? ExtractMode::windowed : ExtractMode::mean;
      cmd_extract(extract);
    } else if (*cmd_cl) {
      cmd_cluster(cluster);
    } else if (*cmd_di) {
      cmd_distill(resolve(distill_config, distill_over),
                  resume.empty() ? std::nullopt : std::optional<fs::path>(resume), std::cout);
    } else if (*cmd_ev) {
      CliConfig c = load_cli_config(eval_config);
      if (!teacher_report.empty()) c.teacher_report = teacher_report;
      if (knn) c.knn_k = *knn;
      if (eval_out) c.out_dir = *eval_out;
      EvalOptions o;
      o.raw = eval_raw;
      if (!eval_checkpoint.empty()) o.checkpoint = eval_checkpoint;
      cmd_eval(c, o, std::cout);
    } else if (*cmd_ab) {
      cmd_ablate_clusters(resolve(ablate_config, ablate_over), k_list, std::cout);
    } else if (*cmd_sy) {
      cmd_make_synthetic(synth_out, synth);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace ssondo
