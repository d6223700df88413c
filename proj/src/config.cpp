#include "ssondo/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "ssondo/error.hpp"

namespace ssondo {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw UsageError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw UsageError("config key '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw UsageError("config: " + msg);
  };
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size > 0, "batch_size must be positive");
  require(base_lr > 0.0, "base_lr must be positive");
  require(epoch_sample_size > 0, "epoch_sample_size must be positive");
  require(k_clusters > 0, "k_clusters must be positive");
  require(bds_offset >= 0.0, "bds_offset must be non-negative");
  require(kmeans_max_iter > 0, "kmeans_max_iter must be positive");
  require(kmeans_tol >= 0.0, "kmeans_tol must be non-negative");
  require(student_dims.size() >= 2, "student_dims needs at least input and output dims");
  for (int d : student_dims) require(d > 0, "student_dims entries must be positive");
  require(head_hidden > 0, "head_hidden must be positive");
  require(init == "kaiming_uniform", "init must be kaiming_uniform");
  require(warmup_frac >= 0.0 && warmup_frac < 1.0, "warmup_frac must be in [0,1)");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1 must be in [0,1)");
  require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2 must be in [0,1)");
  require(adam_eps > 0.0, "adam_eps must be positive");
  require(loss_options.cosine_eps > 0.0, "cosine_eps must be positive");
  require(loss_options.clap_temperature > 0.0, "clap_temperature must be positive");
  require(log_mel_floor > 0.0, "log_mel_floor must be positive");
}

json to_json(const TrainConfig& c) {
  json j = {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"base_lr", c.base_lr},
      {"epoch_sample_size", c.epoch_sample_size},
      {"k_clusters", c.k_clusters},
      {"loss", std::string(to_string(c.loss))},
      {"bds_enabled", c.bds_enabled},
      {"bds_offset", c.bds_offset},
      {"cluster_normalize", c.cluster_normalize},
      {"kmeans_max_iter", c.kmeans_max_iter},
      {"kmeans_tol", c.kmeans_tol},
      {"seed", c.seed},
      {"student_dims", c.student_dims},
      {"head_hidden", c.head_hidden},
      {"activation", std::string(to_string(c.activation))},
      {"head_activation", std::string(to_string(c.resolved_head_activation()))},
      {"init", c.init},
      {"scheduler", std::string(to_string(c.scheduler))},
      {"warmup_frac", c.warmup_frac},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"cosine_eps", c.loss_options.cosine_eps},
      {"clap_temperature", c.loss_options.clap_temperature},
      {"clap_variant", std::string(to_string(c.loss_options.clap_variant))},
      {"log_mel_floor", c.log_mel_floor},
      {"export_mapped", c.export_mapped},
  };
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  static const std::set<std::string> known = {
      "epochs",       "batch_size",   "base_lr",      "epoch_sample_size", "k_clusters",      "loss",
      "bds_enabled",  "bds_offset",   "cluster_normalize", "kmeans_max_iter", "kmeans_tol",  "seed",
      "student_dims", "head_hidden",  "activation",   "head_activation",   "init",            "scheduler",
      "warmup_frac",  "adam_beta1",   "adam_beta2",   "adam_eps",          "cosine_eps",      "clap_temperature",
      "clap_variant", "log_mel_floor", "export_mapped"};
  const std::string s = "train";
  reject_unknown(j, known, s);
  TrainConfig c;
  read(j, "epochs", c.epochs, s);
  read(j, "batch_size", c.batch_size, s);
  read(j, "base_lr", c.base_lr, s);
  read(j, "epoch_sample_size", c.epoch_sample_size, s);
  read(j, "k_clusters", c.k_clusters, s);
  read(j, "bds_enabled", c.bds_enabled, s);
  read(j, "bds_offset", c.bds_offset, s);
  read(j, "cluster_normalize", c.cluster_normalize, s);
  read(j, "kmeans_max_iter", c.kmeans_max_iter, s);
  read(j, "kmeans_tol", c.kmeans_tol, s);
  read(j, "seed", c.seed, s);
  read(j, "student_dims", c.student_dims, s);
  read(j, "head_hidden", c.head_hidden, s);
  read(j, "init", c.init, s);
  read(j, "warmup_frac", c.warmup_frac, s);
  read(j, "adam_beta1", c.adam_beta1, s);
  read(j, "adam_beta2", c.adam_beta2, s);
  read(j, "adam_eps", c.adam_eps, s);
  read(j, "cosine_eps", c.loss_options.cosine_eps, s);
  read(j, "clap_temperature", c.loss_options.clap_temperature, s);
  read(j, "log_mel_floor", c.log_mel_floor, s);
  read(j, "export_mapped", c.export_mapped, s);
  std::string text;
  if (j.contains("loss")) {
    read(j, "loss", text, s);
    c.loss = parse_loss_kind(text);
  }
  if (j.contains("activation")) {
    read(j, "activation", text, s);
    c.activation = parse_activation(text);
  }
  if (j.contains("head_activation")) {
    read(j, "head_activation", text, s);
    c.head_activation = parse_activation(text);
  }
  if (j.contains("scheduler")) {
    read(j, "scheduler", text, s);
    c.scheduler = parse_schedule_shape(text);
  }
  if (j.contains("clap_variant")) {
    read(j, "clap_variant", text, s);
    c.loss_options.clap_variant = parse_clap_variant(text);
  }
  c.validate();
  return c;
}

std::string config_hash(const TrainConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

json to_json(const ProbeConfig& c) {
  return {{"max_epochs", c.max_epochs}, {"lr", c.lr}, {"l2", c.l2}, {"plateau", c.plateau},
          {"standardize", c.standardize}};
}

ProbeConfig probe_config_from_json(const json& j) {
  const std::string s = "eval.probe";
  reject_unknown(j, {"max_epochs", "lr", "l2", "plateau", "standardize"}, s);
  ProbeConfig c;
  read(j, "max_epochs", c.max_epochs, s);
  read(j, "lr", c.lr, s);
  read(j, "l2", c.l2, s);
  read(j, "plateau", c.plateau, s);
  read(j, "standardize", c.standardize, s);
  if (c.max_epochs <= 0 || !(c.lr > 0.0) || c.l2 < 0.0 || c.plateau < 0.0) {
    throw UsageError("config: invalid eval.probe settings");
  }
  return c;
}

json to_json(const CliConfig& c) {
  json tasks = json::array();
  for (const auto& t : c.tasks) {
    tasks.push_back({{"name", t.name},
                     {"train_inputs", t.train_inputs.string()},
                     {"train_labels", t.train_labels.string()},
                     {"test_inputs", t.test_inputs.string()},
                     {"test_labels", t.test_labels.string()}});
  }
  json eval = {{"tasks", tasks}, {"probe", to_json(c.probe)}, {"knn_k", c.knn_k}};
  if (c.teacher_report) eval["teacher_report"] = c.teacher_report->string();
  return {{"train", to_json(c.train)},
          {"paths", {{"inputs", c.inputs.string()}, {"teacher", c.teacher.string()}, {"out_dir", c.out_dir.string()}}},
          {"eval", eval}};
}

CliConfig cli_config_from_json(const json& j) {
  reject_unknown(j, {"train", "paths", "eval"}, "<root>");
  CliConfig c;
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"inputs", "teacher", "out_dir"}, "paths");
    std::string v;
    if (p.contains("inputs")) { read(p, "inputs", v, "paths"); c.inputs = v; }
    if (p.contains("teacher")) { read(p, "teacher", v, "paths"); c.teacher = v; }
    if (p.contains("out_dir")) { read(p, "out_dir", v, "paths"); c.out_dir = v; }
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    reject_unknown(e, {"tasks", "probe", "teacher_report", "knn_k"}, "eval");
    if (e.contains("probe")) c.probe = probe_config_from_json(e.at("probe"));
    read(e, "knn_k", c.knn_k, "eval");
    if (e.contains("teacher_report")) {
      std::string v;
      read(e, "teacher_report", v, "eval");
      c.teacher_report = v;
    }
    if (e.contains("tasks")) {
      if (!e.at("tasks").is_array()) throw UsageError("config: eval.tasks must be an array");
      for (const auto& t : e.at("tasks")) {
        const std::string s = "eval.tasks[]";
        reject_unknown(t, {"name", "train_inputs", "train_labels", "test_inputs", "test_labels"}, s);
        for (const char* key : {"name", "train_inputs", "train_labels", "test_inputs", "test_labels"}) {
          if (!t.contains(key)) throw UsageError(std::string("config: eval task is missing '") + key + "'");
        }
        TaskPaths task;
        std::string v;
        read(t, "name", task.name, s);
        read(t, "train_inputs", v, s);
        task.train_inputs = v;
        read(t, "train_labels", v, s);
        task.train_labels = v;
        read(t, "test_inputs", v, s);
        task.test_inputs = v;
        read(t, "test_labels", v, s);
        task.test_labels = v;
        if (task.name.empty()) throw UsageError("config: every eval task needs a name");
        c.tasks.push_back(std::move(task));
      }
    }
  }
  return c;
}

CliConfig load_cli_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return cli_config_from_json(j);
}

void save_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << j.dump(2) << "\n";
}

}  // namespace ssondo
