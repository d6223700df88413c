#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ssondo/commands.hpp"
#include "ssondo/embed_store.hpp"
#include "ssondo/wav.hpp"
#include "support/oracles.hpp"

using namespace ssondo;
namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ssondo");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    if (slurp(e.path()) != slurp(b / fs::relative(e.path(), a))) return false;
  }
  return true;
}

// A small synthetic workspace with a short training budget.
fs::path synthetic_workspace(const std::string& name, int samples = 300) {
  const auto dir = oracle::temp_dir(name);
  DeskDatasetOptions o;
  o.samples = samples;
  cmd_make_synthetic(dir, o);
  auto j = nlohmann::json::parse(slurp(dir / "student_config.json"));
  j["train"]["epochs"] = 2;
  j["train"]["k_clusters"] = 5;
  j["train"]["head_hidden"] = 64;
  save_json(dir / "student_config.json", j);
  return dir;
}

}  // namespace

TEST_CASE("extract") {
  const auto dir = oracle::temp_dir("cli_extract");
  fs::create_directories(dir / "empty");
  CHECK(cli({"extract", "--wav-dir", (dir / "empty").string(), "--out", (dir / "x.ssnd").string()}) == 2);

  fs::create_directories(dir / "clips");
  write_wav_pcm16(dir / "clips" / "silence.wav", WaveClip{std::vector<double>(32000, 0.0), 32000});
  std::vector<double> tone(16000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = 0.5 * std::sin(2 * M_PI * 440.0 * double(i) / 32000.0);
  write_wav_pcm16(dir / "clips" / "tone.wav", WaveClip{tone, 32000});
  REQUIRE(cli({"extract", "--wav-dir", (dir / "clips").string(), "--out", (dir / "f.ssnd").string()}) == 0);
  const auto set = read_embeddings(dir / "f.ssnd");
  CHECK(set.ids == std::vector<std::string>{"silence", "tone"});
  CHECK(set.dim() == 128);
  for (Eigen::Index j = 0; j < 128; ++j) CHECK(set.data(0, j) == doctest::Approx(std::log(1e-5)).epsilon(1e-6));
  CHECK(set.data.row(1).maxCoeff() > std::log(1e-5) + 1.0);

  REQUIRE(cli({"extract", "--wav-dir", (dir / "clips").string(), "--out", (dir / "w.ssnd").string(), "--mode",
               "windowed"}) == 2);  // clips differ in length

  write_wav_pcm16(dir / "clips" / "tone.WAV", WaveClip{tone, 32000});
  CHECK(cli({"extract", "--wav-dir", (dir / "clips").string(), "--out", (dir / "g.ssnd").string()}) == 2);
}

TEST_CASE("cluster") {
  const auto dir = oracle::temp_dir("cli_cluster");
  std::mt19937_64 rng(1);
  std::vector<std::string> ids;
  for (int i = 0; i < 40; ++i) ids.push_back("c" + std::to_string(i));
  write_embeddings(dir / "t.ssnd", make_embedding_set(ids, oracle::random_matrix(rng, 40, 6)));

  CHECK(cli({"cluster", "--teacher", (dir / "t.ssnd").string(), "--k-clusters", "41", "--out-dir", (dir / "x").string()}) == 1);
  CHECK(cli({"cluster", "--teacher", (dir / "none.ssnd").string(), "--out-dir", (dir / "x").string()}) == 2);
  REQUIRE(cli({"cluster", "--teacher", (dir / "t.ssnd").string(), "--k-clusters", "4", "--seed", "3", "--out-dir",
               (dir / "a").string()}) == 0);
  REQUIRE(cli({"cluster", "--teacher", (dir / "t.ssnd").string(), "--k-clusters", "4", "--seed", "3", "--out-dir",
               (dir / "b").string()}) == 0);
  CHECK(same_tree(dir / "a", dir / "b"));
  for (const char* f : {"centroids.ssnd", "assignments.csv", "weights.csv"}) CHECK(fs::exists(dir / "a" / f));
  CHECK(lines(dir / "a" / "assignments.csv").size() == 41);
  CHECK(read_embeddings(dir / "a" / "centroids.ssnd").size() == 4);
}

TEST_CASE("distill") {
  const auto dir = synthetic_workspace("cli_distill");
  const auto config = (dir / "student_config.json").string();

  CHECK(cli({"distill", "--config", config, "--teacher", (dir / "missing.ssnd").string()}) == 2);
  CHECK(cli({"distill", "--config", config, "--loss", "hinge"}) == 1);

  REQUIRE(cli({"distill", "--config", config, "--out-dir", (dir / "a").string(), "--seed", "4"}) == 0);
  for (const char* f : {"resolved_config.json", "train_log.csv", "train_report.json", "checkpoint/manifest.json"}) {
    CHECK(fs::exists(dir / "a" / f));
  }
  // Rerunning from the echoed config reproduces the run.
  REQUIRE(cli({"distill", "--config", (dir / "a" / "resolved_config.json").string(), "--out-dir",
               (dir / "b").string()}) == 0);
  CHECK(same_tree(dir / "a" / "checkpoint", dir / "b" / "checkpoint"));

  REQUIRE(cli({"distill", "--config", config, "--out-dir", (dir / "c").string(), "--no-bds"}) == 0);
  const auto resolved = nlohmann::json::parse(slurp(dir / "c" / "resolved_config.json"));
  CHECK(resolved["train"]["bds_enabled"] == false);
  CHECK(!same_tree(dir / "a" / "checkpoint", dir / "c" / "checkpoint"));

  // Resuming under a changed configuration is refused.
  auto j = resolved;
  j["train"]["epochs"] = 3;
  j["paths"]["out_dir"] = (dir / "d").string();
  save_json(dir / "more.json", j);
  REQUIRE(cli({"distill", "--config", (dir / "more.json").string(), "--resume", (dir / "c" / "checkpoint").string()}) == 1);

  auto bad = nlohmann::json::parse(slurp(config));
  bad["train"]["learning_rate"] = 1.0;
  save_json(dir / "bad.json", bad);
  CHECK(cli({"distill", "--config", (dir / "bad.json").string()}) == 1);
}

TEST_CASE("numerical failure exit code") {
  const auto dir = oracle::temp_dir("cli_numeric");
  std::mt19937_64 rng(2);
  std::vector<std::string> ids;
  for (int i = 0; i < 20; ++i) ids.push_back("r" + std::to_string(i));
  Eigen::MatrixXd teacher = oracle::random_matrix(rng, 20, 4);
  teacher.row(7).setZero();
  write_embeddings(dir / "in.ssnd", make_embedding_set(ids, oracle::random_matrix(rng, 20, 3)));
  write_embeddings(dir / "t.ssnd", make_embedding_set(ids, teacher));
  nlohmann::json j;
  j["train"] = {{"student_dims", {3, 4}}, {"head_hidden", 4}, {"epochs", 1}, {"bds_enabled", false}};
  j["paths"] = {{"inputs", (dir / "in.ssnd").string()}, {"teacher", (dir / "t.ssnd").string()},
                {"out_dir", (dir / "out").string()}};
  save_json(dir / "c.json", j);
  CHECK(cli({"distill", "--config", (dir / "c.json").string()}) == 3);
}

TEST_CASE("eval and retention") {
  const auto dir = synthetic_workspace("cli_eval");
  REQUIRE(cli({"distill", "--config", (dir / "student_config.json").string()}) == 0);

  // Teacher report absent: retention is omitted.
  auto no_ref = nlohmann::json::parse(slurp(dir / "student_config.json"));
  no_ref["eval"].erase("teacher_report");
  save_json(dir / "no_ref.json", no_ref);
  REQUIRE(cli({"eval", "--config", (dir / "no_ref.json").string()}) == 0);
  auto report = read_report_csv(dir / "student_run" / "eval_report.csv");
  CHECK(!report.retention);
  REQUIRE(report.tasks.size() == 1);
  CHECK(report.tasks[0].task == "classes");
  CHECK(fs::exists(dir / "student_run" / "embeddings" / "classes_test.ssnd"));

  REQUIRE(cli({"eval", "--config", (dir / "teacher_eval_config.json").string(), "--raw"}) == 0);
  REQUIRE(cli({"eval", "--config", (dir / "student_config.json").string(), "--teacher-report",
               (dir / "teacher_run" / "eval_report.csv").string()}) == 0);
  report = read_report_csv(dir / "student_run" / "eval_report.csv");
  const auto teacher = read_report_csv(dir / "teacher_run" / "eval_report.csv");
  REQUIRE(report.retention);
  CHECK(*report.retention == doctest::Approx(100.0 * report.macro_average / teacher.macro_average));

  // Student against its own report.
  fs::copy_file(dir / "student_run" / "eval_report.csv", dir / "self.csv");
  REQUIRE(cli({"eval", "--config", (dir / "student_config.json").string(), "--teacher-report",
               (dir / "self.csv").string()}) == 0);
  CHECK(*read_report_csv(dir / "student_run" / "eval_report.csv").retention == doctest::Approx(100.0));

  // Task order in the report follows the config.
  auto j = nlohmann::json::parse(slurp(dir / "teacher_eval_config.json"));
  auto second = j["eval"]["tasks"][0];
  second["name"] = "again";
  j["eval"]["tasks"].insert(j["eval"]["tasks"].begin(), second);
  j["paths"]["out_dir"] = (dir / "two").string();
  save_json(dir / "two.json", j);
  REQUIRE(cli({"eval", "--config", (dir / "two.json").string(), "--raw", "--knn", "5"}) == 0);
  const auto two = read_report_csv(dir / "two" / "eval_report.csv");
  REQUIRE(two.tasks.size() == 2);
  CHECK(two.tasks[0].task == "again");
  CHECK(two.tasks[1].task == "classes");

  CHECK(cli({"eval", "--config", (dir / "student_config.json").string(), "--checkpoint", (dir / "nope").string()}) == 2);
}

TEST_CASE("ablate clusters") {
  const auto dir = synthetic_workspace("cli_ablate", 200);
  const auto config = (dir / "student_config.json").string();
  CHECK(cli({"ablate-clusters", "--config", config, "--k-list", "3,3"}) == 1);
  CHECK(cli({"ablate-clusters", "--config", config, "--k-list", "0"}) == 1);
  REQUIRE(cli({"ablate-clusters", "--config", config, "--k-list", "2,4,8", "--epochs", "1"}) == 0);
  const auto rows = lines(dir / "student_run" / "cluster_sweep.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "k,final_loss,classes,average");
  CHECK(rows[1].rfind("2,", 0) == 0);
  CHECK(rows[4].rfind("random,", 0) == 0);
}

TEST_CASE("usage errors") {
  CHECK(cli({}) == 1);
  CHECK(cli({"frobnicate"}) == 1);
  CHECK(cli({"distill", "--epochs", "-3"}) == 1);
  CHECK(cli({"eval"}) == 1);
  CHECK(cli({"--help"}) == 0);
}
