#include "ssondo/checkpoint.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "ssondo/embed_store.hpp"
#include "ssondo/error.hpp"

namespace ssondo {
namespace {

using nlohmann::json;

constexpr const char* kFormat = "ssondo-checkpoint";
constexpr int kVersion = 1;

std::vector<std::string> row_ids(Eigen::Index rows) {
  std::vector<std::string> ids;
  for (Eigen::Index r = 0; r < rows; ++r) ids.push_back(std::to_string(r));
  return ids;
}

struct TensorWriter {
  std::filesystem::path dir;
  json entries = json::array();

  void add(const std::string& name, const RowMatrixXd& value) {
    const std::string rel = "tensors/" + name + ".ssnd";
    write_tensor_f64(dir / rel, row_ids(value.rows()), value);
    entries.push_back({{"name", name}, {"file", rel}, {"rows", value.rows()}, {"cols", value.cols()}});
  }
};

json net_json(const Mlp<double>& net) {
  return {{"dims", net.dims()}, {"activation", std::string(to_string(net.activation()))}};
}

void write_net(TensorWriter& w, const std::string& prefix, const Mlp<double>& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    const std::string base = prefix + "." + std::to_string(l);
    w.add(base + ".weight", layer.W);
    w.add(base + ".bias", layer.b.transpose());
  }
}

class TensorReader {
 public:
  TensorReader(std::filesystem::path dir, const json& entries) : dir_(std::move(dir)) {
    for (const auto& e : entries) index_[e.at("name").get<std::string>()] = e;
  }

  RowMatrixXd get(const std::string& name, Eigen::Index rows, Eigen::Index cols) const {
    const auto it = index_.find(name);
    if (it == index_.end()) throw DataError("checkpoint: manifest lists no tensor '" + name + "'");
    RowMatrixXd value = read_tensor_f64(dir_ / it->second.at("file").get<std::string>());
    if (value.rows() != rows || value.cols() != cols || it->second.at("rows").get<Eigen::Index>() != rows ||
        it->second.at("cols").get<Eigen::Index>() != cols) {
      throw DataError("checkpoint: tensor '" + name + "' has shape " + std::to_string(value.rows()) + "x" +
                      std::to_string(value.cols()) + ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    return value;
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, json> index_;
};

Mlp<double> read_net(const TensorReader& r, const std::string& prefix, const json& spec) {
  const auto dims = spec.at("dims").get<std::vector<int>>();
  if (dims.size() < 2) throw DataError("checkpoint: network '" + prefix + "' has fewer than two dims");
  std::vector<DenseLayer<double>> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    DenseLayer<double> layer;
    layer.W = r.get(base + ".weight", dims[l + 1], dims[l]);
    layer.b = r.get(base + ".bias", 1, dims[l + 1]).transpose();
    layers.push_back(std::move(layer));
  }
  return Mlp<double>(std::move(layers), parse_activation(spec.at("activation").get<std::string>()));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state) {
  std::filesystem::create_directories(dir / "tensors");
  TensorWriter w{dir};
  write_net(w, "student", state.student.net);
  write_net(w, "head", state.head.net);

  // Moment buffers follow the optimizer's parameter order: student then head.
  std::vector<std::string> names;
  for (const auto* net : {&state.student.net, &state.head.net}) {
    const std::string prefix = net == &state.student.net ? "student" : "head";
    for (std::size_t l = 0; l < net->layers().size(); ++l) {
      names.push_back(prefix + "." + std::to_string(l) + ".weight");
      names.push_back(prefix + "." + std::to_string(l) + ".bias");
    }
  }
  if (!state.adam.m.empty()) {
    if (state.adam.m.size() != names.size()) throw DataError("checkpoint: optimizer state does not match parameters");
    for (std::size_t i = 0; i < names.size(); ++i) {
      w.add("adam.m." + names[i], state.adam.m[i].transpose());
      w.add("adam.v." + names[i], state.adam.v[i].transpose());
    }
  }

  const json manifest = {
      {"format", kFormat},
      {"version", kVersion},
      {"epochs_completed", state.epochs_completed},
      {"epoch_losses", state.epoch_losses},
      {"student", net_json(state.student.net)},
      {"head", net_json(state.head.net)},
      {"adam",
       {{"t", state.adam.t},
        {"beta1", state.adam.beta1},
        {"beta2", state.adam.beta2},
        {"eps", state.adam.eps},
        {"has_moments", !state.adam.m.empty()},
        {"parameters", names}}},
      {"tensors", w.entries},
      {"config", to_json(state.config)},
  };
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  if (!out) throw DataError("checkpoint: cannot write manifest in '" + dir.string() + "'");
  out << manifest.dump(2) << "\n";
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw DataError("checkpoint: missing manifest '" + manifest_path.string() + "'");
  try {
    const json m = json::parse(in);
    if (m.at("format").get<std::string>() != kFormat) throw DataError("checkpoint: not an ssondo checkpoint");
    if (m.at("version").get<int>() != kVersion) {
      throw DataError("checkpoint: unsupported version " + std::to_string(m.at("version").get<int>()));
    }
    const TensorReader reader(dir, m.at("tensors"));
    TrainState state;
    state.config = train_config_from_json(m.at("config"));
    state.epochs_completed = m.at("epochs_completed").get<int>();
    state.epoch_losses = m.at("epoch_losses").get<std::vector<double>>();
    state.student.net = read_net(reader, "student", m.at("student"));
    state.head.net = read_net(reader, "head", m.at("head"));
    if (state.student.net.out_dim() != state.head.net.in_dim()) {
      throw DataError("checkpoint: student output does not match head input");
    }

    const auto& adam = m.at("adam");
    state.adam.t = adam.at("t").get<std::int64_t>();
    state.adam.beta1 = adam.at("beta1").get<double>();
    state.adam.beta2 = adam.at("beta2").get<double>();
    state.adam.eps = adam.at("eps").get<double>();
    if (adam.at("has_moments").get<bool>()) {
      auto params = state.student.net.parameters("student");
      auto head = state.head.net.parameters("head");
      for (auto& p : head) params.push_back(std::move(p));
      for (const auto& p : params) {
        state.adam.m.push_back(reader.get("adam.m." + p.name, 1, p.value.size()).transpose());
        state.adam.v.push_back(reader.get("adam.v." + p.name, 1, p.value.size()).transpose());
      }
    }
    return state;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint: corrupted manifest '" + manifest_path.string() + "': " + e.what());
  } catch (const UsageError& e) {
    throw DataError("checkpoint: invalid manifest '" + manifest_path.string() + "': " + e.what());
  }
}

}  // namespace ssondo
