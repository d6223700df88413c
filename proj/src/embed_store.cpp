#include "ssondo/embed_store.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <unordered_map>
#include <unordered_set>

#include "ssondo/error.hpp"

namespace ssondo {
namespace {

constexpr std::size_t kHeaderBytes = 20;

template <typename UInt>
void put_le(std::string& out, UInt value) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename UInt>
UInt get_le(const unsigned char* p) {
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(p[i]) << (8 * i);
  }
  return value;
}

void check_ids(const std::vector<std::string>& ids, const std::string& where) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids) {
    if (id.empty()) throw DataError(where + ": empty sample id");
    if (id.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw DataError(where + ": sample id longer than 65535 bytes");
    }
    if (!seen.insert(id).second) throw DataError(where + ": duplicate sample id '" + id + "'");
  }
}

std::string encode_header(std::uint32_t version, std::uint64_t rows, std::uint32_t cols,
                          const std::vector<std::string>& ids) {
  std::string out(kSsndMagic, 4);
  put_le<std::uint32_t>(out, version);
  put_le<std::uint64_t>(out, rows);
  put_le<std::uint32_t>(out, cols);
  for (const auto& id : ids) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(id.size()));
    out.append(id);
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Decoded {
  std::uint32_t version = 0;
  std::uint64_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::string> ids;
  const unsigned char* payload = nullptr;
};

Decoded decode(const std::string& bytes, std::uint32_t expected_version, std::size_t scalar_bytes,
               const std::string& name) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t size = bytes.size();
  if (size < kHeaderBytes) throw DataError(name + ": truncated header");
  if (std::memcmp(p, kSsndMagic, 4) != 0) throw DataError(name + ": bad magic (not an SSND file)");

  Decoded d;
  d.version = get_le<std::uint32_t>(p + 4);
  if (d.version != expected_version) {
    throw DataError(name + ": unsupported SSND version " + std::to_string(d.version) + " (expected " +
                    std::to_string(expected_version) + ")");
  }
  d.rows = get_le<std::uint64_t>(p + 8);
  d.cols = get_le<std::uint32_t>(p + 16);

  std::size_t offset = kHeaderBytes;
  // Each id record needs at least 3 bytes, which bounds N before allocating.
  if (d.rows > (size - offset) / 3 && d.rows > 0) {
    throw DataError(name + ": declared N=" + std::to_string(d.rows) + " exceeds file contents (truncated)");
  }
  d.ids.reserve(d.rows);
  for (std::uint64_t i = 0; i < d.rows; ++i) {
    if (offset + 2 > size) throw DataError(name + ": truncated id table");
    const auto len = get_le<std::uint16_t>(p + offset);
    offset += 2;
    if (offset + len > size) throw DataError(name + ": truncated id table");
    d.ids.emplace_back(bytes.data() + offset, len);
    offset += len;
  }
  check_ids(d.ids, name);

  const auto payload_bytes = static_cast<unsigned __int128>(d.rows) * d.cols * scalar_bytes;
  if (payload_bytes > size - offset) {
    throw DataError(name + ": payload truncated (declared " + std::to_string(d.rows) + "x" +
                    std::to_string(d.cols) + ")");
  }
  if (payload_bytes < size - offset) throw DataError(name + ": trailing bytes after payload");
  d.payload = p + offset;
  return d;
}

}  // namespace

bool EmbeddingSet::operator==(const EmbeddingSet& other) const {
  if (ids != other.ids || data.rows() != other.data.rows() || data.cols() != other.data.cols()) return false;
  return std::memcmp(data.data(), other.data.data(), sizeof(float) * data.size()) == 0;
}

void validate(const EmbeddingSet& set) {
  if (set.ids.size() != static_cast<std::size_t>(set.data.rows())) {
    throw DataError("embedding set: " + std::to_string(set.ids.size()) + " ids but " +
                    std::to_string(set.data.rows()) + " rows");
  }
  if (set.data.cols() <= 0) throw DataError("embedding set: dimension must be positive");
  check_ids(set.ids, "embedding set");
  if (!set.data.allFinite()) {
    for (Eigen::Index i = 0; i < set.data.rows(); ++i) {
      if (!set.data.row(i).allFinite()) {
        throw DataError("embedding set: non-finite value in row " + std::to_string(i) + " ('" + set.ids[i] + "')");
      }
    }
  }
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  validate(set);
  std::string bytes = encode_header(kSsndVersionF32, static_cast<std::uint64_t>(set.size()),
                                    static_cast<std::uint32_t>(set.dim()), set.ids);
  bytes.reserve(bytes.size() + sizeof(float) * set.data.size());
  for (Eigen::Index i = 0; i < set.data.size(); ++i) {
    put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(set.data.data()[i]));
  }
  write_file(path, bytes);
}

EmbeddingSet read_embeddings(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  Decoded d = decode(bytes, kSsndVersionF32, sizeof(float), path.string());
  EmbeddingSet set;
  set.ids = std::move(d.ids);
  set.data.resize(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
  for (Eigen::Index i = 0; i < set.data.size(); ++i) {
    set.data.data()[i] = std::bit_cast<float>(get_le<std::uint32_t>(d.payload + 4 * i));
  }
  if (d.cols == 0) throw DataError(path.string() + ": dimension must be positive");
  if (!set.data.allFinite()) throw DataError(path.string() + ": payload contains non-finite values");
  return set;
}

void write_tensor_f64(const std::filesystem::path& path, const std::vector<std::string>& row_ids,
                      const RowMatrixXd& data) {
  if (row_ids.size() != static_cast<std::size_t>(data.rows())) {
    throw DataError("tensor: row id count does not match row count");
  }
  check_ids(row_ids, "tensor");
  std::string bytes = encode_header(kSsndVersionF64, static_cast<std::uint64_t>(data.rows()),
                                    static_cast<std::uint32_t>(data.cols()), row_ids);
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    put_le<std::uint64_t>(bytes, std::bit_cast<std::uint64_t>(data.data()[i]));
  }
  write_file(path, bytes);
}

RowMatrixXd read_tensor_f64(const std::filesystem::path& path, std::vector<std::string>* row_ids) {
  const std::string bytes = slurp(path);
  Decoded d = decode(bytes, kSsndVersionF64, sizeof(double), path.string());
  RowMatrixXd data(static_cast<Eigen::Index>(d.rows), static_cast<Eigen::Index>(d.cols));
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    data.data()[i] = std::bit_cast<double>(get_le<std::uint64_t>(d.payload + 8 * i));
  }
  if (row_ids) *row_ids = std::move(d.ids);
  return data;
}

PairedDataset align_pairs(const EmbeddingSet& inputs, const EmbeddingSet& targets) {
  std::unordered_map<std::string_view, Eigen::Index> target_rows;
  target_rows.reserve(targets.ids.size());
  for (std::size_t i = 0; i < targets.ids.size(); ++i) target_rows.emplace(targets.ids[i], static_cast<Eigen::Index>(i));

  std::vector<std::pair<Eigen::Index, Eigen::Index>> matches;
  for (std::size_t i = 0; i < inputs.ids.size(); ++i) {
    if (auto it = target_rows.find(inputs.ids[i]); it != target_rows.end()) {
      matches.emplace_back(static_cast<Eigen::Index>(i), it->second);
    }
  }
  if (matches.empty()) throw DataError("align_pairs: inputs and targets share no sample ids");

  PairedDataset out;
  const auto n = static_cast<Eigen::Index>(matches.size());
  out.inputs.resize(n, inputs.dim());
  out.targets.resize(n, targets.dim());
  out.ids.reserve(matches.size());
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto [in_row, tgt_row] = matches[static_cast<std::size_t>(r)];
    out.ids.push_back(inputs.ids[static_cast<std::size_t>(in_row)]);
    out.inputs.row(r) = inputs.data.row(in_row).cast<double>();
    out.targets.row(r) = targets.data.row(tgt_row).cast<double>();
  }
  out.dropped_inputs = inputs.ids.size() - matches.size();
  out.dropped_targets = targets.ids.size() - matches.size();
  return out;
}

EmbeddingSet make_embedding_set(std::vector<std::string> ids, const Eigen::MatrixXd& data) {
  EmbeddingSet set;
  set.ids = std::move(ids);
  set.data = data.cast<float>();
  return set;
}

}  // namespace ssondo
