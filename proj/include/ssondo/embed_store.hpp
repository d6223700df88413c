#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ssondo {

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// SSND container: "SSND" | u32 version | u64 N | u32 d | N x (u16 len, utf8 id) | payload.
// Version 1 carries binary32 payloads (embedding files); version 2 carries
// binary64 payloads and is used only for checkpoint tensors.
inline constexpr char kSsndMagic[4] = {'S', 'S', 'N', 'D'};
inline constexpr std::uint32_t kSsndVersionF32 = 1;
inline constexpr std::uint32_t kSsndVersionF64 = 2;

/// Id-keyed N x d embedding matrix; row i belongs to ids[i].
struct EmbeddingSet {
  std::vector<std::string> ids;
  RowMatrixXf data;

  Eigen::Index size() const { return data.rows(); }
  Eigen::Index dim() const { return data.cols(); }

  bool operator==(const EmbeddingSet& other) const;
};

/// Student inputs joined with teacher targets on sample id.
struct PairedDataset {
  std::vector<std::string> ids;
  Eigen::MatrixXd inputs;
  Eigen::MatrixXd targets;
  std::size_t dropped_inputs = 0;
  std::size_t dropped_targets = 0;
};

/// Throws DataError if ids are empty/duplicated, shapes disagree or a value is non-finite.
void validate(const EmbeddingSet& set);

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set);
EmbeddingSet read_embeddings(const std::filesystem::path& path);

// Checkpoint tensors: same container, version 2, binary64 payload, ids are row labels.
void write_tensor_f64(const std::filesystem::path& path, const std::vector<std::string>& row_ids,
                      const RowMatrixXd& data);
RowMatrixXd read_tensor_f64(const std::filesystem::path& path, std::vector<std::string>* row_ids = nullptr);

/// Inner join on id, ordered by `inputs`. Throws DataError on an empty intersection.
PairedDataset align_pairs(const EmbeddingSet& inputs, const EmbeddingSet& targets);

EmbeddingSet make_embedding_set(std::vector<std::string> ids, const Eigen::MatrixXd& data);

}  // namespace ssondo
