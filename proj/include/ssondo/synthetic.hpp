#pragma once

#include <cstdint>
#include <vector>

#include "ssondo/embed_store.hpp"
#include "ssondo/nn.hpp"

namespace ssondo {

/// Desk-scale stand-in for (clip features, frozen teacher embeddings, class labels).
/// Inputs are a Gaussian mixture with one component per class; the teacher is a
/// frozen random two-layer MLP applied to those inputs.
struct DeskDatasetOptions {
  Eigen::Index samples = 5000;
  int input_dim = 20;
  int teacher_hidden = 64;
  int teacher_dim = 64;
  int num_classes = 10;
  double center_scale = 1.0;  // std of class centers
  double noise = 1.0;         // within-class std
  std::uint64_t seed = 7;
};

struct DeskDataset {
  EmbeddingSet inputs;
  EmbeddingSet teacher;
  std::vector<int> classes;
  Mlp<double> teacher_net;
};

DeskDataset make_desk_dataset(const DeskDatasetOptions& options = {});

/// Deterministic train/test partition: every `test_every`-th sample goes to test.
struct SplitIndices {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> test;
};
SplitIndices interleaved_split(Eigen::Index n, int test_every = 5);

EmbeddingSet select_rows(const EmbeddingSet& set, const std::vector<Eigen::Index>& rows);

}  // namespace ssondo
