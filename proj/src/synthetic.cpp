#include "ssondo/synthetic.hpp"

#include <cstdio>
#include <random>

#include "ssondo/error.hpp"
#include "ssondo/random.hpp"

namespace ssondo {

DeskDataset make_desk_dataset(const DeskDatasetOptions& o) {
  if (o.samples <= 0 || o.input_dim <= 0 || o.teacher_dim <= 0 || o.num_classes <= 0) {
    throw UsageError("make_desk_dataset: sizes must be positive");
  }
  Rng rng(o.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd centers(o.num_classes, o.input_dim);
  for (Eigen::Index i = 0; i < centers.size(); ++i) centers.data()[i] = o.center_scale * normal(rng);

  DeskDataset d;
  Eigen::MatrixXd x(o.samples, o.input_dim);
  std::vector<std::string> ids;
  for (Eigen::Index i = 0; i < o.samples; ++i) {
    // Contiguous class blocks, so the interleaved split sees every class.
    const int c = static_cast<int>(i * o.num_classes / o.samples);
    d.classes.push_back(c);
    for (int j = 0; j < o.input_dim; ++j) x(i, j) = centers(c, j) + o.noise * normal(rng);
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06ld", static_cast<long>(i));
    ids.emplace_back(buf);
  }
  d.teacher_net = Mlp<double>::kaiming_uniform({o.input_dim, o.teacher_hidden, o.teacher_dim}, Activation::relu,
                                               derive_seed(o.seed, 99));
  // Round inputs through binary32 first so the stored files reproduce the teacher exactly.
  const Eigen::MatrixXd x32 = x.cast<float>().cast<double>();
  d.inputs = make_embedding_set(ids, x32);
  d.teacher = make_embedding_set(ids, d.teacher_net.forward(x32));
  return d;
}

SplitIndices interleaved_split(Eigen::Index n, int test_every) {
  if (test_every < 2) throw UsageError("interleaved_split: test_every must be at least 2");
  SplitIndices s;
  for (Eigen::Index i = 0; i < n; ++i) ((i % test_every) == test_every - 1 ? s.test : s.train).push_back(i);
  return s;
}

EmbeddingSet select_rows(const EmbeddingSet& set, const std::vector<Eigen::Index>& rows) {
  EmbeddingSet out;
  out.data = set.data(rows, Eigen::all);
  for (Eigen::Index r : rows) out.ids.push_back(set.ids[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace ssondo
