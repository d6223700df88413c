#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace ssondo {

/// k-means result over teacher embeddings; assignments are the pseudo-labels.
struct ClusterModel {
  Eigen::MatrixXd centroids;  // k x d
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_history;  // one entry per Lloyd assignment step
  int iterations = 0;

  Eigen::Index k() const { return centroids.rows(); }
};

struct KMeansOptions {
  int max_iter = 100;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

/// Lloyd iterations from k-means++ seeding. Empty clusters are re-seeded at the
/// point farthest from its current centroid. Throws if inertia ever increases.
ClusterModel kmeans(const Eigen::MatrixXd& emb, int k, const KMeansOptions& options = {});

/// Nearest centroid by squared Euclidean distance, ties to the lowest index.
std::vector<int> assign(const ClusterModel& model, const Eigen::MatrixXd& emb);
std::vector<int> assign(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& emb);

double compute_inertia(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& emb,
                       const std::vector<int>& assignments);

Eigen::MatrixXd l2_normalize_rows(const Eigen::MatrixXd& emb);

struct SamplerWeights {
  Eigen::VectorXd weights;
};

inline constexpr double kDefaultBdsOffset = 100.0;

/// w(i) = 1 / (freq(cluster of i) + offset).
SamplerWeights bds_weights(const std::vector<int>& assignments, double offset = kDefaultBdsOffset);

SamplerWeights uniform_weights(Eigen::Index n);

/// Weighted sampling without replacement: key_i = -ln(u_i) / w_i, returns the
/// indices of the m smallest keys in ascending key order.
std::vector<Eigen::Index> sample_epoch(const SamplerWeights& weights, Eigen::Index m, std::uint64_t seed);

}  // namespace ssondo
