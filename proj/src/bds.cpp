#include "ssondo/bds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

#include "ssondo/error.hpp"
#include "ssondo/random.hpp"

namespace ssondo {
namespace {

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

// Nearest centroid per row, and the summed squared distance.
double assign_rows(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& emb, std::vector<int>& out) {
  out.resize(static_cast<std::size_t>(emb.rows()));
  double total = 0.0;
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    int best = 0;
    double best_d = squared_distance(emb, i, centroids, 0);
    for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
      const double d = squared_distance(emb, i, centroids, c);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = best;
    total += best_d;
  }
  return total;
}

Eigen::MatrixXd kmeanspp_init(const Eigen::MatrixXd& emb, int k, Rng& rng) {
  const Eigen::Index n = emb.rows();
  Eigen::MatrixXd centroids(k, emb.cols());
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  auto first = static_cast<Eigen::Index>(uniform01(rng) * static_cast<double>(n));
  first = std::min(first, n - 1);
  centroids.row(0) = emb.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;

  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2(i) = squared_distance(emb, i, centroids, 0);

  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = -1;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (d2(i) > 0.0 && acc >= target) {
          pick = i;
          break;
        }
      }
      if (pick < 0) {
        for (Eigen::Index i = n; i-- > 0;) {
          if (d2(i) > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      // All remaining points coincide with a centroid; take the first unused row.
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!chosen[static_cast<std::size_t>(i)]) {
          pick = i;
          break;
        }
      }
    }
    centroids.row(c) = emb.row(pick);
    chosen[static_cast<std::size_t>(pick)] = 1;
    for (Eigen::Index i = 0; i < n; ++i) d2(i) = std::min(d2(i), squared_distance(emb, i, centroids, c));
  }
  return centroids;
}

}  // namespace

Eigen::MatrixXd l2_normalize_rows(const Eigen::MatrixXd& emb) {
  Eigen::MatrixXd out = emb;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > 0.0) out.row(i) /= norm;
  }
  return out;
}

double compute_inertia(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& emb,
                       const std::vector<int>& assignments) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < emb.rows(); ++i) {
    total += squared_distance(emb, i, centroids, assignments[static_cast<std::size_t>(i)]);
  }
  return total;
}

ClusterModel kmeans(const Eigen::MatrixXd& emb, int k, const KMeansOptions& options) {
  if (k < 1) throw UsageError("kmeans: k must be at least 1");
  if (emb.rows() < k) {
    throw UsageError("kmeans: k=" + std::to_string(k) + " exceeds the number of samples (" +
                     std::to_string(emb.rows()) + ")");
  }
  if (!emb.allFinite()) throw DataError("kmeans: embeddings contain non-finite values");
  if (options.max_iter < 1) throw UsageError("kmeans: max_iter must be positive");

  Rng rng(options.seed);
  ClusterModel model;
  model.centroids = kmeanspp_init(emb, k, rng);

  std::vector<int> counts(static_cast<std::size_t>(k));
  for (int iter = 0; iter < options.max_iter; ++iter) {
    const double inertia = assign_rows(model.centroids, emb, model.assignments);
    if (!model.inertia_history.empty()) {
      const double prev = model.inertia_history.back();
      // Means are the exact minimisers; allow only last-bit rounding noise.
      if (inertia > prev + 1e-12 * std::max(1.0, prev)) {
        throw NumericalError("kmeans: inertia increased at iteration " + std::to_string(iter));
      }
    }
    model.inertia_history.push_back(inertia);
    model.iterations = iter + 1;

    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, emb.cols());
    std::fill(counts.begin(), counts.end(), 0);
    for (Eigen::Index i = 0; i < emb.rows(); ++i) {
      const int c = model.assignments[static_cast<std::size_t>(i)];
      next.row(c) += emb.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) next.row(c) /= counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < emb.rows(); ++i) {
        const double d = squared_distance(emb, i, next, model.assignments[static_cast<std::size_t>(i)]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      next.row(c) = emb.row(far);
    }

    const double shift = (next - model.centroids).rowwise().norm().maxCoeff();
    model.centroids = std::move(next);
    if (shift < options.tol) break;
  }

  const double final_inertia = assign_rows(model.centroids, emb, model.assignments);
  if (final_inertia > model.inertia_history.back() + 1e-12 * std::max(1.0, model.inertia_history.back())) {
    throw NumericalError("kmeans: inertia increased on final assignment");
  }
  model.inertia = final_inertia;
  return model;
}

std::vector<int> assign(const Eigen::MatrixXd& centroids, const Eigen::MatrixXd& emb) {
  if (centroids.rows() == 0) throw UsageError("assign: no centroids");
  if (centroids.cols() != emb.cols()) {
    throw UsageError("assign: embedding dim " + std::to_string(emb.cols()) + " does not match centroid dim " +
                     std::to_string(centroids.cols()));
  }
  std::vector<int> out;
  assign_rows(centroids, emb, out);
  return out;
}

std::vector<int> assign(const ClusterModel& model, const Eigen::MatrixXd& emb) { return assign(model.centroids, emb); }

SamplerWeights bds_weights(const std::vector<int>& assignments, double offset) {
  if (assignments.empty()) throw UsageError("bds_weights: empty assignment vector");
  if (!(offset >= 0.0)) throw UsageError("bds_weights: offset must be non-negative");
  std::unordered_map<int, long> freq;
  for (int a : assignments) ++freq[a];
  SamplerWeights w;
  w.weights.resize(static_cast<Eigen::Index>(assignments.size()));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    w.weights(static_cast<Eigen::Index>(i)) = 1.0 / (static_cast<double>(freq[assignments[i]]) + offset);
  }
  return w;
}

SamplerWeights uniform_weights(Eigen::Index n) {
  if (n <= 0) throw UsageError("uniform_weights: n must be positive");
  return {Eigen::VectorXd::Ones(n)};
}

std::vector<Eigen::Index> sample_epoch(const SamplerWeights& weights, Eigen::Index m, std::uint64_t seed) {
  const Eigen::Index n = weights.weights.size();
  if (m < 0 || m > n) {
    throw UsageError("sample_epoch: cannot draw " + std::to_string(m) + " of " + std::to_string(n) +
                     " items without replacement");
  }
  if (!(weights.weights.array() > 0.0).all() || !weights.weights.allFinite()) {
    throw UsageError("sample_epoch: weights must be positive and finite");
  }
  Rng rng(seed);
  std::vector<double> keys(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) keys[static_cast<std::size_t>(i)] = -std::log(uniform01(rng)) / weights.weights(i);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto by_key = [&](Eigen::Index a, Eigen::Index b) {
    const double ka = keys[static_cast<std::size_t>(a)], kb = keys[static_cast<std::size_t>(b)];
    return ka < kb || (ka == kb && a < b);
  };
  std::partial_sort(order.begin(), order.begin() + m, order.end(), by_key);
  order.resize(static_cast<std::size_t>(m));
  return order;
}

}  // namespace ssondo
