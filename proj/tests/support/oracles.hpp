#pragma once

// Independent reference computations used to derive and check expected values.
// Nothing here calls into the code paths under test.

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// Central differences of a scalar function of a matrix.
inline Eigen::MatrixXd central_difference(const std::function<double(const Eigen::MatrixXd&)>& f, Eigen::MatrixXd x,
                                          double h = 1e-5) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + h;
    const double up = f(x);
    x.data()[i] = orig - h;
    const double down = f(x);
    x.data()[i] = orig;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor). The floor keeps gradients that are
/// zero up to rounding (e.g. cosine loss in one dimension) from reading as 100% error.
inline double relative_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double floor = 1e-6) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

/// O(n^2) DFT power spectrum of a real frame, bins 0..n/2.
inline std::vector<double> dft_power(const std::vector<double>& frame) {
  const std::size_t n = frame.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      acc += frame[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k) * double(t) / double(n));
    }
    out[k] = std::norm(acc);
  }
  return out;
}

/// Index of the nearest row of `centers`, scanning every candidate.
inline int nearest_center(const Eigen::RowVectorXd& p, const Eigen::MatrixXd& centers) {
  int best = 0;
  double best_d = INFINITY;
  for (int c = 0; c < centers.rows(); ++c) {
    double d = 0.0;
    for (Eigen::Index j = 0; j < p.size(); ++j) d += (p(j) - centers(c, j)) * (p(j) - centers(c, j));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

/// Average precision by pairwise rank counting (no sorting):
/// rank(i) = 1 + #{j : s_j > s_i or (s_j == s_i and j < i)}.
inline double pairwise_ap(const std::vector<double>& scores, const std::vector<int>& relevant) {
  const std::size_t n = scores.size();
  auto rank = [&](std::size_t i) {
    std::size_t r = 1;
    for (std::size_t j = 0; j < n; ++j) {
      if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++r;
    }
    return r;
  };
  double sum = 0.0;
  int n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!relevant[i]) continue;
    ++n_pos;
    const std::size_t ri = rank(i);
    int above = 0;
    for (std::size_t q = 0; q < n; ++q) {
      if (relevant[q] && rank(q) <= ri) ++above;
    }
    sum += double(above) / double(ri);
  }
  return n_pos ? sum / n_pos : NAN;
}

/// Exact least-squares fit of Y from [X, 1]; returns the fitted values.
inline Eigen::MatrixXd least_squares_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  Eigen::MatrixXd design(x.rows(), x.cols() + 1);
  design << x, Eigen::VectorXd::Ones(x.rows());
  const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(y);
  return design * coef;
}

/// Mean (1 - cos) between matching rows, computed directly.
inline double mean_cosine_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    total += 1.0 - a.row(i).dot(b.row(i)) / (a.row(i).norm() * b.row(i).norm());
  }
  return total / double(a.rows());
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ssondo_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
