#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "ssondo/losses.hpp"
#include "support/oracles.hpp"

using namespace ssondo;

namespace {

// Literal loop transcription of the log-sum CLAP objective.
double clap_reference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool conventional = false) {
  const Eigen::Index n = a.rows();
  Eigen::MatrixXd s(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) s(i, j) = a.row(i).dot(b.row(j));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double row = 0.0, col = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      row += std::exp(s(i, j));
      col += std::exp(s(j, i));
    }
    const double l1 = std::exp(s(i, i)) / row;
    const double l2 = std::exp(s(i, i)) / col;
    total += conventional ? std::log(l1) + std::log(l2) : std::log(l1 + l2);
  }
  return -0.5 / n * total;
}

double kl_reference(const Eigen::MatrixXd& zs, const Eigen::MatrixXd& zt) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < zs.rows(); ++i) {
    const double ss = zs.row(i).array().exp().sum(), st = zt.row(i).array().exp().sum();
    for (Eigen::Index j = 0; j < zs.cols(); ++j) {
      const double pt = std::exp(zt(i, j)) / st, ps = std::exp(zs(i, j)) / ss;
      total += pt * std::log(pt / ps);
    }
  }
  return total / zs.rows();
}

Eigen::MatrixXd rows(std::initializer_list<std::initializer_list<double>> r) {
  Eigen::MatrixXd m(r.size(), r.begin()->size());
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("mse values") {
  CHECK(loss_mse(rows({{1, 2}}), rows({{1, 2}})).value == 0.0);
  const auto out = loss_mse(rows({{1, 2}}), rows({{0, 0}}));
  CHECK(out.value == 5.0);
  CHECK(out.grad == rows({{2, 4}}));
  CHECK(loss_mse(rows({{1, 0}, {0, 0}}), rows({{0, 0}, {0, 0}})).value == 0.5);
  CHECK_THROWS_AS(loss_mse(rows({{1, 0}}), rows({{1, 0, 0}})), UsageError);
  CHECK_THROWS_AS(loss_mse(Eigen::MatrixXd(0, 2), Eigen::MatrixXd(0, 2)), UsageError);
}

TEST_CASE("l1 values") {
  const auto same = loss_l1(rows({{1, -2}}), rows({{1, -2}}));
  CHECK(same.value == 0.0);
  CHECK(same.grad.isZero(0.0));
  const auto out = loss_l1(rows({{1, -2}}), rows({{0, 0}}));
  CHECK(out.value == 3.0);
  CHECK(out.grad == rows({{1, -1}}));
  CHECK(loss_l1(rows({{1, 1}, {0.5, 0.5}}), rows({{1, 1}, {0, 0}})).value == 0.5);
}

TEST_CASE("cosine values") {
  const Eigen::MatrixXd zt = rows({{1, 2, -1}, {0.5, 0, 3}});
  CHECK(loss_cosine(3.0 * zt, zt).value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss_cosine(rows({{1, 0}}), rows({{0, 1}})).value == doctest::Approx(1.0));
  CHECK(loss_cosine(rows({{1, 0}}), rows({{-1, 0}})).value == doctest::Approx(2.0));
  CHECK_THROWS_WITH_AS(loss_cosine(rows({{1, 0}, {0, 0}}), rows({{1, 0}, {1, 0}})), doctest::Contains("row 1"),
                       NumericalError);
}

TEST_CASE("clap values") {
  CHECK(loss_clap(rows({{0.3, -1.2}}), rows({{2.0, 0.1}})).value == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss_clap(rows({{1, 2}, {1, 2}}), rows({{1, 2}, {1, 2}})).value == doctest::Approx(0.0).epsilon(1e-14));
  const double c = 40.0;
  // (0.5 / 2) * 2 * log 2 at saturation.
  CHECK(loss_clap(rows({{c, 0}, {0, c}}), rows({{c, 0}, {0, c}})).value == doctest::Approx(-0.5 * std::log(2.0)).epsilon(1e-12));
  // Conventional form: log l1 + log l2 -> 0 at saturation.
  CHECK(loss_clap(rows({{c, 0}, {0, c}}), rows({{c, 0}, {0, c}}), 1.0, ClapVariant::sum_log).value ==
        doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_matrix(rng, 5, 3), b = oracle::random_matrix(rng, 5, 3);
    CHECK(loss_clap(a, b).value == doctest::Approx(clap_reference(a, b)).epsilon(1e-12));
    CHECK(loss_clap(a, b, 1.0, ClapVariant::sum_log).value ==
          doctest::Approx(clap_reference(a, b, true)).epsilon(1e-12));
    CHECK(loss_clap(a, b, 2.0).value == doctest::Approx(clap_reference(a / 2.0, b)).epsilon(1e-12));
  }
}

TEST_CASE("kl values") {
  CHECK(loss_kl(rows({{0.2, 1.0, -3.0}}), rows({{0.2, 1.0, -3.0}})).value == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(loss_kl(rows({{0, std::log(3.0)}}), rows({{0, 0}})).value == doctest::Approx(0.5 * std::log(4.0 / 3.0)).epsilon(1e-12));
  CHECK(0.5 * std::log(4.0 / 3.0) == doctest::Approx(0.14384).epsilon(1e-4));
  const Eigen::MatrixXd z = rows({{0.5, -1, 2}});
  CHECK(loss_kl((z.array() + 7.0).matrix(), z).value == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto a = oracle::random_matrix(rng, 4, 6), b = oracle::random_matrix(rng, 4, 6);
    CHECK(loss_kl(a, b).value == doctest::Approx(kl_reference(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("dispatch and default") {
  CHECK(kDefaultLoss == LossKind::cosine);
  const Eigen::MatrixXd z = rows({{1, 2}, {3, -4}});
  CHECK(loss_eval(LossKind::cosine, z, z).value == doctest::Approx(0.0).epsilon(1e-15));
  for (LossKind k : kAllLosses) CHECK(parse_loss_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_loss_kind("hinge"), UsageError);
}

TEST_CASE("gradients match finite differences for every loss") {
  std::mt19937_64 rng(77);
  const LossOptions conventional{1e-12, 0.7, ClapVariant::sum_log};
  for (LossKind kind : kAllLosses) {
    for (int t = 0; t < 30; ++t) {
      const Eigen::Index n = 1 + rng() % 8, d = 1 + rng() % 16;
      Eigen::MatrixXd zs = oracle::random_matrix(rng, n, d), zt = oracle::random_matrix(rng, n, d);
      if (kind == LossKind::l1) {
        // Keep every coordinate at least 1e-3 away from a kink.
        for (Eigen::Index i = 0; i < zs.size(); ++i) {
          double& v = zs.data()[i];
          const double diff = v - zt.data()[i];
          if (std::abs(diff) < 1e-3) v = zt.data()[i] + (diff < 0 ? -1e-3 : 1e-3) * 2;
        }
      }
      const auto out = loss_eval(kind, zs, zt);
      const auto fd = oracle::central_difference([&](const Eigen::MatrixXd& x) { return loss_eval(kind, x, zt).value; }, zs);
      CHECK_MESSAGE(oracle::relative_error(out.grad, fd) < 1e-6, to_string(kind));
      if (kind == LossKind::clap) {
        const auto alt = loss_eval(kind, zs, zt, conventional);
        const auto fd_alt = oracle::central_difference(
            [&](const Eigen::MatrixXd& x) { return loss_eval(kind, x, zt, conventional).value; }, zs);
        CHECK(oracle::relative_error(alt.grad, fd_alt) < 1e-6);
      }
    }
  }
}

TEST_CASE("invariants") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Index n = 1 + rng() % 8, d = 2 + rng() % 15;
    const Eigen::MatrixXd zs = oracle::random_matrix(rng, n, d), zt = oracle::random_matrix(rng, n, d);

    for (LossKind k : {LossKind::mse, LossKind::l1, LossKind::cosine, LossKind::kl}) {
      CHECK(loss_eval(k, zs, zt).value >= 0.0);
      CHECK(loss_eval(k, zt, zt).value == doctest::Approx(0.0).epsilon(1e-12));
    }

    // Cosine: positive per-row rescaling of the target, global rescaling of the student.
    Eigen::VectorXd scales = oracle::random_matrix(rng, n, 1).array().abs() + 0.1;
    CHECK(loss_cosine(scales.asDiagonal() * zt, zt).value == doctest::Approx(0.0).epsilon(1e-12));
    const auto base = loss_cosine(zs, zt);
    for (double alpha : {1e-3, 0.5, 7.0, 1e4}) {
      CHECK(std::abs(loss_cosine(alpha * zs, zt).value - base.value) < 1e-9);
    }
    for (Eigen::Index i = 0; i < n; ++i) CHECK(std::abs(base.grad.row(i).dot(zs.row(i))) < 1e-9);

    // KL: per-row shifts of either argument.
    const Eigen::VectorXd shift = oracle::random_matrix(rng, n, 1, 5.0);
    const double kl = loss_kl(zs, zt).value;
    CHECK(std::abs(loss_kl(Eigen::MatrixXd(zs.colwise() + shift), zt).value - kl) < 1e-9);
    CHECK(std::abs(loss_kl(zs, Eigen::MatrixXd(zt.colwise() + shift)).value - kl) < 1e-9);

    // Permutation equivariance.
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::PermutationMatrix<Eigen::Dynamic> p(Eigen::Map<Eigen::VectorXi>(perm.data(), n));
    for (LossKind k : kAllLosses) {
      const auto a = loss_eval(k, zs, zt);
      const auto b = loss_eval(k, Eigen::MatrixXd(p * zs), Eigen::MatrixXd(p * zt));
      CHECK(b.value == doctest::Approx(a.value).epsilon(1e-12));
      CHECK((b.grad - p * a.grad).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("softmax saturation stays finite") {
  const Eigen::MatrixXd big = rows({{800, -800}, {-800, 800}});
  const auto clap = loss_clap(big, big);
  CHECK(std::isfinite(clap.value));
  CHECK(clap.grad.allFinite());
  const auto kl = loss_kl(big, -big);
  CHECK(std::isfinite(kl.value));
  CHECK(kl.grad.allFinite());
}
