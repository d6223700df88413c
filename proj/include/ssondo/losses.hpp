#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "ssondo/error.hpp"
#include "ssondo/nn.hpp"

namespace ssondo {

enum class LossKind { mse, l1, cosine, clap, kl };

inline constexpr LossKind kDefaultLoss = LossKind::cosine;
inline constexpr LossKind kAllLosses[] = {LossKind::mse, LossKind::l1, LossKind::cosine, LossKind::clap, LossKind::kl};

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::mse: return "mse";
    case LossKind::l1: return "l1";
    case LossKind::cosine: return "cosine";
    case LossKind::clap: return "clap";
    case LossKind::kl: return "kl";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  for (LossKind k : kAllLosses) {
    if (to_string(k) == s) return k;
  }
  throw UsageError("unknown loss '" + std::string(s) + "' (expected mse, l1, cosine, clap or kl)");
}

// `log_sum`: -(0.5/N) sum log(l1 + l2). `sum_log`: -(0.5/N) sum (log l1 + log l2).
enum class ClapVariant { log_sum, sum_log };

inline std::string_view to_string(ClapVariant v) { return v == ClapVariant::log_sum ? "log_sum" : "sum_log"; }

inline ClapVariant parse_clap_variant(std::string_view s) {
  if (s == "log_sum") return ClapVariant::log_sum;
  if (s == "sum_log") return ClapVariant::sum_log;
  throw UsageError("unknown clap variant '" + std::string(s) + "'");
}

struct LossOptions {
  double cosine_eps = 1e-12;
  double clap_temperature = 1.0;
  ClapVariant clap_variant = ClapVariant::log_sum;
};

/// Scalar loss and its gradient with respect to the projected student embeddings.
template <typename Scalar>
struct LossOutput {
  Scalar value = 0;
  MatrixX<Scalar> grad;
};

namespace detail {

template <typename A, typename B>
void check_pair(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt, std::string_view what) {
  if (zs.rows() != zt.rows() || zs.cols() != zt.cols()) {
    throw UsageError(std::string(what) + ": shape mismatch (" + std::to_string(zs.rows()) + "x" +
                     std::to_string(zs.cols()) + " vs " + std::to_string(zt.rows()) + "x" +
                     std::to_string(zt.cols()) + ")");
  }
  if (zs.rows() == 0) throw UsageError(std::string(what) + ": empty batch");
  if (!zs.allFinite() || !zt.allFinite()) throw NumericalError(std::string(what) + ": non-finite input");
}

/// Row-wise log-softmax with max subtraction.
template <typename Scalar>
MatrixX<Scalar> log_softmax_rows(const MatrixX<Scalar>& x) {
  MatrixX<Scalar> shifted = x.colwise() - x.rowwise().maxCoeff();
  const VectorX<Scalar> lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

}  // namespace detail

template <typename A, typename B>
auto loss_mse(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt) {
  using Scalar = typename A::Scalar;
  detail::check_pair(zs, zt, "loss_mse");
  const Scalar n = static_cast<Scalar>(zs.rows());
  const MatrixX<Scalar> diff = zs - zt;
  return LossOutput<Scalar>{diff.squaredNorm() / n, (Scalar(2) / n) * diff};
}

template <typename A, typename B>
auto loss_l1(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt) {
  using Scalar = typename A::Scalar;
  detail::check_pair(zs, zt, "loss_l1");
  const Scalar n = static_cast<Scalar>(zs.rows());
  const MatrixX<Scalar> diff = zs - zt;
  MatrixX<Scalar> sign = diff.unaryExpr([](Scalar x) { return Scalar((x > 0) - (x < 0)); });
  return LossOutput<Scalar>{diff.cwiseAbs().sum() / n, sign / n};
}

template <typename A, typename B>
auto loss_cosine(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt, double norm_eps = 1e-12) {
  using Scalar = typename A::Scalar;
  detail::check_pair(zs, zt, "loss_cosine");
  const Eigen::Index N = zs.rows();
  const Scalar n = static_cast<Scalar>(N);
  LossOutput<Scalar> out;
  out.grad.resize(zs.rows(), zs.cols());
  for (Eigen::Index i = 0; i < N; ++i) {
    const Scalar ns = zs.row(i).norm();
    const Scalar nt = zt.row(i).norm();
    if (!(ns > norm_eps) || !(nt > norm_eps)) {
      throw NumericalError("loss_cosine: zero-norm row " + std::to_string(i) +
                           (ns > norm_eps ? " in teacher embeddings" : " in student embeddings"));
    }
    const Scalar cos = zs.row(i).dot(zt.row(i)) / (ns * nt);
    out.value += Scalar(1) - cos;
    // d cos / d a = b / (|a||b|) - cos * a / |a|^2
    out.grad.row(i) = -(zt.row(i) / (ns * nt) - cos * zs.row(i) / (ns * ns)) / n;
  }
  out.value /= n;
  return out;
}

template <typename A, typename B>
auto loss_clap(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt, double temperature = 1.0,
               ClapVariant variant = ClapVariant::log_sum) {
  using Scalar = typename A::Scalar;
  detail::check_pair(zs, zt, "loss_clap");
  if (!(temperature > 0.0)) throw UsageError("loss_clap: temperature must be positive");
  const Eigen::Index N = zs.rows();
  const Scalar n = static_cast<Scalar>(N);
  const Scalar inv_temp = Scalar(1) / static_cast<Scalar>(temperature);

  const MatrixX<Scalar> S = (zs * zt.transpose()) * inv_temp;
  const MatrixX<Scalar> P1 = detail::log_softmax_rows<Scalar>(S).array().exp().matrix();
  const MatrixX<Scalar> S_t = S.transpose();
  const MatrixX<Scalar> P2 = detail::log_softmax_rows<Scalar>(S_t).array().exp().matrix();

  // dL/dl1_i and dL/dl2_i.
  VectorX<Scalar> g1(N), g2(N);
  LossOutput<Scalar> out;
  for (Eigen::Index i = 0; i < N; ++i) {
    const Scalar l1 = P1(i, i), l2 = P2(i, i);
    if (variant == ClapVariant::log_sum) {
      out.value += std::log(l1 + l2);
      g1(i) = g2(i) = Scalar(-0.5) / (n * (l1 + l2));
    } else {
      out.value += std::log(l1) + std::log(l2);
      g1(i) = Scalar(-0.5) / (n * l1);
      g2(i) = Scalar(-0.5) / (n * l2);
    }
  }
  out.value *= Scalar(-0.5) / n;

  // d l_i / d S_ij = l_i (delta_ij - P_ij) for a row softmax.
  MatrixX<Scalar> G1 = -P1;
  G1.diagonal().array() += Scalar(1);
  G1 = (g1.cwiseProduct(P1.diagonal())).asDiagonal() * G1;
  MatrixX<Scalar> G2 = -P2;
  G2.diagonal().array() += Scalar(1);
  G2 = (g2.cwiseProduct(P2.diagonal())).asDiagonal() * G2;
  const MatrixX<Scalar> dS = (G1 + G2.transpose()) * inv_temp;
  out.grad = dS * zt;
  return out;
}

template <typename A, typename B>
auto loss_kl(const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt) {
  using Scalar = typename A::Scalar;
  detail::check_pair(zs, zt, "loss_kl");
  const Scalar n = static_cast<Scalar>(zs.rows());
  const MatrixX<Scalar> log_ps = detail::log_softmax_rows<Scalar>(zs);
  const MatrixX<Scalar> log_pt = detail::log_softmax_rows<Scalar>(zt);
  const MatrixX<Scalar> pt = log_pt.array().exp().matrix();
  LossOutput<Scalar> out;
  out.value = (pt.array() * (log_pt - log_ps).array()).sum() / n;
  out.grad = (log_ps.array().exp().matrix() - pt) / n;
  return out;
}

/// Dispatches on the loss kind. Z_t is always a constant.
template <typename A, typename B>
auto loss_eval(LossKind kind, const Eigen::MatrixBase<A>& zs, const Eigen::MatrixBase<B>& zt,
               const LossOptions& options = {}) {
  switch (kind) {
    case LossKind::mse: return loss_mse(zs, zt);
    case LossKind::l1: return loss_l1(zs, zt);
    case LossKind::cosine: return loss_cosine(zs, zt, options.cosine_eps);
    case LossKind::clap: return loss_clap(zs, zt, options.clap_temperature, options.clap_variant);
    case LossKind::kl: return loss_kl(zs, zt);
  }
  throw UsageError("loss_eval: invalid loss kind");
}

}  // namespace ssondo
