#pragma once

// Brute-force reference implementations. Deliberately written with plain
// loops and no shared code with the library so that they can act as oracles.

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <torch/torch.h>

namespace latentcolor::testing {

inline std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

// prod_{s<=t} (1 - beta_s), accumulated left to right.
inline double alpha_bar_product(const std::vector<double>& betas, std::size_t t) {
  double p = 1.0;
  for (std::size_t s = 0; s <= t; ++s) p *= 1.0 - betas[s];
  return p;
}

// Mean of q(x_{t-1} | x_t, x_0) for a schedule given by its betas.
inline double posterior_mean(double x0, double xt, const std::vector<double>& betas, std::size_t t) {
  const double abar_t = alpha_bar_product(betas, t);
  const double abar_prev = t == 0 ? 1.0 : alpha_bar_product(betas, t - 1);
  const double beta = betas[t];
  const double c0 = std::sqrt(abar_prev) * beta / (1.0 - abar_t);
  const double ct = std::sqrt(1.0 - beta) * (1.0 - abar_prev) / (1.0 - abar_t);
  return c0 * x0 + ct * xt;
}

inline double psnr_oracle(const torch::Tensor& a, const torch::Tensor& b, double max_value = 1.0) {
  auto x = to_vector(a);
  auto y = to_vector(b);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (x[i] - y[i]) * (x[i] - y[i]);
  const double mse = sum / static_cast<double>(x.size());
  return 10.0 * std::log10(max_value * max_value / mse);
}

// Mean SSIM over every w x w window (stride 1) with population moments.
inline double ssim_oracle(const torch::Tensor& a, const torch::Tensor& b, int64_t w = 8, double range = 1.0) {
  const int64_t h = a.size(0);
  const int64_t wd = a.size(1);
  auto x = to_vector(a);
  auto y = to_vector(b);
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  const double n = static_cast<double>(w * w);
  double total = 0.0;
  int64_t windows = 0;
  for (int64_t i = 0; i + w <= h; ++i) {
    for (int64_t j = 0; j + w <= wd; ++j) {
      double mx = 0, my = 0;
      for (int64_t u = 0; u < w; ++u)
        for (int64_t v = 0; v < w; ++v) {
          mx += x[(i + u) * wd + j + v];
          my += y[(i + u) * wd + j + v];
        }
      mx /= n;
      my /= n;
      double vx = 0, vy = 0, cxy = 0;
      for (int64_t u = 0; u < w; ++u)
        for (int64_t v = 0; v < w; ++v) {
          const double dx = x[(i + u) * wd + j + v] - mx;
          const double dy = y[(i + u) * wd + j + v] - my;
          vx += dx * dx;
          vy += dy * dy;
          cxy += dx * dy;
        }
      vx /= n;
      vy /= n;
      cxy /= n;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

// Unbiased sample mean and covariance of row-wise samples, by explicit sums.
inline void moments_oracle(const Eigen::MatrixXd& s, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const auto n = s.rows();
  const auto d = s.cols();
  mean = Eigen::VectorXd::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k) mean(k) += s(i, k);
  mean /= static_cast<double>(n);
  cov = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index k = 0; k < d; ++k)
      for (Eigen::Index l = 0; l < d; ++l) cov(k, l) += (s(i, k) - mean(k)) * (s(i, l) - mean(l));
  cov /= static_cast<double>(n - 1);
}

// Principal square root by the Denman-Beavers iteration.
inline Eigen::MatrixXd sqrtm_denman_beavers(const Eigen::MatrixXd& a, int iterations = 100) {
  Eigen::MatrixXd y = a;
  Eigen::MatrixXd z = Eigen::MatrixXd::Identity(a.rows(), a.cols());
  for (int k = 0; k < iterations; ++k) {
    Eigen::MatrixXd y_next = 0.5 * (y + z.inverse());
    Eigen::MatrixXd z_next = 0.5 * (z + y.inverse());
    const double change = (y_next - y).norm();
    y = std::move(y_next);
    z = std::move(z_next);
    if (change < 1e-15 * y.norm()) break;
  }
  return y;
}

// |mu_p - mu_q|^2 + tr(S_p + S_q - 2 sqrt(S_p S_q)) with the square root
// taken directly on the (non-symmetric) product.
inline double frechet_oracle(const Eigen::VectorXd& mp, const Eigen::MatrixXd& sp, const Eigen::VectorXd& mq,
                             const Eigen::MatrixXd& sq) {
  const Eigen::MatrixXd root = sqrtm_denman_beavers(sp * sq);
  return (mp - mq).squaredNorm() + sp.trace() + sq.trace() - 2.0 * root.trace();
}

}  // namespace latentcolor::testing
