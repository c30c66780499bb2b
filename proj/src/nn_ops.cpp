#include "nn_ops.hpp"

#include <cmath>
#include <limits>

namespace advcap::nn {

Matrix linear_forward(const Matrix& x, const Matrix& weight, const Matrix& bias) {
  Matrix y = x * weight;
  y.rowwise() += bias.row(0);
  return y;
}

Matrix linear_backward(const Matrix& x, const Matrix& dy, const Matrix& weight, Matrix* dweight,
                       Matrix* dbias) {
  if (dweight != nullptr) dweight->noalias() += x.transpose() * dy;
  if (dbias != nullptr) *dbias += dy.colwise().sum();
  return dy * weight.transpose();
}

Matrix layernorm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& cache) {
  const Eigen::Index rows = x.rows();
  const Eigen::Index d = x.cols();
  cache.xhat.resize(rows, d);
  cache.rstd.resize(rows);
  Matrix y(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(r) = rstd;
    cache.xhat.row(r) = (x.row(r).array() - mean) * rstd;
    y.row(r) = cache.xhat.row(r).array() * gamma.row(0).array() + beta.row(0).array();
  }
  return y;
}

Matrix layernorm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gamma,
                          Matrix* dgamma, Matrix* dbeta) {
  const Eigen::Index rows = dy.rows();
  const Eigen::Index d = dy.cols();
  if (dgamma != nullptr) *dgamma += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  if (dbeta != nullptr) *dbeta += dy.colwise().sum();
  Matrix dx(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::ArrayXXd dxhat = dy.row(r).array() * gamma.row(0).array();
    const double mean_dxhat = dxhat.mean();
    const double mean_dxhat_xhat = (dxhat * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.rstd(r) * (dxhat - mean_dxhat - cache.xhat.row(r).array() * mean_dxhat_xhat);
  }
  return dx;
}

namespace {

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

Matrix gelu_forward(const Matrix& x) {
  return x.unaryExpr([](double v) {
    return 0.5 * v * (1.0 + std::tanh(kGeluScale * (v + kGeluCubic * v * v * v)));
  });
}

Matrix gelu_backward(const Matrix& x, const Matrix& dy) {
  Matrix local = x.unaryExpr([](double v) {
    const double u = kGeluScale * (v + kGeluCubic * v * v * v);
    const double t = std::tanh(u);
    const double du = kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
    return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
  });
  return (local.array() * dy.array()).matrix();
}

Matrix attention_forward(const Matrix& qkv, int batch, int length, int heads, bool causal,
                         AttentionCache& cache) {
  const int width = static_cast<int>(qkv.cols() / 3);
  const int hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix out(static_cast<Eigen::Index>(batch) * length, width);
  cache.probs.assign(static_cast<std::size_t>(batch) * heads, Matrix());
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * length;
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(r0, h * hd, length, hd);
      const auto k = qkv.block(r0, width + h * hd, length, hd);
      const auto v = qkv.block(r0, 2 * width + h * hd, length, hd);
      Matrix p = (q * k.transpose()) * scale;
      for (int i = 0; i < length; ++i) {
        const int visible = causal ? i + 1 : length;
        const double mx = p.row(i).head(visible).maxCoeff();
        double sum = 0.0;
        for (int j = 0; j < visible; ++j) {
          p(i, j) = std::exp(p(i, j) - mx);
          sum += p(i, j);
        }
        for (int j = 0; j < visible; ++j) p(i, j) /= sum;
        for (int j = visible; j < length; ++j) p(i, j) = 0.0;
      }
      out.block(r0, h * hd, length, hd).noalias() = p * v;
      cache.probs[static_cast<std::size_t>(b) * heads + h] = std::move(p);
    }
  }
  return out;
}

Matrix attention_backward(const Matrix& qkv, const Matrix& dout, int batch, int length, int heads,
                          const AttentionCache& cache) {
  const int width = static_cast<int>(qkv.cols() / 3);
  const int hd = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix dqkv = Matrix::Zero(qkv.rows(), qkv.cols());
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * length;
    for (int h = 0; h < heads; ++h) {
      const Matrix& p = cache.probs[static_cast<std::size_t>(b) * heads + h];
      const auto q = qkv.block(r0, h * hd, length, hd);
      const auto k = qkv.block(r0, width + h * hd, length, hd);
      const auto v = qkv.block(r0, 2 * width + h * hd, length, hd);
      const auto dO = dout.block(r0, h * hd, length, hd);
      const Matrix dp = dO * v.transpose();
      dqkv.block(r0, 2 * width + h * hd, length, hd).noalias() = p.transpose() * dO;
      const Eigen::VectorXd rowdot = (p.array() * dp.array()).rowwise().sum();
      Matrix ds = p.array() * (dp.colwise() - rowdot).array();
      ds *= scale;
      dqkv.block(r0, h * hd, length, hd).noalias() = ds * k;
      dqkv.block(r0, width + h * hd, length, hd).noalias() = ds.transpose() * q;
    }
  }
  return dqkv;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng) {
  Matrix mask(rows, cols);
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? scale : 0.0;
  return mask;
}

}  // namespace advcap::nn
