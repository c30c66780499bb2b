#pragma once

// Dense layer primitives with explicit backward passes. Activations are
// (rows, features) matrices; rows enumerate (batch, position) pairs.

#include "advcap/tensor.hpp"

#include <random>
#include <vector>

namespace advcap::nn {

// y = x W + b
Matrix linear_forward(const Matrix& x, const Matrix& weight, const Matrix& bias);
// Accumulates into dweight / dbias when non-null; returns dx.
Matrix linear_backward(const Matrix& x, const Matrix& dy, const Matrix& weight, Matrix* dweight,
                       Matrix* dbias);

struct LayerNormCache {
  Matrix xhat;
  Eigen::VectorXd rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

Matrix layernorm_forward(const Matrix& x, const Matrix& gamma, const Matrix& beta, LayerNormCache& cache);
Matrix layernorm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& gamma,
                          Matrix* dgamma, Matrix* dbeta);

// tanh approximation of GELU.
Matrix gelu_forward(const Matrix& x);
Matrix gelu_backward(const Matrix& x, const Matrix& dy);

struct AttentionCache {
  std::vector<Matrix> probs;  // one (S, S) matrix per (batch, head)
};

// qkv: (B*S, 3D) laid out as [Q | K | V]; returns (B*S, D).
Matrix attention_forward(const Matrix& qkv, int batch, int length, int heads, bool causal,
                         AttentionCache& cache);
Matrix attention_backward(const Matrix& qkv, const Matrix& dout, int batch, int length, int heads,
                          const AttentionCache& cache);

// Inverted dropout mask: entries are 0 or 1 / (1 - p). Empty when inactive.
Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, std::mt19937_64& rng);

}  // namespace advcap::nn
