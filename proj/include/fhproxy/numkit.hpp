#pragma once

#include "fhproxy/matrix.hpp"

#include <cstdint>
#include <span>

namespace fhproxy {

struct SgdConfig {
    float learning_rate = 0.05f;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;

    void validate() const;
};

// Row-wise softmax, stabilized by per-row max subtraction. exp/sum run in
// double, the result is stored back as float32.
Matrix softmax(const Matrix& logits);

// Mean of -log(prob of true class). Probabilities are floored at 1e-12;
// per-row sums are expected to be 1 within 1e-5. Accumulates in double.
double cross_entropy(const Matrix& probs, std::span<const uint32_t> labels);

// Momentum SGD with coupled L2:
//   v <- momentum * v + (g + weight_decay * w)
//   w <- w - lr_now * v
void sgd_step(Matrix& weights, const Matrix& grads, Matrix& velocity, const SgdConfig& cfg,
              double lr_now);

// lr0 * (1 - step / total_steps). step must stay within [0, total_steps].
double linear_lr(uint64_t step, uint64_t total_steps, double lr0);

// out = a * b^T; a is m x k, b is n x k. Dot products accumulate in double.
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);

// logits = x * w^T + bias; x is n x d, w is c x d, bias is 1 x c.
Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias);

// Gradient of a linear layer given dlogits (n x c) and its input x (n x d):
// dw = dlogits^T * x, dbias = column sums of dlogits.
void linear_backward(const Matrix& x, const Matrix& dlogits, Matrix& dw, Matrix& dbias);

// dx = dlogits * w  (n x c times c x d).
void linear_backward_input(const Matrix& dlogits, const Matrix& w, Matrix& dx);

// dlogits = (probs - onehot(labels)) / n — softmax plus cross-entropy, mean
// reduction.
Matrix softmax_xent_grad(const Matrix& probs, std::span<const uint32_t> labels);

// Index of the row maximum; ties break toward the lowest index.
size_t argmax_row(const Matrix& m, size_t row);

// Fraction of rows whose argmax matches the label.
double top1_accuracy(const Matrix& probs, std::span<const uint32_t> labels);

} // namespace fhproxy
