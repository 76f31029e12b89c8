#include "fhproxy/numkit.hpp"

#include "fhproxy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace fhproxy {

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0f)) throw InvalidInputError("SgdConfig: learning_rate must be > 0");
    if (momentum < 0.0f || momentum >= 1.0f)
        throw InvalidInputError("SgdConfig: momentum must be in [0, 1)");
    if (weight_decay < 0.0f) throw InvalidInputError("SgdConfig: weight_decay must be >= 0");
}

Matrix softmax(const Matrix& logits) {
    if (logits.rows() == 0 || logits.cols() == 0)
        throw InvalidInputError("softmax: empty input");
    require_finite(logits, "softmax");

    Matrix out(logits.rows(), logits.cols());
    const size_t c = logits.cols();
    for (size_t i = 0; i < logits.rows(); ++i) {
        const auto in_row = logits.row(i);
        float row_max = in_row[0];
        for (size_t j = 1; j < c; ++j) row_max = std::max(row_max, in_row[j]);

        double sum = 0.0;
        auto out_row = out.row(i);
        for (size_t j = 0; j < c; ++j) {
            const double e = std::exp(static_cast<double>(in_row[j] - row_max));
            out_row[j] = static_cast<float>(e);
            sum += e;
        }
        const double inv = 1.0 / sum;
        for (size_t j = 0; j < c; ++j)
            out_row[j] = static_cast<float>(static_cast<double>(out_row[j]) * inv);
    }
    return out;
}

double cross_entropy(const Matrix& probs, std::span<const uint32_t> labels) {
    if (probs.rows() != labels.size())
        throw InvalidInputError("cross_entropy: row/label count mismatch");
    if (probs.rows() == 0) throw InvalidInputError("cross_entropy: empty input");

    constexpr double kProbFloor = 1e-12;
    double sum = 0.0;
    for (size_t i = 0; i < probs.rows(); ++i) {
        const uint32_t y = labels[i];
        if (y >= probs.cols())
            throw InvalidInputError("cross_entropy: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(probs.cols()) +
                                    " classes");
        const double p = std::max(static_cast<double>(probs.at(i, y)), kProbFloor);
        sum += -std::log(p);
    }
    return sum / static_cast<double>(probs.rows());
}

void sgd_step(Matrix& weights, const Matrix& grads, Matrix& velocity, const SgdConfig& cfg,
              double lr_now) {
    if (!weights.same_shape(grads) || !weights.same_shape(velocity))
        throw InvalidInputError("sgd_step: shape mismatch");
    cfg.validate();
    if (lr_now < 0.0) throw InvalidInputError("sgd_step: negative learning rate");

    const float lr = static_cast<float>(lr_now);
    float* w = weights.data();
    const float* g = grads.data();
    float* v = velocity.data();
    const size_t n = weights.size();
    for (size_t i = 0; i < n; ++i) {
        v[i] = cfg.momentum * v[i] + (g[i] + cfg.weight_decay * w[i]);
        w[i] -= lr * v[i];
    }
}

double linear_lr(uint64_t step, uint64_t total_steps, double lr0) {
    if (total_steps == 0) throw InvalidInputError("linear_lr: total_steps must be >= 1");
    if (step > total_steps) throw InvalidInputError("linear_lr: step beyond total_steps");
    if (!(lr0 > 0.0)) throw InvalidInputError("linear_lr: lr0 must be > 0");
    return lr0 * (1.0 - static_cast<double>(step) / static_cast<double>(total_steps));
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
    if (a.cols() != b.cols()) throw InvalidInputError("matmul_nt: inner dimension mismatch");
    if (out.rows() != a.rows() || out.cols() != b.rows()) out = Matrix(a.rows(), b.rows());

    const size_t k = a.cols();
    for (size_t i = 0; i < a.rows(); ++i) {
        const float* ai = a.data() + i * k;
        float* oi = out.data() + i * b.rows();
        for (size_t j = 0; j < b.rows(); ++j) {
            const float* bj = b.data() + j * k;
            double acc = 0.0;
            for (size_t t = 0; t < k; ++t) acc += static_cast<double>(ai[t]) * bj[t];
            oi[j] = static_cast<float>(acc);
        }
    }
}

Matrix linear_forward(const Matrix& x, const Matrix& w, const Matrix& bias) {
    if (x.cols() != w.cols()) throw InvalidInputError("linear_forward: feature dim mismatch");
    require_shape(bias, 1, w.rows(), "linear_forward bias");

    Matrix logits(x.rows(), w.rows());
    matmul_nt(x, w, logits);
    const float* b = bias.data();
    for (size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        for (size_t j = 0; j < row.size(); ++j) row[j] += b[j];
    }
    return logits;
}

void linear_backward(const Matrix& x, const Matrix& dlogits, Matrix& dw, Matrix& dbias) {
    if (x.rows() != dlogits.rows()) throw InvalidInputError("linear_backward: batch mismatch");
    const size_t n = x.rows(), d = x.cols(), c = dlogits.cols();
    if (dw.rows() != c || dw.cols() != d) dw = Matrix(c, d);
    if (dbias.rows() != 1 || dbias.cols() != c) dbias = Matrix(1, c);

    // Outer-product accumulation in double scratch, stored back as float.
    std::vector<double> wacc(c * d, 0.0);
    std::vector<double> bacc(c, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const float* xi = x.data() + i * d;
        const float* gi = dlogits.data() + i * c;
        for (size_t j = 0; j < c; ++j) {
            const double g = gi[j];
            bacc[j] += g;
            double* wj = wacc.data() + j * d;
            for (size_t t = 0; t < d; ++t) wj[t] += g * xi[t];
        }
    }
    for (size_t j = 0; j < c; ++j) {
        dbias.at(0, j) = static_cast<float>(bacc[j]);
        for (size_t t = 0; t < d; ++t) dw.at(j, t) = static_cast<float>(wacc[j * d + t]);
    }
}

void linear_backward_input(const Matrix& dlogits, const Matrix& w, Matrix& dx) {
    if (dlogits.cols() != w.rows())
        throw InvalidInputError("linear_backward_input: class dim mismatch");
    const size_t n = dlogits.rows(), c = w.rows(), d = w.cols();
    if (dx.rows() != n || dx.cols() != d) dx = Matrix(n, d);

    std::vector<double> acc(d);
    for (size_t i = 0; i < n; ++i) {
        std::fill(acc.begin(), acc.end(), 0.0);
        const float* gi = dlogits.data() + i * c;
        for (size_t j = 0; j < c; ++j) {
            const double g = gi[j];
            const float* wj = w.data() + j * d;
            for (size_t t = 0; t < d; ++t) acc[t] += g * wj[t];
        }
        float* out = dx.data() + i * d;
        for (size_t t = 0; t < d; ++t) out[t] = static_cast<float>(acc[t]);
    }
}

Matrix softmax_xent_grad(const Matrix& probs, std::span<const uint32_t> labels) {
    if (probs.rows() != labels.size())
        throw InvalidInputError("softmax_xent_grad: row/label count mismatch");
    Matrix dlogits = probs;
    const float inv_n = 1.0f / static_cast<float>(probs.rows());
    for (size_t i = 0; i < probs.rows(); ++i) {
        if (labels[i] >= probs.cols())
            throw InvalidInputError("softmax_xent_grad: label out of range");
        auto row = dlogits.row(i);
        row[labels[i]] -= 1.0f;
        for (auto& v : row) v *= inv_n;
    }
    return dlogits;
}

size_t argmax_row(const Matrix& m, size_t row) {
    const auto r = m.row(row);
    size_t best = 0;
    for (size_t j = 1; j < r.size(); ++j)
        if (r[j] > r[best]) best = j;
    return best;
}

double top1_accuracy(const Matrix& probs, std::span<const uint32_t> labels) {
    if (probs.rows() != labels.size())
        throw InvalidInputError("top1_accuracy: row/label count mismatch");
    if (probs.rows() == 0) throw InvalidInputError("top1_accuracy: empty input");
    size_t hits = 0;
    for (size_t i = 0; i < probs.rows(); ++i)
        if (argmax_row(probs, i) == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

} // namespace fhproxy
