#include "fhproxy/numkit.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/rng.hpp"

#include <doctest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>

using namespace fhproxy;

namespace {

Matrix row_matrix(std::initializer_list<float> values) {
    Matrix m(1, values.size());
    size_t i = 0;
    for (float v : values) m.data()[i++] = v;
    return m;
}

} // namespace

TEST_SUITE("numkit") {

TEST_CASE("softmax uniform logits") {
    const Matrix out = softmax(row_matrix({0.0f, 0.0f, 0.0f}));
    for (size_t j = 0; j < 3; ++j) CHECK(out.at(0, j) == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
}

TEST_CASE("softmax analytic two-class") {
    const Matrix out = softmax(row_matrix({0.0f, std::log(2.0f)}));
    CHECK(out.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(out.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("softmax against quad-precision oracle") {
    using quad = boost::multiprecision::cpp_bin_float_quad;
    const float logits[3] = {5.0f, 3.0f, 1.0f};
    quad sum = 0;
    quad ex[3];
    for (int j = 0; j < 3; ++j) {
        ex[j] = exp(quad(logits[j]) - quad(5.0f));
        sum += ex[j];
    }
    const Matrix out = softmax(row_matrix({5.0f, 3.0f, 1.0f}));
    for (int j = 0; j < 3; ++j) {
        const double expect = static_cast<double>(ex[j] / sum);
        CHECK(out.at(0, j) == doctest::Approx(expect).epsilon(1e-6));
    }
}

TEST_CASE("softmax rejects non-finite input") {
    Matrix bad = row_matrix({1.0f, 2.0f});
    bad.at(0, 1) = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(softmax(bad), InvalidInputError);
}

TEST_CASE("softmax rows sum to one on random input") {
    Rng rng(11);
    Matrix m(40, 7);
    for (size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<float>(rng.uniform(-30.0, 30.0));
    const Matrix out = softmax(m);
    for (size_t i = 0; i < out.rows(); ++i) {
        double sum = 0.0;
        for (size_t j = 0; j < out.cols(); ++j) {
            sum += out.at(i, j);
            CHECK(out.at(i, j) >= 0.0f);
        }
        CHECK(std::abs(sum - 1.0) <= 1e-6);
    }
}

TEST_CASE("softmax shift invariance") {
    // Exactly representable shift on exactly representable logits: bitwise.
    const Matrix a = softmax(row_matrix({1.0f, 2.0f, -3.0f, 0.5f}));
    const Matrix b = softmax(row_matrix({1.0f + 8.0f, 2.0f + 8.0f, -3.0f + 8.0f, 0.5f + 8.0f}));
    for (size_t j = 0; j < a.cols(); ++j) CHECK(a.at(0, j) == b.at(0, j));

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix base(1, 6);
        for (size_t j = 0; j < 6; ++j) base.at(0, j) = static_cast<float>(rng.uniform(-5, 5));
        const float shift = static_cast<float>(rng.uniform(-10, 10));
        Matrix shifted = base;
        for (size_t j = 0; j < 6; ++j) shifted.at(0, j) += shift;
        const Matrix pa = softmax(base), pb = softmax(shifted);
        for (size_t j = 0; j < 6; ++j)
            CHECK(std::abs(pa.at(0, j) - pb.at(0, j)) <= 1e-7);
    }
}

TEST_CASE("cross_entropy exact cases") {
    Matrix perfect(2, 3);
    perfect.at(0, 1) = 1.0f;
    perfect.at(1, 2) = 1.0f;
    const std::vector<uint32_t> y{1, 2};
    CHECK(cross_entropy(perfect, y) == doctest::Approx(0.0));

    Matrix uniform(4, 5);
    uniform.fill(0.2f);
    const std::vector<uint32_t> labels{0, 4, 2, 1};
    CHECK(cross_entropy(uniform, labels) == doctest::Approx(std::log(5.0)).epsilon(1e-6));

    Matrix probs(2, 2);
    probs.at(0, 0) = 0.7f;
    probs.at(0, 1) = 0.3f;
    probs.at(1, 0) = 0.2f;
    probs.at(1, 1) = 0.8f;
    const std::vector<uint32_t> y2{0, 1};
    CHECK(cross_entropy(probs, y2) ==
          doctest::Approx(-(std::log(0.7) + std::log(0.8)) / 2.0).epsilon(1e-6));
}

TEST_CASE("cross_entropy label out of range") {
    Matrix probs(1, 2);
    probs.at(0, 0) = 1.0f;
    const std::vector<uint32_t> y{2};
    CHECK_THROWS_AS(cross_entropy(probs, y), InvalidInputError);
}

TEST_CASE("cross_entropy nonnegative, zero only at certainty") {
    Rng rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        Matrix logits(6, 4);
        for (size_t i = 0; i < logits.size(); ++i)
            logits.data()[i] = static_cast<float>(rng.uniform(-4, 4));
        const Matrix probs = softmax(logits);
        std::vector<uint32_t> y(6);
        for (auto& v : y) v = static_cast<uint32_t>(rng.uniform_int(0, 3));
        CHECK(cross_entropy(probs, y) >= 0.0);
    }
    Matrix near_one(1, 2);
    near_one.at(0, 0) = 1.0f - 1e-6f;
    near_one.at(0, 1) = 1e-6f;
    const std::vector<uint32_t> y{0};
    CHECK(cross_entropy(near_one, y) > 0.0);
}

TEST_CASE("sgd_step identity and decay") {
    SgdConfig cfg{1.0f, 0.0f, 0.0f};
    Matrix w(1, 1), g(1, 1), v(1, 1);
    w.at(0, 0) = 2.5f;
    sgd_step(w, g, v, cfg, 0.1);
    CHECK(w.at(0, 0) == 2.5f);

    SgdConfig decay{1.0f, 0.0f, 0.1f};
    Matrix w2(1, 1), g2(1, 1), v2(1, 1);
    w2.at(0, 0) = 1.0f;
    sgd_step(w2, g2, v2, decay, 1.0);
    CHECK(w2.at(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
}

TEST_CASE("sgd_step momentum trace") {
    // Two steps, mu=0.9, g=1, wd=0, lr=0.1: v {1, 1.9}, w {0.9, 0.71}.
    SgdConfig cfg{1.0f, 0.9f, 0.0f};
    Matrix w(1, 1), g(1, 1), v(1, 1);
    w.at(0, 0) = 1.0f;
    g.at(0, 0) = 1.0f;
    sgd_step(w, g, v, cfg, 0.1);
    CHECK(v.at(0, 0) == doctest::Approx(1.0));
    CHECK(w.at(0, 0) == doctest::Approx(0.9));
    sgd_step(w, g, v, cfg, 0.1);
    CHECK(v.at(0, 0) == doctest::Approx(1.9));
    CHECK(w.at(0, 0) == doctest::Approx(0.71));
}

TEST_CASE("sgd_step shape mismatch") {
    SgdConfig cfg;
    Matrix w(2, 2), g(2, 3), v(2, 2);
    CHECK_THROWS_AS(sgd_step(w, g, v, cfg, 0.1), InvalidInputError);
}

TEST_CASE("linear_lr endpoints and affinity") {
    CHECK(linear_lr(0, 100, 0.05) == doctest::Approx(0.05));
    CHECK(linear_lr(100, 100, 0.05) == doctest::Approx(0.0));
    CHECK(linear_lr(50, 100, 0.05) == doctest::Approx(0.025));
    CHECK_THROWS_AS(linear_lr(101, 100, 0.05), InvalidInputError);

    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const uint64_t total = static_cast<uint64_t>(rng.uniform_int(2, 1000));
        uint64_t a = static_cast<uint64_t>(rng.uniform_int(0, static_cast<int64_t>(total)));
        uint64_t b = static_cast<uint64_t>(rng.uniform_int(0, static_cast<int64_t>(total)));
        if ((a + b) % 2 != 0) {
            if (b < total) ++b;
            else --b;
        }
        const double lhs = linear_lr(a, total, 0.3) + linear_lr(b, total, 0.3);
        const double rhs = 2.0 * linear_lr((a + b) / 2, total, 0.3);
        CHECK(std::abs(lhs - rhs) <= 1e-9);
    }
}

TEST_CASE("linear layer forward/backward hand case") {
    // x = [[1, 2]], w = [[3, 4], [5, 6]], b = [1, -1]
    Matrix x(1, 2), w(2, 2), b(1, 2);
    x.at(0, 0) = 1.0f;
    x.at(0, 1) = 2.0f;
    w.at(0, 0) = 3.0f;
    w.at(0, 1) = 4.0f;
    w.at(1, 0) = 5.0f;
    w.at(1, 1) = 6.0f;
    b.at(0, 0) = 1.0f;
    b.at(0, 1) = -1.0f;
    const Matrix logits = linear_forward(x, w, b);
    CHECK(logits.at(0, 0) == doctest::Approx(12.0)); // 3+8+1
    CHECK(logits.at(0, 1) == doctest::Approx(16.0)); // 5+12-1

    Matrix dlogits(1, 2);
    dlogits.at(0, 0) = 0.5f;
    dlogits.at(0, 1) = -1.0f;
    Matrix dw, db, dx;
    linear_backward(x, dlogits, dw, db);
    CHECK(dw.at(0, 0) == doctest::Approx(0.5));
    CHECK(dw.at(0, 1) == doctest::Approx(1.0));
    CHECK(dw.at(1, 0) == doctest::Approx(-1.0));
    CHECK(dw.at(1, 1) == doctest::Approx(-2.0));
    CHECK(db.at(0, 0) == doctest::Approx(0.5));
    CHECK(db.at(0, 1) == doctest::Approx(-1.0));
    linear_backward_input(dlogits, w, dx);
    CHECK(dx.at(0, 0) == doctest::Approx(0.5 * 3.0 - 1.0 * 5.0));
    CHECK(dx.at(0, 1) == doctest::Approx(0.5 * 4.0 - 1.0 * 6.0));
}

TEST_CASE("argmax ties break low") {
    Matrix m(1, 4);
    m.at(0, 1) = 2.0f;
    m.at(0, 3) = 2.0f;
    CHECK(argmax_row(m, 0) == 1);

    Matrix probs(2, 2);
    probs.at(0, 0) = 0.6f;
    probs.at(0, 1) = 0.4f;
    probs.at(1, 0) = 0.5f;
    probs.at(1, 1) = 0.5f;
    const std::vector<uint32_t> y{0, 0};
    CHECK(top1_accuracy(probs, y) == doctest::Approx(1.0));
}

} // TEST_SUITE
