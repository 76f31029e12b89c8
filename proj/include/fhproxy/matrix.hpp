#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fhproxy {

// Dense row-major float32 matrix. Value type, zero-initialized on resize.
class Matrix {
public:
    Matrix() = default;
    Matrix(size_t rows, size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0f) {}

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
    float at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }

    std::span<float> row(size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(size_t r) const { return {data_.data() + r * cols_, cols_}; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;

    void fill(float value);

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<float> data_;
};

// Throw InvalidInputError unless `m` has the given shape.
void require_shape(const Matrix& m, size_t rows, size_t cols, const char* what);

// Throw InvalidInputError if any entry is NaN or Inf.
void require_finite(const Matrix& m, const char* what);

} // namespace fhproxy
