#include "fhproxy/matrix.hpp"

#include "fhproxy/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fhproxy {

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](float v) { return std::isfinite(v); });
}

void Matrix::fill(float value) {
    std::fill(data_.begin(), data_.end(), value);
}

void require_shape(const Matrix& m, size_t rows, size_t cols, const char* what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw InvalidInputError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()));
    }
}

void require_finite(const Matrix& m, const char* what) {
    if (!m.all_finite()) {
        throw InvalidInputError(std::string(what) + ": non-finite entries");
    }
}

} // namespace fhproxy
