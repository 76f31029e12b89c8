#pragma once

#include "fhproxy/feature_store.hpp"
#include "fhproxy/rng.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fhtest {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("fhproxy_" + tag + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline fhproxy::Matrix random_matrix(size_t rows, size_t cols, fhproxy::Rng& rng,
                                     double scale = 1.0) {
    fhproxy::Matrix m(rows, cols);
    for (size_t i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<float>(scale * (rng.uniform() * 2.0 - 1.0));
    return m;
}

inline fhproxy::FeatureHistory random_history(uint32_t n_train, uint32_t n_val, uint32_t d,
                                              uint32_t c, uint32_t n_epochs, fhproxy::Rng& rng) {
    fhproxy::FeatureHistory h;
    h.n_train = n_train;
    h.n_val = n_val;
    h.d = d;
    h.c = c;
    h.y_train.resize(n_train);
    for (uint32_t i = 0; i < n_train; ++i) h.y_train[i] = i % c;
    h.y_val.resize(n_val);
    for (uint32_t i = 0; i < n_val; ++i) h.y_val[i] = i % c;
    for (uint32_t e = 1; e <= n_epochs; ++e) {
        fhproxy::EpochRecord rec;
        rec.epoch = e;
        rec.h_train = random_matrix(n_train, d, rng);
        rec.h_val = random_matrix(n_val, d, rng);
        rec.cls_weight = random_matrix(c, d, rng);
        rec.cls_bias = random_matrix(1, c, rng);
        rec.raw_val_accuracy = static_cast<float>(rng.uniform());
        h.epochs.push_back(std::move(rec));
    }
    return h;
}

} // namespace fhtest
