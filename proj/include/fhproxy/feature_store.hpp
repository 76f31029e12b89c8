#pragma once

#include "fhproxy/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fhproxy {

// One training epoch's saved state: per-sample feature rows for the train
// and validation sets, the classifier weights at the end of the epoch, and
// the validation accuracy those weights achieved on h_val.
struct EpochRecord {
    uint32_t epoch = 0;
    Matrix h_train;    // n_train x d
    Matrix h_val;      // n_val x d
    Matrix cls_weight; // c x d
    Matrix cls_bias;   // 1 x c
    float raw_val_accuracy = 0.0f;
};

// Epoch-indexed archive of feature matrices, labels and classifier
// checkpoints for one training run. Epoch indices are strictly increasing
// and start at 1.
struct FeatureHistory {
    uint32_t n_train = 0;
    uint32_t n_val = 0;
    uint32_t d = 0;
    uint32_t c = 0;
    std::vector<uint32_t> y_train;
    std::vector<uint32_t> y_val;
    std::vector<EpochRecord> epochs;

    void validate() const;
    const EpochRecord* find_epoch(uint32_t epoch) const;
};

// FHST binary layout, little-endian:
//   header  = magic "FHST" | version u32 = 1 | n_train u32 | n_val u32
//           | d u32 | c u32 | y_train u32[n_train] | y_val u32[n_val]
//   blocks  = repeated per epoch:
//             epoch u32 | raw_val_accuracy f32
//           | h_train f32[n_train*d] | h_val f32[n_val*d]
//           | cls_weight f32[c*d]    | cls_bias f32[c]
// Rewriting the same history is byte-identical.
void write_history(const std::filesystem::path& path, const FeatureHistory& history);

FeatureHistory read_history(const std::filesystem::path& path);

// Exact on-disk byte counts for a history of the given shape.
uint64_t fhst_header_bytes(uint32_t n_train, uint32_t n_val);
uint64_t fhst_block_bytes(uint32_t n_train, uint32_t n_val, uint32_t d, uint32_t c);

// Records with epochs in [end_epoch - k + 1, end_epoch], clipped at the
// start of the history when fewer than k exist. end_epoch must be present.
std::vector<const EpochRecord*> window(const FeatureHistory& history, uint32_t end_epoch,
                                       uint32_t k);

} // namespace fhproxy
