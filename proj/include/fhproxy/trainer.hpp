#pragma once

#include "fhproxy/feature_store.hpp"
#include "fhproxy/numkit.hpp"
#include "fhproxy/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace fhproxy {

// Synthetic multi-class task: Gaussian clusters in a latent space, pushed
// through a fixed random invertible warp (rotation, coordinate-wise cubic
// mix, rotation) so classes are not linearly separable in input space.
struct DatasetSpec {
    uint32_t n_train = 2048;
    uint32_t n_val = 512;
    uint32_t input_dim = 16;
    uint32_t classes = 10;
    double cluster_spread = 1.0;
    uint64_t warp_seed = 7;
    double noise = 0.0;

    void validate() const;
};

struct Dataset {
    Matrix x_train, x_val;
    std::vector<uint32_t> y_train, y_val;
    // Pre-warp latent points, kept for diagnostics only (never serialized).
    Matrix z_train, z_val;
    std::vector<float> latent_centers; // classes x input_dim, row-major
};

Dataset gen_dataset(const DatasetSpec& spec, Rng& rng);

// FHDS dataset file, little-endian:
//   magic "FHDS" | version u32 = 1 | n_train u32 | n_val u32 | input_dim u32
// | classes u32 | x_train f32[n_train*input_dim] | y_train u32[n_train]
// | x_val f32[n_val*input_dim] | y_val u32[n_val]
// Latent diagnostics are not persisted.
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);
uint64_t fhds_bytes(uint32_t n_train, uint32_t n_val, uint32_t input_dim);

// Feature extractor: input -> hidden_dims... -> feature_dim, rectifier after
// every layer; a linear classifier head maps features to class logits.
struct ModelSpec {
    uint32_t input_dim = 16;
    std::vector<uint32_t> hidden_dims{256};
    uint32_t feature_dim = 32;
    uint32_t classes = 10;

    void validate() const;
};

struct TrainConfig {
    uint32_t epochs = 60;
    uint32_t batch = 128;
    double lr0 = 0.05;
    SgdConfig sgd{0.05f, 0.9f, 5e-4f};
    uint64_t seed = 0;
    // Denominator of the linear LR schedule in epochs; 0 means `epochs`.
    // Resumable trials set this to the maximum budget so promotions continue
    // the same schedule.
    uint32_t schedule_epochs = 0;
    // When set, h_train is recomputed from the end-of-epoch checkpoint
    // instead of being captured during the forward passes.
    bool recompute_train_features = false;

    void validate() const;
    uint32_t schedule() const { return schedule_epochs == 0 ? epochs : schedule_epochs; }
};

// Weights for the extractor layers plus the classifier head. Layer i maps
// dims[i] -> dims[i+1] with dims = {input, hidden..., feature_dim}.
struct MlpModel {
    ModelSpec spec;
    std::vector<Matrix> w; // layer i: dims[i+1] x dims[i]
    std::vector<Matrix> b; // layer i: 1 x dims[i+1]
    Matrix cls_w;          // classes x feature_dim
    Matrix cls_b;          // 1 x classes

    Matrix features(const Matrix& x) const; // g(x), post-rectifier
    Matrix logits(const Matrix& x) const;   // h(g(x))
};

// He-style scaled-normal init: std = sqrt(2 / fan_in), biases zero.
MlpModel init_model(const ModelSpec& spec, Rng& rng);

// Top-1 accuracy of the model on (x, y), via the softmax path.
double evaluate(const MlpModel& model, const Matrix& x, std::span<const uint32_t> y);

struct EpochLogRow {
    uint32_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

// Resumable snapshot: everything needed to continue a run bit-exactly.
struct TrainerState {
    ModelSpec model_spec;
    TrainConfig config;
    uint32_t epoch = 0;
    std::array<uint64_t, 4> rng_state{};
    std::vector<Matrix> w, b, vw, vb;
    Matrix cls_w, cls_b, vcls_w, vcls_b;
};

std::vector<std::byte> serialize_state(const TrainerState& state);
TrainerState deserialize_state(std::span<const std::byte> bytes);
void save_state(const std::filesystem::path& path, const TrainerState& state);
TrainerState load_state(const std::filesystem::path& path);

// Mini-batch SGD on cross-entropy over the dataset, capturing per-epoch
// feature matrices and classifier checkpoints into a FeatureHistory.
class Trainer {
public:
    Trainer(const ModelSpec& model_spec, const Dataset& data, const TrainConfig& cfg);
    Trainer(const TrainerState& state, const Dataset& data, FeatureHistory history);

    // Advances training to `target_epoch` (1-based, inclusive), appending one
    // EpochRecord per epoch.
    void run_to_epoch(uint32_t target_epoch);

    uint32_t epoch() const { return epoch_; }
    const FeatureHistory& history() const { return history_; }
    FeatureHistory take_history() { return std::move(history_); }
    const MlpModel& model() const { return model_; }
    const std::vector<EpochLogRow>& log() const { return log_; }
    double mean_epoch_wall_ms() const;

    TrainerState state() const;

private:
    void run_one_epoch();

    const Dataset& data_;
    TrainConfig cfg_;
    MlpModel model_;
    std::vector<Matrix> vw_, vb_;
    Matrix vcls_w_, vcls_b_;
    Rng rng_;
    uint32_t epoch_ = 0;
    size_t steps_per_epoch_ = 0;
    FeatureHistory history_;
    std::vector<EpochLogRow> log_;
    double wall_ms_total_ = 0.0;
    uint32_t wall_epochs_ = 0;
};

// One-shot convenience: fresh model, train cfg.epochs epochs, persist the
// history to out_path (skipped when empty), return it.
FeatureHistory train_with_history(const ModelSpec& model_spec, const Dataset& data,
                                  const TrainConfig& cfg, const std::filesystem::path& out_path);

} // namespace fhproxy
