#pragma once

#include "fhproxy/proxy.hpp"
#include "fhproxy/search.hpp"
#include "fhproxy/trainer.hpp"

#include <atomic>
#include <filesystem>
#include <mutex>
#include <vector>

namespace fhproxy {

// Applies the search-space keys of `config` onto model/train settings.
// Recognized keys: "width" (single hidden layer width), "lr0",
// "weight_decay". Unknown keys are rejected.
void apply_config(const Config& config, ModelSpec& model, TrainConfig& train);

// Trial executor backed by the desk-scale trainer. Each trial trains the
// model its config describes on a shared dataset; on promotion the trial
// resumes from its serialized optimizer state, continuing the linear LR
// schedule computed against max_budget. Files live under work_dir as
// trial_<id>.fhst / trial_<id>.state.
class TrainerExecutor : public TrialExecutor {
public:
    struct Options {
        ModelSpec base_model;
        TrainConfig base_train;
        ProxyConfig proxy;
        std::filesystem::path work_dir;
        uint64_t master_seed = 0;
        uint32_t max_budget = 60;
        // Tabular mode: configs carry a single "entry" index into this table
        // of real configs (the corpus), mirroring search over a benchmark.
        const std::vector<Config>* config_table = nullptr;
    };

    TrainerExecutor(const Dataset& data, Options opts);

    void run(Trial& trial, uint32_t target_budget, bool want_proxy) override;

    uint64_t epochs_consumed() const { return epochs_consumed_.load(); }
    double mean_epoch_wall_ms() const;
    double mean_estimate_wall_ms() const;

    // Deterministic per-trial seed, independent of worker scheduling.
    uint64_t trial_seed(uint32_t trial_id) const;

private:
    Config resolve(const Config& config) const;

    const Dataset& data_;
    Options opts_;
    std::atomic<uint64_t> epochs_consumed_{0};
    mutable std::mutex stats_mutex_;
    double epoch_wall_ms_ = 0.0;
    uint64_t epoch_wall_count_ = 0;
    double estimate_wall_ms_ = 0.0;
    uint64_t estimate_count_ = 0;
};

} // namespace fhproxy
