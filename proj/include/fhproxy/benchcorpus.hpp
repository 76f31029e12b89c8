#pragma once

#include "fhproxy/proxy.hpp"
#include "fhproxy/search.hpp"
#include "fhproxy/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fhproxy {

struct CorpusEntry {
    Config config;
    std::vector<uint64_t> seeds;
    std::vector<std::string> history_paths; // one per seed, relative to dir
    double true_perf = 0.0;                 // mean final raw accuracy over seeds
    double wall_ms_per_epoch = 0.0;
};

struct Corpus {
    std::filesystem::path dir;
    std::vector<ParamSpec> space;
    DatasetSpec data_spec;
    ModelSpec base_model;
    TrainConfig train_cfg;
    std::string data_path; // dataset file the histories were trained on
    std::vector<CorpusEntry> entries;

    std::map<std::string, double> truth_table() const; // config JSON -> true_perf
    std::vector<Config> config_table() const;
};

// Search space the desk corpus is sampled from: width in {16,32,64,128},
// lr0 log-uniform on [1e-2, 2e-1], weight_decay in {0, 5e-4, 5e-3}.
std::vector<ParamSpec> default_corpus_space();

// Samples n_configs configs and fully trains each once per seed, persisting
// every history plus truth.csv / corpus.json under out_dir. Failed
// trainings drop the entry with a warning on stderr.
Corpus build_corpus(std::span<const ParamSpec> space, uint32_t n_configs,
                    std::span<const uint64_t> seeds, const Dataset& data,
                    const DatasetSpec& data_spec, const ModelSpec& base_model,
                    const TrainConfig& train_cfg, const std::filesystem::path& out_dir,
                    uint32_t workers, uint64_t master_seed, const std::string& data_path = "");

Corpus load_corpus(const std::filesystem::path& dir);

// Kendall's tau-b (tie-adjusted), O(n log n) via merge-sort inversion
// counting. Returns 0 when either ranking is entirely tied.
double kendall_tau(std::span<const double> a, std::span<const double> b);

struct RankingReport {
    std::vector<uint32_t> epochs;
    std::vector<double> abs_err_raw;
    std::vector<double> abs_err_proxy;
    std::vector<double> tau_raw;
    std::vector<double> tau_proxy;
    // Measured estimate cost in epoch-equivalents; proxy points plotted at
    // epoch + this offset are budget-fair against the raw curve.
    double overhead_epoch_equiv = 0.0;
};

// Per grid epoch: mean |metric - true_perf| across entries and Kendall's tau
// between the metric vector and the truth vector. Proxy numbers are averaged
// over eval_seeds; raw numbers do not depend on them.
RankingReport ranking_eval(const Corpus& corpus, const ProxyConfig& proxy_cfg,
                           std::span<const uint32_t> epoch_grid,
                           std::span<const uint64_t> eval_seeds, uint32_t workers);

} // namespace fhproxy
