#pragma once

#include "fhproxy/benchcorpus.hpp"
#include "fhproxy/search.hpp"
#include "fhproxy/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fhproxy {

// RFC-style CSV quoting: fields containing comma, quote or newline are
// wrapped in double quotes with embedded quotes doubled.
std::string csv_escape(const std::string& field);

std::string format_double(double v); // %.10g, locale-independent

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// epoch, train_loss, val_acc, lr
void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLogRow>& rows);

// trial_id, end_epoch, raw_acc, proxy_acc, wall_ms_overhead
std::string estimate_report_row(uint32_t trial_id, uint32_t end_epoch, double raw_acc,
                                double proxy_acc, double wall_ms_overhead);

// Per-trial rows followed by one summary row (winner id + regret when truth
// is available).
void write_search_report(const std::filesystem::path& path, const SearchResult& result,
                         const std::optional<double>& winner_regret);

void write_ranking_report(const std::filesystem::path& path, const RankingReport& report);

// Run manifest written alongside every command's outputs: the command, its
// flags, the master seed, version, output paths and wall timings. Written
// atomically (temp file + rename), once before heavy work and again with
// timings filled in.
struct RunManifest {
    std::string command;
    std::vector<std::pair<std::string, std::string>> flags;
    uint64_t master_seed = 0;
    std::string version;
    std::vector<std::string> outputs;
    std::map<std::string, double> timings_ms;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

} // namespace fhproxy
