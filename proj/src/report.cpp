#include "fhproxy/report.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/version.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fhproxy {

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw StorageError("write_csv: cannot open " + path.string());
    auto emit = [&](const std::vector<std::string>& row) {
        for (size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(row[i]);
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    if (!out) throw StorageError("write_csv: I/O failure writing " + path.string());
}

void write_epoch_log(const std::filesystem::path& path, const std::vector<EpochLogRow>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.reserve(rows.size());
    for (const EpochLogRow& r : rows)
        cells.push_back({std::to_string(r.epoch), format_double(r.train_loss),
                         format_double(r.val_acc), format_double(r.lr)});
    write_csv(path, {"epoch", "train_loss", "val_acc", "lr"}, cells);
}

std::string estimate_report_row(uint32_t trial_id, uint32_t end_epoch, double raw_acc,
                                double proxy_acc, double wall_ms_overhead) {
    return std::to_string(trial_id) + "," + std::to_string(end_epoch) + "," +
           format_double(raw_acc) + "," + format_double(proxy_acc) + "," +
           format_double(wall_ms_overhead);
}

void write_search_report(const std::filesystem::path& path, const SearchResult& result,
                         const std::optional<double>& winner_regret) {
    std::vector<std::vector<std::string>> rows;
    for (const SearchReportRow& r : result.rows) {
        rows.push_back({std::to_string(r.trial_id), r.config_json, std::to_string(r.bracket),
                        std::to_string(r.rung), std::to_string(r.budget),
                        format_double(r.raw_acc), format_double(r.proxy_acc),
                        std::to_string(r.wall_ms)});
    }
    rows.push_back({"winner", config_to_json(result.best.config), "", "",
                    std::to_string(result.best.budget_used),
                    format_double(result.best.metric_raw),
                    format_double(result.best.metric_proxy),
                    winner_regret ? format_double(*winner_regret) : ""});
    write_csv(path, {"trial_id", "config", "bracket", "rung", "budget", "raw_acc", "proxy_acc",
                     "wall_ms"},
              rows);
}

void write_ranking_report(const std::filesystem::path& path, const RankingReport& report) {
    std::vector<std::vector<std::string>> rows;
    for (size_t t = 0; t < report.epochs.size(); ++t) {
        rows.push_back({std::to_string(report.epochs[t]), format_double(report.abs_err_raw[t]),
                        format_double(report.abs_err_proxy[t]), format_double(report.tau_raw[t]),
                        format_double(report.tau_proxy[t]),
                        format_double(static_cast<double>(report.epochs[t]) +
                                      report.overhead_epoch_equiv)});
    }
    write_csv(path,
              {"epoch", "abs_err_raw", "abs_err_proxy", "tau_raw", "tau_proxy", "epoch_proxy"},
              rows);
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
    nlohmann::json j;
    j["command"] = manifest.command;
    nlohmann::json flags = nlohmann::json::object();
    for (const auto& [key, value] : manifest.flags) flags[key] = value;
    j["flags"] = flags;
    j["master_seed"] = manifest.master_seed;
    j["version"] = manifest.version.empty() ? std::string(kVersion) : manifest.version;
    j["outputs"] = manifest.outputs;
    j["timings_ms"] = manifest.timings_ms;

    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw StorageError("write_manifest: cannot open " + tmp);
        out << j.dump(2) << '\n';
        if (!out) throw StorageError("write_manifest: I/O failure writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

} // namespace fhproxy
