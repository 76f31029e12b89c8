#include "fhproxy/benchcorpus.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/executor.hpp"
#include "fhproxy/parallel.hpp"
#include "fhproxy/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>

namespace fhproxy {

using nlohmann::json;

std::map<std::string, double> Corpus::truth_table() const {
    std::map<std::string, double> table;
    for (const CorpusEntry& e : entries) table[config_to_json(e.config)] = e.true_perf;
    return table;
}

std::vector<Config> Corpus::config_table() const {
    std::vector<Config> table;
    table.reserve(entries.size());
    for (const CorpusEntry& e : entries) table.push_back(e.config);
    return table;
}

std::vector<ParamSpec> default_corpus_space() {
    return {
        ParamSpec::categorical("width", {int64_t{16}, int64_t{32}, int64_t{64}, int64_t{128}}),
        ParamSpec::continuous("lr0", 1e-2, 2e-1, /*log_scale=*/true),
        ParamSpec::categorical("weight_decay", {0.0, 5e-4, 5e-3}),
    };
}

namespace {

void write_truth_csv(const Corpus& corpus) {
    std::vector<std::vector<std::string>> rows;
    for (const CorpusEntry& e : corpus.entries) {
        std::string seeds;
        for (size_t i = 0; i < e.seeds.size(); ++i) {
            if (i) seeds += ' ';
            seeds += std::to_string(e.seeds[i]);
        }
        std::string paths;
        for (size_t i = 0; i < e.history_paths.size(); ++i) {
            if (i) paths += ' ';
            paths += e.history_paths[i];
        }
        rows.push_back({config_to_json(e.config), seeds, format_double(e.true_perf), paths,
                        format_double(e.wall_ms_per_epoch)});
    }
    write_csv(corpus.dir / "truth.csv",
              {"config", "seeds", "true_perf", "history_paths", "wall_ms_per_epoch"}, rows);
}

void write_corpus_json(const Corpus& corpus) {
    json j;
    j["space"] = json::parse(space_to_json(corpus.space));
    j["data_spec"] = {{"n_train", corpus.data_spec.n_train},
                      {"n_val", corpus.data_spec.n_val},
                      {"input_dim", corpus.data_spec.input_dim},
                      {"classes", corpus.data_spec.classes},
                      {"cluster_spread", corpus.data_spec.cluster_spread},
                      {"warp_seed", corpus.data_spec.warp_seed},
                      {"noise", corpus.data_spec.noise}};
    j["base_model"] = {{"input_dim", corpus.base_model.input_dim},
                       {"hidden_dims", corpus.base_model.hidden_dims},
                       {"feature_dim", corpus.base_model.feature_dim},
                       {"classes", corpus.base_model.classes}};
    j["train_cfg"] = {{"epochs", corpus.train_cfg.epochs},
                      {"batch", corpus.train_cfg.batch},
                      {"lr0", corpus.train_cfg.lr0},
                      {"momentum", corpus.train_cfg.sgd.momentum},
                      {"weight_decay", corpus.train_cfg.sgd.weight_decay}};
    j["data_path"] = corpus.data_path;
    json entries = json::array();
    for (const CorpusEntry& e : corpus.entries) {
        entries.push_back({{"config", json::parse(config_to_json(e.config))},
                           {"seeds", e.seeds},
                           {"history_paths", e.history_paths},
                           {"true_perf", e.true_perf},
                           {"wall_ms_per_epoch", e.wall_ms_per_epoch}});
    }
    j["entries"] = entries;

    std::ofstream out(corpus.dir / "corpus.json", std::ios::trunc);
    if (!out) throw StorageError("build_corpus: cannot write corpus.json");
    out << j.dump(2) << '\n';
}

} // namespace

Corpus build_corpus(std::span<const ParamSpec> space, uint32_t n_configs,
                    std::span<const uint64_t> seeds, const Dataset& data,
                    const DatasetSpec& data_spec, const ModelSpec& base_model,
                    const TrainConfig& train_cfg, const std::filesystem::path& out_dir,
                    uint32_t workers, uint64_t master_seed, const std::string& data_path) {
    if (n_configs < 2) throw InvalidInputError("build_corpus: n_configs must be >= 2");
    if (seeds.empty()) throw InvalidInputError("build_corpus: need at least one seed");
    std::filesystem::create_directories(out_dir);

    Corpus corpus;
    corpus.dir = out_dir;
    corpus.space.assign(space.begin(), space.end());
    corpus.data_spec = data_spec;
    corpus.base_model = base_model;
    corpus.train_cfg = train_cfg;
    corpus.data_path = data_path;

    Rng rng(master_seed);
    Rng sample_rng = rng.fork();
    corpus.entries.resize(n_configs);
    for (uint32_t i = 0; i < n_configs; ++i) {
        corpus.entries[i].config = sample_config(space, sample_rng);
        corpus.entries[i].seeds.assign(seeds.begin(), seeds.end());
        corpus.entries[i].history_paths.resize(seeds.size());
    }

    struct Job {
        uint32_t entry;
        uint32_t seed_idx;
    };
    std::vector<Job> jobs;
    for (uint32_t e = 0; e < n_configs; ++e)
        for (uint32_t s = 0; s < seeds.size(); ++s) jobs.push_back({e, s});

    std::vector<double> final_acc(jobs.size(), -1.0);
    std::vector<double> epoch_ms(jobs.size(), 0.0);
    std::vector<uint8_t> failed(jobs.size(), 0);
    std::mutex warn_mutex;

    parallel_for(jobs.size(), workers, [&](size_t ji) {
        const Job& job = jobs[ji];
        CorpusEntry& entry = corpus.entries[job.entry];
        const std::string fname = "entry_" + std::to_string(job.entry) + "_seed_" +
                                  std::to_string(entry.seeds[job.seed_idx]) + ".fhst";
        try {
            ModelSpec model = base_model;
            TrainConfig cfg = train_cfg;
            apply_config(entry.config, model, cfg);
            cfg.seed = Rng::mix(Rng::mix(master_seed, job.entry),
                                entry.seeds[job.seed_idx]);

            Trainer trainer(model, data, cfg);
            trainer.run_to_epoch(cfg.epochs);
            write_history(out_dir / fname, trainer.history());
            entry.history_paths[job.seed_idx] = fname;
            final_acc[ji] =
                static_cast<double>(trainer.history().epochs.back().raw_val_accuracy);
            epoch_ms[ji] = trainer.mean_epoch_wall_ms();
        } catch (const std::exception& e) {
            failed[ji] = 1;
            std::lock_guard<std::mutex> lock(warn_mutex);
            std::cerr << "warning: corpus entry " << job.entry << " seed "
                      << entry.seeds[job.seed_idx] << " failed: " << e.what() << '\n';
        }
    });

    std::vector<uint8_t> entry_failed(n_configs, 0);
    for (size_t ji = 0; ji < jobs.size(); ++ji)
        if (failed[ji]) entry_failed[jobs[ji].entry] = 1;

    std::vector<CorpusEntry> kept;
    for (uint32_t e = 0; e < n_configs; ++e) {
        if (entry_failed[e]) {
            std::cerr << "warning: dropping corpus entry " << e << '\n';
            continue;
        }
        CorpusEntry& entry = corpus.entries[e];
        double acc = 0.0, ms = 0.0;
        uint32_t count = 0;
        for (size_t ji = 0; ji < jobs.size(); ++ji) {
            if (jobs[ji].entry != e) continue;
            acc += final_acc[ji];
            ms += epoch_ms[ji];
            ++count;
        }
        entry.true_perf = acc / count;
        entry.wall_ms_per_epoch = ms / count;
        kept.push_back(std::move(entry));
    }
    corpus.entries = std::move(kept);
    if (corpus.entries.size() < 2)
        throw SearchError("build_corpus: fewer than two entries survived");

    write_truth_csv(corpus);
    write_corpus_json(corpus);
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& dir) {
    std::ifstream in(dir / "corpus.json");
    if (!in) throw StorageError("load_corpus: cannot open " + (dir / "corpus.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("load_corpus: " + std::string(e.what()));
    }

    Corpus corpus;
    corpus.dir = dir;
    corpus.space = space_from_json(j.at("space").dump());
    const auto& ds = j.at("data_spec");
    corpus.data_spec.n_train = ds.at("n_train").get<uint32_t>();
    corpus.data_spec.n_val = ds.at("n_val").get<uint32_t>();
    corpus.data_spec.input_dim = ds.at("input_dim").get<uint32_t>();
    corpus.data_spec.classes = ds.at("classes").get<uint32_t>();
    corpus.data_spec.cluster_spread = ds.at("cluster_spread").get<double>();
    corpus.data_spec.warp_seed = ds.at("warp_seed").get<uint64_t>();
    corpus.data_spec.noise = ds.at("noise").get<double>();
    const auto& bm = j.at("base_model");
    corpus.base_model.input_dim = bm.at("input_dim").get<uint32_t>();
    corpus.base_model.hidden_dims = bm.at("hidden_dims").get<std::vector<uint32_t>>();
    corpus.base_model.feature_dim = bm.at("feature_dim").get<uint32_t>();
    corpus.base_model.classes = bm.at("classes").get<uint32_t>();
    const auto& tc = j.at("train_cfg");
    corpus.train_cfg.epochs = tc.at("epochs").get<uint32_t>();
    corpus.train_cfg.batch = tc.at("batch").get<uint32_t>();
    corpus.train_cfg.lr0 = tc.at("lr0").get<double>();
    corpus.train_cfg.sgd.momentum = tc.at("momentum").get<float>();
    corpus.train_cfg.sgd.weight_decay = tc.at("weight_decay").get<float>();
    corpus.data_path = j.value("data_path", std::string{});

    for (const auto& je : j.at("entries")) {
        CorpusEntry e;
        e.config = config_from_json(je.at("config").dump());
        e.seeds = je.at("seeds").get<std::vector<uint64_t>>();
        e.history_paths = je.at("history_paths").get<std::vector<std::string>>();
        e.true_perf = je.at("true_perf").get<double>();
        e.wall_ms_per_epoch = je.at("wall_ms_per_epoch").get<double>();
        corpus.entries.push_back(std::move(e));
    }
    return corpus;
}

double kendall_tau(std::span<const double> a, std::span<const double> b) {
    const size_t n = a.size();
    if (n != b.size()) throw InvalidInputError("kendall_tau: length mismatch");
    if (n < 2) throw InvalidInputError("kendall_tau: need at least two observations");

    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t i, size_t j) {
        if (a[i] != a[j]) return a[i] < a[j];
        return b[i] < b[j];
    });

    auto pairs_in_runs = [](const std::vector<double>& values) {
        uint64_t total = 0;
        size_t run = 1;
        for (size_t i = 1; i <= values.size(); ++i) {
            if (i < values.size() && values[i] == values[i - 1]) {
                ++run;
            } else {
                total += static_cast<uint64_t>(run) * (run - 1) / 2;
                run = 1;
            }
        }
        return total;
    };

    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = b[order[i]];

    // Ties in a, and joint ties, from the (a, b)-sorted order.
    uint64_t n1 = 0, n3 = 0;
    {
        size_t run_a = 1, run_ab = 1;
        for (size_t i = 1; i <= n; ++i) {
            const bool same_a = i < n && a[order[i]] == a[order[i - 1]];
            const bool same_ab = same_a && b[order[i]] == b[order[i - 1]];
            if (same_a) ++run_a;
            else {
                n1 += static_cast<uint64_t>(run_a) * (run_a - 1) / 2;
                run_a = 1;
            }
            if (same_ab) ++run_ab;
            else {
                n3 += static_cast<uint64_t>(run_ab) * (run_ab - 1) / 2;
                run_ab = 1;
            }
        }
    }

    std::vector<double> sorted_b(b.begin(), b.end());
    std::sort(sorted_b.begin(), sorted_b.end());
    const uint64_t n2 = pairs_in_runs(sorted_b);

    // Discordant pairs = strict inversions of y, counted by merge sort.
    uint64_t swaps = 0;
    std::vector<double> buf(n);
    for (size_t width = 1; width < n; width *= 2) {
        for (size_t lo = 0; lo + width < n; lo += 2 * width) {
            const size_t mid = lo + width;
            const size_t hi = std::min(lo + 2 * width, n);
            size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (y[j] < y[i]) {
                    swaps += mid - i;
                    buf[k++] = y[j++];
                } else {
                    buf[k++] = y[i++];
                }
            }
            while (i < mid) buf[k++] = y[i++];
            while (j < hi) buf[k++] = y[j++];
            std::copy(buf.begin() + static_cast<long>(lo), buf.begin() + static_cast<long>(hi),
                      y.begin() + static_cast<long>(lo));
        }
    }

    const uint64_t n0 = static_cast<uint64_t>(n) * (n - 1) / 2;
    const double denom = std::sqrt(static_cast<double>(n0 - n1)) *
                         std::sqrt(static_cast<double>(n0 - n2));
    if (denom == 0.0) return 0.0;
    const double concordant_minus_discordant =
        static_cast<double>(n0) - static_cast<double>(n1) - static_cast<double>(n2) +
        static_cast<double>(n3) - 2.0 * static_cast<double>(swaps);
    return concordant_minus_discordant / denom;
}

RankingReport ranking_eval(const Corpus& corpus, const ProxyConfig& proxy_cfg,
                           std::span<const uint32_t> epoch_grid,
                           std::span<const uint64_t> eval_seeds, uint32_t workers) {
    if (corpus.entries.size() < 2)
        throw InvalidInputError("ranking_eval: corpus needs at least two entries");
    if (epoch_grid.empty()) throw InvalidInputError("ranking_eval: empty epoch grid");
    if (eval_seeds.empty()) throw InvalidInputError("ranking_eval: need eval seeds");

    const size_t n_entries = corpus.entries.size();
    const size_t n_grid = epoch_grid.size();
    const size_t n_eval = eval_seeds.size();

    struct Job {
        size_t entry;
        size_t seed_idx;
    };
    std::vector<Job> jobs;
    for (size_t e = 0; e < n_entries; ++e)
        for (size_t s = 0; s < corpus.entries[e].seeds.size(); ++s) jobs.push_back({e, s});

    // raw[e][t]; proxy[v][e][t] — means over the entry's training seeds.
    std::vector<std::vector<double>> raw(n_entries, std::vector<double>(n_grid, 0.0));
    std::vector<std::vector<std::vector<double>>> proxy(
        n_eval, std::vector<std::vector<double>>(n_entries, std::vector<double>(n_grid, 0.0)));
    std::mutex stats_mutex;
    double estimate_ms_total = 0.0;
    uint64_t estimate_count = 0;

    parallel_for(jobs.size(), workers, [&](size_t ji) {
        const Job& job = jobs[ji];
        const CorpusEntry& entry = corpus.entries[job.entry];
        const FeatureHistory history =
            read_history(corpus.dir / entry.history_paths[job.seed_idx]);
        const double inv_seeds = 1.0 / static_cast<double>(entry.seeds.size());

        double local_ms = 0.0;
        uint64_t local_count = 0;
        for (size_t t = 0; t < n_grid; ++t) {
            const uint32_t epoch = epoch_grid[t];
            const EpochRecord* rec = history.find_epoch(epoch);
            if (!rec)
                throw InvalidInputError("ranking_eval: epoch " + std::to_string(epoch) +
                                        " missing from " + entry.history_paths[job.seed_idx]);
            ProxyConfig pcfg = proxy_cfg;
            pcfg.k = std::min(pcfg.k, epoch);
            for (size_t v = 0; v < n_eval; ++v) {
                Rng est_rng(Rng::mix(eval_seeds[v],
                                     Rng::mix(job.entry * 8191 + job.seed_idx, epoch)));
                const auto t0 = std::chrono::steady_clock::now();
                const ProxyEstimate est = estimate(history, epoch, pcfg, est_rng);
                const auto t1 = std::chrono::steady_clock::now();
                local_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
                ++local_count;
                proxy[v][job.entry][t] += est.accuracy * inv_seeds;
            }
            raw[job.entry][t] += static_cast<double>(rec->raw_val_accuracy) * inv_seeds;
        }
        std::lock_guard<std::mutex> lock(stats_mutex);
        estimate_ms_total += local_ms;
        estimate_count += local_count;
    });

    std::vector<double> truth(n_entries);
    for (size_t e = 0; e < n_entries; ++e) truth[e] = corpus.entries[e].true_perf;

    RankingReport report;
    report.epochs.assign(epoch_grid.begin(), epoch_grid.end());
    for (size_t t = 0; t < n_grid; ++t) {
        std::vector<double> raw_col(n_entries);
        for (size_t e = 0; e < n_entries; ++e) raw_col[e] = raw[e][t];

        double err_raw = 0.0;
        for (size_t e = 0; e < n_entries; ++e) err_raw += std::abs(raw_col[e] - truth[e]);
        report.abs_err_raw.push_back(err_raw / static_cast<double>(n_entries));
        report.tau_raw.push_back(kendall_tau(raw_col, truth));

        double err_proxy = 0.0, tau_proxy = 0.0;
        for (size_t v = 0; v < n_eval; ++v) {
            std::vector<double> proxy_col(n_entries);
            for (size_t e = 0; e < n_entries; ++e) proxy_col[e] = proxy[v][e][t];
            double err = 0.0;
            for (size_t e = 0; e < n_entries; ++e) err += std::abs(proxy_col[e] - truth[e]);
            err_proxy += err / static_cast<double>(n_entries);
            tau_proxy += kendall_tau(proxy_col, truth);
        }
        report.abs_err_proxy.push_back(err_proxy / static_cast<double>(n_eval));
        report.tau_proxy.push_back(tau_proxy / static_cast<double>(n_eval));
    }

    double epoch_ms = 0.0;
    for (const CorpusEntry& e : corpus.entries) epoch_ms += e.wall_ms_per_epoch;
    epoch_ms /= static_cast<double>(n_entries);
    const double mean_est_ms =
        estimate_count == 0 ? 0.0 : estimate_ms_total / static_cast<double>(estimate_count);
    report.overhead_epoch_equiv = epoch_ms > 0.0 ? mean_est_ms / epoch_ms : 0.0;
    return report;
}

} // namespace fhproxy
