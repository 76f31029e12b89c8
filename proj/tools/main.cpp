#include "fhproxy/benchcorpus.hpp"
#include "fhproxy/errors.hpp"
#include "fhproxy/executor.hpp"
#include "fhproxy/proxy.hpp"
#include "fhproxy/report.hpp"
#include "fhproxy/search.hpp"
#include "fhproxy/trainer.hpp"
#include "fhproxy/version.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace fhproxy;

namespace {

class StopWatch {
public:
    StopWatch() : start_(std::chrono::steady_clock::now()) {}
    double ms() const {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                         start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

uint32_t effective_workers(uint32_t flag_value) {
    if (const char* env = std::getenv("FH_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<uint32_t>(v);
    }
    return flag_value;
}

std::string read_text_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw StorageError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct GenDataArgs {
    std::string out;
    uint64_t seed = 1;
    DatasetSpec spec;
};

int cmd_gen_data(const GenDataArgs& args) {
    RunManifest manifest;
    manifest.command = "gen-data";
    manifest.master_seed = args.seed;
    manifest.flags = {{"out", args.out},
                      {"seed", std::to_string(args.seed)},
                      {"n-train", std::to_string(args.spec.n_train)},
                      {"n-val", std::to_string(args.spec.n_val)},
                      {"input-dim", std::to_string(args.spec.input_dim)},
                      {"classes", std::to_string(args.spec.classes)},
                      {"spread", format_double(args.spec.cluster_spread)},
                      {"noise", format_double(args.spec.noise)},
                      {"warp-seed", std::to_string(args.spec.warp_seed)}};
    manifest.outputs = {args.out};
    const fs::path manifest_path = args.out + ".manifest.json";
    write_manifest(manifest_path, manifest);

    StopWatch watch;
    Rng rng(args.seed);
    const Dataset data = gen_dataset(args.spec, rng);
    write_dataset(args.out, data);

    manifest.timings_ms["total"] = watch.ms();
    write_manifest(manifest_path, manifest);
    std::cout << "wrote " << args.out << " ("
              << fhds_bytes(args.spec.n_train, args.spec.n_val, args.spec.input_dim)
              << " bytes)\n";
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out;
    std::string log;
    uint32_t width = 256;
    uint32_t feature_dim = 32;
    TrainConfig cfg;
    double budget_fraction = 0.0; // 0 = off
    bool recompute_features = false;
};

int cmd_train(const TrainArgs& args) {
    TrainConfig cfg = args.cfg;
    cfg.recompute_train_features = args.recompute_features;
    if (args.budget_fraction > 0.0) {
        cfg.epochs = std::max<uint32_t>(
            1, static_cast<uint32_t>(std::llround(args.budget_fraction * cfg.epochs)));
        cfg.schedule_epochs = cfg.epochs; // schedule reaches zero at the shrunk budget
    }

    const std::string log_path = args.log.empty() ? args.out + ".log.csv" : args.log;
    RunManifest manifest;
    manifest.command = "train";
    manifest.master_seed = cfg.seed;
    manifest.flags = {{"data", args.data},
                      {"out", args.out},
                      {"epochs", std::to_string(cfg.epochs)},
                      {"batch", std::to_string(cfg.batch)},
                      {"lr0", format_double(cfg.lr0)},
                      {"momentum", format_double(cfg.sgd.momentum)},
                      {"weight-decay", format_double(cfg.sgd.weight_decay)},
                      {"width", std::to_string(args.width)},
                      {"feature-dim", std::to_string(args.feature_dim)},
                      {"seed", std::to_string(cfg.seed)},
                      {"schedule-epochs", std::to_string(cfg.schedule_epochs)},
                      {"budget-fraction", format_double(args.budget_fraction)},
                      {"recompute-features", args.recompute_features ? "1" : "0"},
                      {"log", log_path}};
    manifest.outputs = {args.out, log_path};
    const fs::path manifest_path = args.out + ".manifest.json";
    write_manifest(manifest_path, manifest);

    StopWatch watch;
    const Dataset data = read_dataset(args.data);
    ModelSpec model;
    model.input_dim = static_cast<uint32_t>(data.x_train.cols());
    model.hidden_dims = {args.width};
    model.feature_dim = args.feature_dim;
    uint32_t classes = 0;
    for (uint32_t y : data.y_train) classes = std::max(classes, y + 1);
    model.classes = classes;

    Trainer trainer(model, data, cfg);
    trainer.run_to_epoch(cfg.epochs);
    write_history(args.out, trainer.history());
    write_epoch_log(log_path, trainer.log());

    manifest.timings_ms["total"] = watch.ms();
    manifest.timings_ms["mean_epoch"] = trainer.mean_epoch_wall_ms();
    write_manifest(manifest_path, manifest);
    std::cout << "trained " << cfg.epochs << " epochs; final val_acc "
              << format_double(trainer.log().back().val_acc) << "; wrote " << args.out << '\n';
    return 0;
}

struct EstimateArgs {
    std::string history;
    uint32_t epoch = 0;
    ProxyConfig cfg;
    uint64_t seed = 1;
    uint32_t trial_id = 0;
    std::string out;
};

int cmd_estimate(const EstimateArgs& args) {
    const FeatureHistory history = read_history(args.history);
    const EpochRecord* rec = history.find_epoch(args.epoch);
    if (!rec)
        throw InvalidInputError("estimate: epoch " + std::to_string(args.epoch) +
                                " not present in " + args.history);

    ProxyConfig cfg = args.cfg;
    cfg.k = std::min(cfg.k, args.epoch);
    Rng rng(args.seed);
    StopWatch watch;
    const ProxyEstimate est = estimate(history, args.epoch, cfg, rng);
    const double wall = watch.ms();

    const std::string row =
        estimate_report_row(args.trial_id, args.epoch,
                            static_cast<double>(rec->raw_val_accuracy), est.accuracy, wall);
    std::cout << "trial_id,end_epoch,raw_acc,proxy_acc,wall_ms_overhead\n" << row << '\n';
    if (!args.out.empty()) {
        const bool fresh = !fs::exists(args.out);
        std::ofstream out(args.out, std::ios::app);
        if (!out) throw StorageError("estimate: cannot open " + args.out);
        if (fresh) out << "trial_id,end_epoch,raw_acc,proxy_acc,wall_ms_overhead\n";
        out << row << '\n';
    }
    return 0;
}

struct BuildCorpusArgs {
    std::string data;
    std::string out;
    std::string space_file;
    uint32_t configs = 24;
    std::vector<uint64_t> seeds{1, 2};
    uint32_t epochs = 60;
    uint32_t batch = 128;
    uint32_t feature_dim = 32;
    uint32_t workers = 4;
    uint64_t seed = 99;
};

int cmd_build_corpus(const BuildCorpusArgs& args) {
    RunManifest manifest;
    manifest.command = "build-corpus";
    manifest.master_seed = args.seed;
    manifest.flags = {{"data", args.data},
                      {"out", args.out},
                      {"configs", std::to_string(args.configs)},
                      {"epochs", std::to_string(args.epochs)},
                      {"workers", std::to_string(args.workers)},
                      {"seed", std::to_string(args.seed)}};
    manifest.outputs = {(fs::path(args.out) / "truth.csv").string(),
                        (fs::path(args.out) / "corpus.json").string()};
    fs::create_directories(args.out);
    const fs::path manifest_path = fs::path(args.out) / "manifest.json";
    write_manifest(manifest_path, manifest);

    StopWatch watch;
    const Dataset data = read_dataset(args.data);
    const std::vector<ParamSpec> space = args.space_file.empty()
                                             ? default_corpus_space()
                                             : space_from_json(read_text_file(args.space_file));

    DatasetSpec data_spec; // recorded for provenance; counts from the file
    data_spec.n_train = static_cast<uint32_t>(data.x_train.rows());
    data_spec.n_val = static_cast<uint32_t>(data.x_val.rows());
    data_spec.input_dim = static_cast<uint32_t>(data.x_train.cols());
    uint32_t classes = 0;
    for (uint32_t y : data.y_train) classes = std::max(classes, y + 1);
    data_spec.classes = classes;

    ModelSpec model;
    model.input_dim = data_spec.input_dim;
    model.feature_dim = args.feature_dim;
    model.classes = classes;

    TrainConfig cfg;
    cfg.epochs = args.epochs;
    cfg.batch = args.batch;

    const Corpus corpus =
        build_corpus(space, args.configs, args.seeds, data, data_spec, model, cfg, args.out,
                     effective_workers(args.workers), args.seed, args.data);

    manifest.timings_ms["total"] = watch.ms();
    write_manifest(manifest_path, manifest);
    std::cout << "built corpus with " << corpus.entries.size() << " entries under " << args.out
              << '\n';
    return 0;
}

struct SearchArgs {
    std::string algo;
    std::string metric = "proxy";
    uint32_t eta = 2;
    uint32_t max_budget = 60;
    uint32_t workers = 4;
    uint64_t seed = 1;
    uint32_t pool = 64;
    std::string space_file;
    std::string data;
    std::string corpus_dir;
    std::string out;
    ProxyConfig proxy;
    double rho = 1.0 / 3.0;
    uint32_t min_points = 0;
    double gamma = 0.15;
    uint32_t width = 256;
    uint32_t feature_dim = 32;
    uint32_t batch = 128;
};

int cmd_search(const SearchArgs& args) {
    if (args.corpus_dir.empty() == args.space_file.empty())
        throw InvalidInputError("search: provide exactly one of --space or --corpus");

    const uint32_t workers = effective_workers(args.workers);
    RunManifest manifest;
    manifest.command = "search";
    manifest.master_seed = args.seed;
    manifest.flags = {{"algo", args.algo},
                      {"metric", args.metric},
                      {"eta", std::to_string(args.eta)},
                      {"max-budget", std::to_string(args.max_budget)},
                      {"workers", std::to_string(workers)},
                      {"seed", std::to_string(args.seed)},
                      {"space", args.space_file},
                      {"corpus", args.corpus_dir},
                      {"pool", std::to_string(args.pool)}};
    fs::create_directories(args.out);
    const fs::path report_path = fs::path(args.out) / "search_report.csv";
    manifest.outputs = {report_path.string()};
    const fs::path manifest_path = fs::path(args.out) / "manifest.json";
    write_manifest(manifest_path, manifest);

    StopWatch watch;

    // Assemble dataset, space and executor for either mode.
    Dataset data;
    std::vector<ParamSpec> space;
    std::vector<Config> table;
    std::optional<std::map<std::string, double>> truth;
    TrainerExecutor::Options opts;
    opts.work_dir = fs::path(args.out) / "trials";
    opts.master_seed = args.seed;
    opts.max_budget = args.max_budget;
    opts.proxy = args.proxy;
    opts.base_train.batch = args.batch;

    if (!args.corpus_dir.empty()) {
        const Corpus corpus = load_corpus(args.corpus_dir);
        if (corpus.data_path.empty())
            throw InvalidInputError("search: corpus does not record its dataset path");
        data = read_dataset(corpus.data_path);
        table = corpus.config_table();
        truth = corpus.truth_table();
        opts.base_model = corpus.base_model;
        opts.base_train.batch = corpus.train_cfg.batch;
        space = {ParamSpec::integer("entry", 0, static_cast<int64_t>(table.size()) - 1)};
        opts.config_table = &table;
    } else {
        if (args.data.empty()) throw InvalidInputError("search: --space mode requires --data");
        data = read_dataset(args.data);
        space = space_from_json(read_text_file(args.space_file));
        opts.base_model.input_dim = static_cast<uint32_t>(data.x_train.cols());
        opts.base_model.hidden_dims = {args.width};
        opts.base_model.feature_dim = args.feature_dim;
        uint32_t classes = 0;
        for (uint32_t y : data.y_train) classes = std::max(classes, y + 1);
        opts.base_model.classes = classes;
    }

    TrainerExecutor executor(data, opts);
    const MetricKind metric = args.metric == "raw" ? MetricKind::kRaw : MetricKind::kProxy;
    Rng rng(args.seed);

    SearchResult result;
    if (args.algo == "random") {
        result = random_search(space, args.pool, args.max_budget, executor, metric, workers, rng);
    } else if (args.algo == "hyperband") {
        HyperBandConfig cfg{args.max_budget, args.eta, metric, workers};
        result = hyperband(space, cfg, executor, rng);
    } else if (args.algo == "bohb") {
        BohbConfig cfg;
        cfg.hyperband = HyperBandConfig{args.max_budget, args.eta, metric, workers};
        cfg.random_fraction = args.rho;
        cfg.min_points_in_model = args.min_points;
        cfg.good_quantile = args.gamma;
        result = bohb(space, cfg, executor, rng);
    } else {
        throw InvalidInputError("search: unknown --algo " + args.algo);
    }

    // In tabular mode the winner's config resolves through the table; regret
    // is measured against the recorded truth.
    std::optional<double> winner_regret;
    if (truth) {
        Trial resolved = result.best;
        resolved.config = table[static_cast<size_t>(
            std::get<int64_t>(result.best.config.at("entry")))];
        winner_regret = regret(resolved, *truth);
    }
    write_search_report(report_path, result, winner_regret);

    manifest.timings_ms["total"] = watch.ms();
    write_manifest(manifest_path, manifest);
    std::cout << "winner trial " << result.best.id << " config "
              << config_to_json(result.best.config) << " metric_raw "
              << format_double(result.best.metric_raw);
    if (winner_regret) std::cout << " regret " << format_double(*winner_regret);
    std::cout << "; report " << report_path.string() << '\n';
    return 0;
}

struct RankEvalArgs {
    std::string corpus_dir;
    std::vector<uint32_t> epochs;
    std::vector<uint64_t> eval_seeds{1, 2, 3};
    ProxyConfig proxy;
    uint32_t workers = 4;
    std::string out;
};

int cmd_rank_eval(const RankEvalArgs& args) {
    const fs::path out_path =
        args.out.empty() ? fs::path(args.corpus_dir) / "ranking.csv" : fs::path(args.out);
    RunManifest manifest;
    manifest.command = "rank-eval";
    manifest.master_seed = args.eval_seeds.empty() ? 0 : args.eval_seeds.front();
    manifest.flags = {{"corpus", args.corpus_dir}, {"out", out_path.string()}};
    manifest.outputs = {out_path.string()};
    const fs::path manifest_path = out_path.string() + ".manifest.json";
    write_manifest(manifest_path, manifest);

    StopWatch watch;
    const Corpus corpus = load_corpus(args.corpus_dir);
    const RankingReport report = ranking_eval(corpus, args.proxy, args.epochs, args.eval_seeds,
                                              effective_workers(args.workers));
    write_ranking_report(out_path, report);

    manifest.timings_ms["total"] = watch.ms();
    write_manifest(manifest_path, manifest);
    for (size_t t = 0; t < report.epochs.size(); ++t)
        std::cout << "epoch " << report.epochs[t] << ": abs_err raw "
                  << format_double(report.abs_err_raw[t]) << " proxy "
                  << format_double(report.abs_err_proxy[t]) << "; tau raw "
                  << format_double(report.tau_raw[t]) << " proxy "
                  << format_double(report.tau_proxy[t]) << '\n';
    std::cout << "overhead " << format_double(report.overhead_epoch_equiv)
              << " epoch-equivalents; report " << out_path.string() << '\n';
    return 0;
}

void add_proxy_flags(CLI::App* cmd, ProxyConfig& cfg) {
    cmd->add_option("--k", cfg.k, "Ensemble window size")->capture_default_str();
    cmd->add_option("--refit-epochs", cfg.refit_epochs, "Refit epochs per window member")
        ->capture_default_str();
    cmd->add_option("--refit-batch", cfg.refit_batch, "Refit batch size")->capture_default_str();
    cmd->add_option("--refit-lr0", cfg.refit_lr0, "Refit initial learning rate")
        ->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "Refit threads (0 = hardware)")
        ->capture_default_str();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Feature-history proxy estimation and hyperparameter search"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    GenDataArgs gen_args;
    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset file");
    gen->add_option("--out", gen_args.out, "Output dataset path")->required();
    gen->add_option("--seed", gen_args.seed, "Master seed")->capture_default_str();
    gen->add_option("--n-train", gen_args.spec.n_train, "Training samples")
        ->capture_default_str();
    gen->add_option("--n-val", gen_args.spec.n_val, "Validation samples")->capture_default_str();
    gen->add_option("--input-dim", gen_args.spec.input_dim, "Input dimensionality")
        ->capture_default_str();
    gen->add_option("--classes", gen_args.spec.classes, "Class count")->capture_default_str();
    gen->add_option("--spread", gen_args.spec.cluster_spread, "Within-cluster spread")
        ->capture_default_str();
    gen->add_option("--noise", gen_args.spec.noise, "Observation noise")->capture_default_str();
    gen->add_option("--warp-seed", gen_args.spec.warp_seed, "Warp seed")->capture_default_str();

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train an MLP and archive its feature history");
    train->add_option("--data", train_args.data, "Dataset file from gen-data")->required();
    train->add_option("--out", train_args.out, "Output FHST path")->required();
    train->add_option("--epochs", train_args.cfg.epochs, "Epoch budget")->capture_default_str();
    train->add_option("--batch", train_args.cfg.batch, "Batch size")->capture_default_str();
    train->add_option("--lr0", train_args.cfg.lr0, "Initial learning rate")
        ->capture_default_str();
    train->add_option("--momentum", train_args.cfg.sgd.momentum, "SGD momentum")
        ->capture_default_str();
    train->add_option("--weight-decay", train_args.cfg.sgd.weight_decay, "L2 weight decay")
        ->capture_default_str();
    train->add_option("--width", train_args.width, "Hidden layer width")->capture_default_str();
    train->add_option("--feature-dim", train_args.feature_dim, "Feature dimensionality")
        ->capture_default_str();
    train->add_option("--seed", train_args.cfg.seed, "Training seed")->capture_default_str();
    train->add_option("--schedule-epochs", train_args.cfg.schedule_epochs,
                      "LR schedule denominator (0 = --epochs)")
        ->capture_default_str();
    train->add_option("--budget-fraction", train_args.budget_fraction,
                      "Scale epochs and schedule by this fraction");
    train->add_flag("--recompute-features", train_args.recompute_features,
                    "Recompute train features at epoch end");
    train->add_option("--log", train_args.log, "Per-epoch CSV log path (default <out>.log.csv)");

    EstimateArgs est_args;
    auto* est = app.add_subcommand("estimate", "Proxy-estimate converged accuracy from a history");
    est->add_option("--history", est_args.history, "FHST file")->required();
    est->add_option("--epoch", est_args.epoch, "Estimate at this epoch")->required();
    add_proxy_flags(est, est_args.cfg);
    est->add_option("--seed", est_args.seed, "Refit shuffle seed")->capture_default_str();
    est->add_option("--trial-id", est_args.trial_id, "Trial id for the report row")
        ->capture_default_str();
    est->add_option("--out", est_args.out, "Append the report row to this CSV");

    BuildCorpusArgs corpus_args;
    auto* corpus = app.add_subcommand("build-corpus",
                                      "Fully train a sampled corpus and record true performance");
    corpus->add_option("--data", corpus_args.data, "Dataset file")->required();
    corpus->add_option("--out", corpus_args.out, "Corpus directory")->required();
    corpus->add_option("--configs", corpus_args.configs, "Number of sampled configs")
        ->capture_default_str();
    corpus->add_option("--seeds", corpus_args.seeds, "Training seeds per config")
        ->capture_default_str();
    corpus->add_option("--epochs", corpus_args.epochs, "Full-training epochs")
        ->capture_default_str();
    corpus->add_option("--batch", corpus_args.batch, "Batch size")->capture_default_str();
    corpus->add_option("--feature-dim", corpus_args.feature_dim, "Feature dimensionality")
        ->capture_default_str();
    corpus->add_option("--space", corpus_args.space_file, "Space JSON (default desk space)");
    corpus->add_option("--workers", corpus_args.workers, "Parallel trainings")
        ->capture_default_str();
    corpus->add_option("--seed", corpus_args.seed, "Sampling master seed")->capture_default_str();

    SearchArgs search_args;
    auto* search = app.add_subcommand("search", "Run a search algorithm over a space or corpus");
    search->add_option("--algo", search_args.algo, "random | hyperband | bohb")->required();
    search->add_option("--metric", search_args.metric, "raw | proxy")->capture_default_str();
    search->add_option("--eta", search_args.eta, "Halving factor")->capture_default_str();
    search->add_option("--max-budget", search_args.max_budget, "Budget R in epochs")
        ->capture_default_str();
    search->add_option("--workers", search_args.workers, "Parallel trial workers")
        ->capture_default_str();
    search->add_option("--seed", search_args.seed, "Master seed")->capture_default_str();
    search->add_option("--pool", search_args.pool, "Pool size (random search)")
        ->capture_default_str();
    search->add_option("--space", search_args.space_file, "Space JSON file");
    search->add_option("--data", search_args.data, "Dataset file (with --space)");
    search->add_option("--corpus", search_args.corpus_dir, "Corpus directory (tabular mode)");
    search->add_option("--out", search_args.out, "Output directory")->required();
    add_proxy_flags(search, search_args.proxy);
    search->add_option("--rho", search_args.rho, "BOHB random fraction")->capture_default_str();
    search->add_option("--min-points", search_args.min_points,
                       "BOHB model threshold (0 = dim + 2)")
        ->capture_default_str();
    search->add_option("--gamma", search_args.gamma, "BOHB good quantile")
        ->capture_default_str();
    search->add_option("--width", search_args.width, "Base hidden width (with --space)")
        ->capture_default_str();
    search->add_option("--feature-dim", search_args.feature_dim, "Feature dimensionality")
        ->capture_default_str();
    search->add_option("--batch", search_args.batch, "Batch size")->capture_default_str();

    RankEvalArgs rank_args;
    auto* rank = app.add_subcommand("rank-eval",
                                    "Estimation error and rank correlation against corpus truth");
    rank->add_option("--corpus", rank_args.corpus_dir, "Corpus directory")->required();
    rank->add_option("--epochs", rank_args.epochs, "Grid of epochs to evaluate")->required();
    rank->add_option("--eval-seeds", rank_args.eval_seeds, "Estimate seeds to average over")
        ->capture_default_str();
    add_proxy_flags(rank, rank_args.proxy);
    rank->add_option("--workers", rank_args.workers, "Parallel readers")->capture_default_str();
    rank->add_option("--out", rank_args.out, "Report CSV path (default <corpus>/ranking.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(gen_args);
        if (train->parsed()) return cmd_train(train_args);
        if (est->parsed()) return cmd_estimate(est_args);
        if (corpus->parsed()) return cmd_build_corpus(corpus_args);
        if (search->parsed()) return cmd_search(search_args);
        if (rank->parsed()) return cmd_rank_eval(rank_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
