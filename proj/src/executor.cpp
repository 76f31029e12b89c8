#include "fhproxy/executor.hpp"

#include "fhproxy/errors.hpp"

#include <chrono>
#include <string>

namespace fhproxy {

void apply_config(const Config& config, ModelSpec& model, TrainConfig& train) {
    for (const auto& [key, value] : config) {
        if (key == "width") {
            const int64_t w = std::holds_alternative<int64_t>(value)
                                  ? std::get<int64_t>(value)
                                  : static_cast<int64_t>(std::get<double>(value));
            if (w < 1) throw InvalidInputError("apply_config: width must be >= 1");
            model.hidden_dims = {static_cast<uint32_t>(w)};
        } else if (key == "lr0") {
            const double lr = std::holds_alternative<double>(value)
                                  ? std::get<double>(value)
                                  : static_cast<double>(std::get<int64_t>(value));
            if (!(lr > 0.0)) throw InvalidInputError("apply_config: lr0 must be > 0");
            train.lr0 = lr;
            train.sgd.learning_rate = static_cast<float>(lr);
        } else if (key == "weight_decay") {
            const double wd = std::holds_alternative<double>(value)
                                  ? std::get<double>(value)
                                  : static_cast<double>(std::get<int64_t>(value));
            if (wd < 0.0) throw InvalidInputError("apply_config: weight_decay must be >= 0");
            train.sgd.weight_decay = static_cast<float>(wd);
        } else {
            throw InvalidInputError("apply_config: unknown parameter " + key);
        }
    }
}

TrainerExecutor::TrainerExecutor(const Dataset& data, Options opts)
    : data_(data), opts_(std::move(opts)) {
    std::filesystem::create_directories(opts_.work_dir);
}

uint64_t TrainerExecutor::trial_seed(uint32_t trial_id) const {
    return Rng::mix(opts_.master_seed, trial_id);
}

Config TrainerExecutor::resolve(const Config& config) const {
    if (!opts_.config_table) return config;
    const auto it = config.find("entry");
    if (it == config.end() || !std::holds_alternative<int64_t>(it->second))
        throw InvalidInputError("TrainerExecutor: tabular mode requires an integer 'entry'");
    const int64_t idx = std::get<int64_t>(it->second);
    if (idx < 0 || static_cast<size_t>(idx) >= opts_.config_table->size())
        throw InvalidInputError("TrainerExecutor: entry index out of range");
    return (*opts_.config_table)[static_cast<size_t>(idx)];
}

void TrainerExecutor::run(Trial& trial, uint32_t target_budget, bool want_proxy) {
    if (target_budget < trial.budget_used)
        throw InvalidInputError("TrainerExecutor: budget must not shrink");
    if (target_budget > opts_.max_budget)
        throw InvalidInputError("TrainerExecutor: budget beyond max_budget");

    const auto t0 = std::chrono::steady_clock::now();
    const auto fhst_path = opts_.work_dir / ("trial_" + std::to_string(trial.id) + ".fhst");
    const auto state_path = opts_.work_dir / ("trial_" + std::to_string(trial.id) + ".state");

    ModelSpec model = opts_.base_model;
    TrainConfig cfg = opts_.base_train;
    apply_config(resolve(trial.config), model, cfg);
    cfg.epochs = target_budget;
    cfg.schedule_epochs = opts_.max_budget;
    cfg.seed = trial_seed(trial.id);

    Trainer trainer =
        trial.budget_used == 0
            ? Trainer(model, data_, cfg)
            : Trainer(load_state(state_path), data_, read_history(fhst_path));
    trainer.run_to_epoch(target_budget);

    write_history(fhst_path, trainer.history());
    save_state(state_path, trainer.state());

    const FeatureHistory& history = trainer.history();
    const uint32_t prev_budget = trial.budget_used;
    trial.budget_used = target_budget;
    trial.history_path = fhst_path.string();
    trial.metric_raw = static_cast<double>(history.epochs.back().raw_val_accuracy);
    epochs_consumed_ += target_budget - prev_budget;

    double estimate_ms = 0.0;
    if (want_proxy) {
        ProxyConfig pcfg = opts_.proxy;
        pcfg.k = std::min(pcfg.k, target_budget);
        Rng est_rng(Rng::mix(trial_seed(trial.id), 0xE57AC0DEULL ^ target_budget));
        const auto e0 = std::chrono::steady_clock::now();
        trial.metric_proxy = estimate(history, target_budget, pcfg, est_rng).accuracy;
        const auto e1 = std::chrono::steady_clock::now();
        estimate_ms = std::chrono::duration<double, std::milli>(e1 - e0).count();
    }

    const auto t1 = std::chrono::steady_clock::now();
    trial.wall_ms += static_cast<uint64_t>(
        std::chrono::duration<double, std::milli>(t1 - t0).count());

    {
        std::lock_guard<std::mutex> lock(stats_mutex_);
        epoch_wall_ms_ += trainer.mean_epoch_wall_ms() * (target_budget - prev_budget);
        epoch_wall_count_ += target_budget - prev_budget;
        if (want_proxy) {
            estimate_wall_ms_ += estimate_ms;
            ++estimate_count_;
        }
    }
}

double TrainerExecutor::mean_epoch_wall_ms() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return epoch_wall_count_ == 0 ? 0.0 : epoch_wall_ms_ / static_cast<double>(epoch_wall_count_);
}

double TrainerExecutor::mean_estimate_wall_ms() const {
    std::lock_guard<std::mutex> lock(stats_mutex_);
    return estimate_count_ == 0 ? 0.0
                                : estimate_wall_ms_ / static_cast<double>(estimate_count_);
}

} // namespace fhproxy
