#include "fhproxy/search.hpp"

#include "fhproxy/errors.hpp"
#include "fhproxy/parallel.hpp"
#include "search_internal.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>

namespace fhproxy {
namespace {

using nlohmann::json;

json value_to_json(const ParamValue& v) {
    if (std::holds_alternative<int64_t>(v)) return std::get<int64_t>(v);
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    return std::get<std::string>(v);
}

ParamValue value_from_json(const json& j) {
    if (j.is_number_integer()) return j.get<int64_t>();
    if (j.is_number_float()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw InvalidInputError("config value must be a number or string");
}

} // namespace

std::string config_to_json(const Config& config) {
    json j = json::object();
    for (const auto& [name, value] : config) j[name] = value_to_json(value);
    return j.dump();
}

Config config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInputError(std::string("config_from_json: ") + e.what());
    }
    if (!j.is_object()) throw InvalidInputError("config_from_json: expected an object");
    Config out;
    for (const auto& [name, value] : j.items()) out[name] = value_from_json(value);
    return out;
}

void ParamSpec::validate() const {
    if (name.empty()) throw InvalidInputError("ParamSpec: empty name");
    switch (kind) {
    case Kind::kCategorical:
        if (choices.size() < 2) throw InvalidInputError("ParamSpec " + name + ": need >= 2 choices");
        break;
    case Kind::kInteger:
        if (ilo >= ihi) throw InvalidInputError("ParamSpec " + name + ": lo must be < hi");
        break;
    case Kind::kContinuous:
        if (!(lo < hi)) throw InvalidInputError("ParamSpec " + name + ": lo must be < hi");
        if (log_scale && !(lo > 0.0))
            throw InvalidInputError("ParamSpec " + name + ": log scale needs lo > 0");
        break;
    }
}

ParamSpec ParamSpec::categorical(std::string name, std::vector<ParamValue> choices) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = Kind::kCategorical;
    p.choices = std::move(choices);
    p.validate();
    return p;
}

ParamSpec ParamSpec::integer(std::string name, int64_t lo, int64_t hi) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = Kind::kInteger;
    p.ilo = lo;
    p.ihi = hi;
    p.validate();
    return p;
}

ParamSpec ParamSpec::continuous(std::string name, double lo, double hi, bool log_scale) {
    ParamSpec p;
    p.name = std::move(name);
    p.kind = Kind::kContinuous;
    p.lo = lo;
    p.hi = hi;
    p.log_scale = log_scale;
    p.validate();
    return p;
}

std::vector<ParamSpec> space_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidInputError(std::string("space_from_json: ") + e.what());
    }
    if (!j.is_array()) throw InvalidInputError("space_from_json: expected an array");

    std::vector<ParamSpec> space;
    for (const auto& item : j) {
        const std::string type = item.at("type").get<std::string>();
        const std::string name = item.at("name").get<std::string>();
        if (type == "categorical") {
            std::vector<ParamValue> choices;
            for (const auto& ch : item.at("choices")) choices.push_back(value_from_json(ch));
            space.push_back(ParamSpec::categorical(name, std::move(choices)));
        } else if (type == "integer") {
            space.push_back(ParamSpec::integer(name, item.at("lo").get<int64_t>(),
                                               item.at("hi").get<int64_t>()));
        } else if (type == "continuous") {
            space.push_back(ParamSpec::continuous(name, item.at("lo").get<double>(),
                                                  item.at("hi").get<double>(),
                                                  item.value("log", false)));
        } else {
            throw InvalidInputError("space_from_json: unknown parameter type " + type);
        }
    }
    if (space.empty()) throw InvalidInputError("space_from_json: empty space");
    return space;
}

std::string space_to_json(std::span<const ParamSpec> space) {
    json arr = json::array();
    for (const ParamSpec& p : space) {
        json item;
        item["name"] = p.name;
        switch (p.kind) {
        case ParamSpec::Kind::kCategorical: {
            item["type"] = "categorical";
            json choices = json::array();
            for (const auto& ch : p.choices) choices.push_back(value_to_json(ch));
            item["choices"] = choices;
            break;
        }
        case ParamSpec::Kind::kInteger:
            item["type"] = "integer";
            item["lo"] = p.ilo;
            item["hi"] = p.ihi;
            break;
        case ParamSpec::Kind::kContinuous:
            item["type"] = "continuous";
            item["lo"] = p.lo;
            item["hi"] = p.hi;
            item["log"] = p.log_scale;
            break;
        }
        arr.push_back(item);
    }
    return arr.dump();
}

Config sample_config(std::span<const ParamSpec> space, Rng& rng) {
    if (space.empty()) throw InvalidInputError("sample_config: empty space");
    Config out;
    for (const ParamSpec& p : space) {
        p.validate();
        switch (p.kind) {
        case ParamSpec::Kind::kCategorical:
            out[p.name] = p.choices[static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(p.choices.size()) - 1))];
            break;
        case ParamSpec::Kind::kInteger:
            out[p.name] = rng.uniform_int(p.ilo, p.ihi);
            break;
        case ParamSpec::Kind::kContinuous:
            if (p.log_scale)
                out[p.name] = std::exp(rng.uniform(std::log(p.lo), std::log(p.hi)));
            else
                out[p.name] = rng.uniform(p.lo, p.hi);
            break;
        }
    }
    return out;
}

void HyperBandConfig::validate() const {
    if (eta < 2) throw InvalidInputError("HyperBandConfig: eta must be >= 2");
    if (max_budget < eta) throw InvalidInputError("HyperBandConfig: max_budget must be >= eta");
    if (workers < 1) throw InvalidInputError("HyperBandConfig: workers must be >= 1");
}

void BohbConfig::validate() const {
    hyperband.validate();
    if (random_fraction < 0.0 || random_fraction > 1.0)
        throw InvalidInputError("BohbConfig: random_fraction must be in [0, 1]");
    if (!(good_quantile > 0.0 && good_quantile < 1.0))
        throw InvalidInputError("BohbConfig: good_quantile must be in (0, 1)");
    if (n_candidates < 1) throw InvalidInputError("BohbConfig: n_candidates must be >= 1");
}

std::vector<BracketSpec> hyperband_schedule(uint32_t max_budget, uint32_t eta) {
    if (eta < 2) throw InvalidInputError("hyperband_schedule: eta must be >= 2");
    if (max_budget < 1) throw InvalidInputError("hyperband_schedule: max_budget must be >= 1");

    uint32_t s_max = 0;
    uint64_t power = 1;
    while (power * eta <= max_budget) {
        power *= eta;
        ++s_max;
    }

    std::vector<BracketSpec> brackets;
    for (uint32_t s = s_max + 1; s-- > 0;) {
        BracketSpec bracket;
        bracket.s = s;
        const double eta_s = std::pow(static_cast<double>(eta), static_cast<double>(s));
        const uint32_t n0 = static_cast<uint32_t>(
            std::ceil(static_cast<double>(s_max + 1) / static_cast<double>(s + 1) * eta_s));
        const double r0 = static_cast<double>(max_budget) / eta_s;

        uint32_t prev_budget = 0;
        for (uint32_t i = 0; i <= s; ++i) {
            RungSpec rung;
            rung.n = static_cast<uint32_t>(
                std::floor(static_cast<double>(n0) /
                           std::pow(static_cast<double>(eta), static_cast<double>(i))));
            if (rung.n == 0) break;
            const auto raw = static_cast<uint32_t>(std::llround(
                r0 * std::pow(static_cast<double>(eta), static_cast<double>(i))));
            rung.budget = std::min(max_budget, std::max({raw, prev_budget + 1, 1u}));
            prev_budget = rung.budget;
            bracket.rungs.push_back(rung);
        }
        brackets.push_back(std::move(bracket));
    }
    return brackets;
}

uint64_t hyperband_total_epochs(std::span<const BracketSpec> brackets) {
    uint64_t total = 0;
    for (const BracketSpec& bracket : brackets) {
        uint32_t prev = 0;
        for (const RungSpec& rung : bracket.rungs) {
            total += static_cast<uint64_t>(rung.n) * (rung.budget - prev);
            prev = rung.budget;
        }
    }
    return total;
}

namespace {

// Runs one rung: every active trial advances to `budget` concurrently.
// Failures mark the trial and the rung continues with survivors.
void run_rung(std::vector<Trial>& trials, std::vector<size_t>& active, uint32_t budget,
              bool want_proxy, TrialExecutor& executor, uint32_t workers,
              uint64_t& epochs_consumed) {
    for (size_t idx : active) {
        epochs_consumed += budget - trials[idx].budget_used;
        trials[idx].status = TrialStatus::kRunning;
    }
    parallel_for(active.size(), workers, [&](size_t i) {
        Trial& t = trials[active[i]];
        try {
            executor.run(t, budget, want_proxy);
            t.status = TrialStatus::kPaused;
        } catch (...) {
            t.status = TrialStatus::kFailed;
        }
    });
    std::erase_if(active, [&](size_t idx) {
        return trials[idx].status == TrialStatus::kFailed;
    });
}

void append_rows(std::vector<SearchReportRow>& rows, const std::vector<Trial>& trials,
                 std::span<const size_t> active, uint32_t bracket, uint32_t rung) {
    for (size_t idx : active) {
        const Trial& t = trials[idx];
        rows.push_back({t.id, config_to_json(t.config), bracket, rung, t.budget_used,
                        t.metric_raw, t.metric_proxy, t.wall_ms});
    }
}

// Keep the best `keep` active trials by metric; ties break toward the older
// (lower) trial id.
void promote(std::vector<Trial>& trials, std::vector<size_t>& active, MetricKind metric,
             size_t keep) {
    std::sort(active.begin(), active.end(), [&](size_t lhs, size_t rhs) {
        const double ml = trials[lhs].metric(metric);
        const double mr = trials[rhs].metric(metric);
        if (ml != mr) return ml > mr;
        return trials[lhs].id < trials[rhs].id;
    });
    if (active.size() > keep) active.resize(keep);
}

Trial pick_winner(const std::vector<Trial>& trials, MetricKind metric, uint32_t final_budget) {
    const Trial* best = nullptr;
    for (const Trial& t : trials) {
        if (t.status == TrialStatus::kFailed || t.budget_used < final_budget) continue;
        if (!best || t.metric(metric) > best->metric(metric) ||
            (t.metric(metric) == best->metric(metric) && t.id < best->id))
            best = &t;
    }
    if (!best) throw SearchError("search: no trial reached the final budget");
    return *best;
}

} // namespace

namespace detail {

SearchResult run_hyperband_loop(const HyperBandConfig& cfg, TrialExecutor& executor,
                                const ConfigSource& next_config, const RungObserver& observe) {
    cfg.validate();
    const bool want_proxy = cfg.metric == MetricKind::kProxy;
    const auto brackets = hyperband_schedule(cfg.max_budget, cfg.eta);

    SearchResult res;
    std::vector<Trial>& trials = res.trials;
    uint32_t next_id = 0;

    for (const BracketSpec& bracket : brackets) {
        std::vector<size_t> active;
        for (uint32_t i = 0; i < bracket.rungs.front().n; ++i) {
            Trial t;
            t.id = next_id++;
            t.config = next_config();
            trials.push_back(std::move(t));
            active.push_back(trials.size() - 1);
        }
        for (size_t r = 0; r < bracket.rungs.size(); ++r) {
            const RungSpec& rung = bracket.rungs[r];
            if (r > 0) promote(trials, active, cfg.metric, rung.n);
            run_rung(trials, active, rung.budget, want_proxy, executor, cfg.workers,
                     res.epochs_consumed);
            append_rows(res.rows, trials, active, bracket.s, static_cast<uint32_t>(r));
            if (observe) observe(trials, active, rung.budget);
        }
        for (size_t idx : active)
            if (trials[idx].budget_used >= cfg.max_budget)
                trials[idx].status = TrialStatus::kDone;
    }

    res.best = pick_winner(trials, cfg.metric, cfg.max_budget);
    return res;
}

} // namespace detail

SearchResult random_search(std::span<const ParamSpec> space, uint32_t pool_size,
                           uint32_t fixed_budget, TrialExecutor& executor, MetricKind metric,
                           uint32_t workers, Rng& rng) {
    if (pool_size < 1) throw InvalidInputError("random_search: pool_size must be >= 1");
    if (fixed_budget < 1) throw InvalidInputError("random_search: fixed_budget must be >= 1");

    Rng sample_rng = rng.fork();
    SearchResult res;
    std::vector<size_t> active;
    for (uint32_t i = 0; i < pool_size; ++i) {
        Trial t;
        t.id = i;
        t.config = sample_config(space, sample_rng);
        res.trials.push_back(std::move(t));
        active.push_back(i);
    }

    run_rung(res.trials, active, fixed_budget, metric == MetricKind::kProxy, executor, workers,
             res.epochs_consumed);
    append_rows(res.rows, res.trials, active, 0, 0);
    for (size_t idx : active) res.trials[idx].status = TrialStatus::kDone;
    res.best = pick_winner(res.trials, metric, fixed_budget);
    return res;
}

SearchResult hyperband(std::span<const ParamSpec> space, const HyperBandConfig& cfg,
                       TrialExecutor& executor, Rng& rng) {
    if (space.empty()) throw InvalidInputError("hyperband: empty space");
    Rng sample_rng = rng.fork();
    return detail::run_hyperband_loop(
        cfg, executor, [&]() { return sample_config(space, sample_rng); }, nullptr);
}

double regret(const Trial& selected, const std::map<std::string, double>& truth) {
    if (truth.empty()) throw InvalidInputError("regret: empty truth table");
    const auto it = truth.find(config_to_json(selected.config));
    if (it == truth.end())
        throw InvalidInputError("regret: config not present in truth table: " +
                                config_to_json(selected.config));
    double best = it->second;
    for (const auto& [key, value] : truth) best = std::max(best, value);
    return best - it->second;
}

SearchResult bohb(std::span<const ParamSpec> space, const BohbConfig& cfg,
                  TrialExecutor& executor, Rng& rng) {
    if (space.empty()) throw InvalidInputError("bohb: empty space");
    cfg.validate();
    return detail::bohb_impl(space, cfg, executor, rng);
}

} // namespace fhproxy
