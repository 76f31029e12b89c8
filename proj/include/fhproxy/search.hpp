#pragma once

#include "fhproxy/rng.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace fhproxy {

using ParamValue = std::variant<int64_t, double, std::string>;
using Config = std::map<std::string, ParamValue>;

// Canonical JSON text of a config (keys sorted). Used as the identity of a
// configuration in reports and truth tables.
std::string config_to_json(const Config& config);
Config config_from_json(const std::string& text);

struct ParamSpec {
    enum class Kind { kCategorical, kInteger, kContinuous };

    std::string name;
    Kind kind = Kind::kContinuous;
    std::vector<ParamValue> choices; // categorical
    int64_t ilo = 0, ihi = 0;        // integer, inclusive
    double lo = 0.0, hi = 0.0;       // continuous
    bool log_scale = false;

    void validate() const;

    static ParamSpec categorical(std::string name, std::vector<ParamValue> choices);
    static ParamSpec integer(std::string name, int64_t lo, int64_t hi);
    static ParamSpec continuous(std::string name, double lo, double hi, bool log_scale = false);
};

std::vector<ParamSpec> space_from_json(const std::string& text);
std::string space_to_json(std::span<const ParamSpec> space);

// Uniform per parameter; log-uniform where flagged.
Config sample_config(std::span<const ParamSpec> space, Rng& rng);

enum class MetricKind { kRaw, kProxy };
enum class TrialStatus { kPending, kRunning, kPaused, kDone, kFailed };

struct Trial {
    uint32_t id = 0;
    Config config;
    uint32_t budget_used = 0; // epochs, nondecreasing
    std::string history_path;
    double metric_raw = -1.0;   // < 0 means absent
    double metric_proxy = -1.0; // < 0 means absent
    TrialStatus status = TrialStatus::kPending;
    uint64_t wall_ms = 0;

    double metric(MetricKind kind) const {
        return kind == MetricKind::kRaw ? metric_raw : metric_proxy;
    }
};

// Resumable trial runner. run() must advance the trial to `target_budget`
// epochs (continuing from its previous budget), refresh metric_raw, and
// compute metric_proxy when asked. Implementations must tolerate concurrent
// calls for distinct trials.
class TrialExecutor {
public:
    virtual ~TrialExecutor() = default;
    virtual void run(Trial& trial, uint32_t target_budget, bool want_proxy) = 0;
};

struct HyperBandConfig {
    uint32_t max_budget = 60; // R, epochs
    uint32_t eta = 2;
    MetricKind metric = MetricKind::kProxy;
    uint32_t workers = 4;

    void validate() const;
};

struct BohbConfig {
    HyperBandConfig hyperband;
    double random_fraction = 1.0 / 3.0; // rho
    uint32_t min_points_in_model = 0;   // 0 -> space dim + 2
    double good_quantile = 0.15;        // gamma
    uint32_t n_candidates = 24;         // ratio-maximization draws per proposal

    void validate() const;
};

struct RungSpec {
    uint32_t n = 0;      // configs entering the rung
    uint32_t budget = 0; // epochs after the rung
};

struct BracketSpec {
    uint32_t s = 0;
    std::vector<RungSpec> rungs;
};

// Successive-halving brackets for (R, eta): s runs from s_max =
// floor(log_eta(R)) down to 0; bracket s starts ceil((s_max+1)/(s+1) *
// eta^s) configs at budget R*eta^-s and grows budgets by eta per rung.
std::vector<BracketSpec> hyperband_schedule(uint32_t max_budget, uint32_t eta);

// Epochs a full run consumes when promoted trials resume instead of
// retraining: sum over rungs of n * (budget - previous budget).
uint64_t hyperband_total_epochs(std::span<const BracketSpec> brackets);

struct SearchReportRow {
    uint32_t trial_id = 0;
    std::string config_json;
    uint32_t bracket = 0;
    uint32_t rung = 0;
    uint32_t budget = 0;
    double raw_acc = -1.0;
    double proxy_acc = -1.0;
    uint64_t wall_ms = 0;
};

struct SearchResult {
    Trial best;
    std::vector<Trial> trials;
    std::vector<SearchReportRow> rows;
    uint64_t epochs_consumed = 0;
};

// Trains every sampled config to fixed_budget and returns the argmax of the
// chosen metric; ties break toward the lowest trial id.
SearchResult random_search(std::span<const ParamSpec> space, uint32_t pool_size,
                           uint32_t fixed_budget, TrialExecutor& executor, MetricKind metric,
                           uint32_t workers, Rng& rng);

SearchResult hyperband(std::span<const ParamSpec> space, const HyperBandConfig& cfg,
                       TrialExecutor& executor, Rng& rng);

// HyperBand schedule with the sampler replaced by a density-ratio model fit
// on completed trials; falls back to uniform sampling while the model has
// too few points (and with probability random_fraction thereafter).
SearchResult bohb(std::span<const ParamSpec> space, const BohbConfig& cfg,
                  TrialExecutor& executor, Rng& rng);

// true(best in table) - true(selected); selected must be present.
double regret(const Trial& selected, const std::map<std::string, double>& truth);

} // namespace fhproxy
