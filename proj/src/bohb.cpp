#include "fhproxy/density_sampler.hpp"
#include "fhproxy/errors.hpp"
#include "fhproxy/search.hpp"
#include "search_internal.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace fhproxy {
namespace {

constexpr double kMinBandwidthFraction = 1e-3;
constexpr double kDensityFloor = 1e-300;

double transform(const ParamSpec& p, double v) {
    return p.kind == ParamSpec::Kind::kContinuous && p.log_scale ? std::log(v) : v;
}

double untransform(const ParamSpec& p, double v) {
    return p.kind == ParamSpec::Kind::kContinuous && p.log_scale ? std::exp(v) : v;
}

double numeric_value(const ParamValue& v) {
    if (std::holds_alternative<int64_t>(v)) return static_cast<double>(std::get<int64_t>(v));
    if (std::holds_alternative<double>(v)) return std::get<double>(v);
    throw InvalidInputError("density sampler: numeric parameter holds a string");
}

size_t choice_index(const ParamSpec& p, const ParamValue& v) {
    for (size_t i = 0; i < p.choices.size(); ++i)
        if (p.choices[i] == v) return i;
    throw InvalidInputError("density sampler: value not among choices of " + p.name);
}

} // namespace

DensityRatioSampler::DensityRatioSampler(std::span<const ParamSpec> space, double good_quantile,
                                         uint32_t n_candidates)
    : space_(space.begin(), space.end()), good_quantile_(good_quantile),
      n_candidates_(n_candidates) {
    if (space_.empty()) throw InvalidInputError("DensityRatioSampler: empty space");
    if (!(good_quantile_ > 0.0 && good_quantile_ < 1.0))
        throw InvalidInputError("DensityRatioSampler: good_quantile must be in (0, 1)");
}

bool DensityRatioSampler::fit(std::span<const std::pair<Config, double>> observations) {
    ready_ = false;
    if (observations.size() < 2) return false;

    std::vector<size_t> order(observations.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (observations[a].second != observations[b].second)
            return observations[a].second > observations[b].second;
        return a < b;
    });

    const size_t n_good = std::max<size_t>(
        1, static_cast<size_t>(std::ceil(good_quantile_ * static_cast<double>(order.size()))));
    if (n_good >= order.size()) return false;

    auto build = [&](std::span<const size_t> members) {
        std::vector<ParamModel> models(space_.size());
        for (size_t pi = 0; pi < space_.size(); ++pi) {
            const ParamSpec& p = space_[pi];
            ParamModel& model = models[pi];
            if (p.kind == ParamSpec::Kind::kCategorical) {
                std::vector<size_t> counts(p.choices.size(), 0);
                for (size_t idx : members)
                    ++counts[choice_index(p, observations[idx].first.at(p.name))];
                model.cat_probs.resize(p.choices.size());
                const double denom =
                    static_cast<double>(members.size() + p.choices.size());
                for (size_t i = 0; i < counts.size(); ++i)
                    model.cat_probs[i] = static_cast<double>(counts[i] + 1) / denom;
            } else {
                for (size_t idx : members)
                    model.centers.push_back(
                        transform(p, numeric_value(observations[idx].first.at(p.name))));
                double mean = 0.0;
                for (double v : model.centers) mean += v;
                mean /= static_cast<double>(model.centers.size());
                double var = 0.0;
                for (double v : model.centers) var += (v - mean) * (v - mean);
                var /= static_cast<double>(model.centers.size());
                const double lo = p.kind == ParamSpec::Kind::kInteger
                                      ? static_cast<double>(p.ilo)
                                      : transform(p, p.lo);
                const double hi = p.kind == ParamSpec::Kind::kInteger
                                      ? static_cast<double>(p.ihi)
                                      : transform(p, p.hi);
                const double min_bw = kMinBandwidthFraction * (hi - lo);
                const double silverman =
                    1.06 * std::sqrt(var) *
                    std::pow(static_cast<double>(model.centers.size()), -0.2);
                model.bandwidth = std::max(silverman, min_bw);
            }
        }
        return models;
    };

    good_ = build(std::span<const size_t>(order.data(), n_good));
    bad_ = build(std::span<const size_t>(order.data() + n_good, order.size() - n_good));
    ready_ = true;
    return true;
}

double DensityRatioSampler::density(const std::vector<ParamModel>& models,
                                    const Config& config) const {
    double product = 1.0;
    for (size_t pi = 0; pi < space_.size(); ++pi) {
        const ParamSpec& p = space_[pi];
        const ParamModel& model = models[pi];
        const auto it = config.find(p.name);
        if (it == config.end())
            throw InvalidInputError("density sampler: config missing parameter " + p.name);
        if (p.kind == ParamSpec::Kind::kCategorical) {
            product *= model.cat_probs[choice_index(p, it->second)];
        } else {
            const double x = transform(p, numeric_value(it->second));
            const double h = model.bandwidth;
            double sum = 0.0;
            for (double center : model.centers) {
                const double z = (x - center) / h;
                sum += std::exp(-0.5 * z * z);
            }
            const double norm =
                static_cast<double>(model.centers.size()) * h * std::sqrt(2.0 * 3.14159265358979323846);
            product *= std::max(sum / norm, kDensityFloor);
        }
    }
    return product;
}

Config DensityRatioSampler::sample_from(const std::vector<ParamModel>& models, Rng& rng) const {
    Config out;
    for (size_t pi = 0; pi < space_.size(); ++pi) {
        const ParamSpec& p = space_[pi];
        const ParamModel& model = models[pi];
        switch (p.kind) {
        case ParamSpec::Kind::kCategorical: {
            double u = rng.uniform();
            size_t pick = model.cat_probs.size() - 1;
            for (size_t i = 0; i < model.cat_probs.size(); ++i) {
                if (u < model.cat_probs[i]) {
                    pick = i;
                    break;
                }
                u -= model.cat_probs[i];
            }
            out[p.name] = p.choices[pick];
            break;
        }
        case ParamSpec::Kind::kInteger: {
            const size_t center_idx = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(model.centers.size()) - 1));
            double v = model.centers[center_idx] + model.bandwidth * rng.normal();
            v = std::clamp(v, static_cast<double>(p.ilo), static_cast<double>(p.ihi));
            out[p.name] = static_cast<int64_t>(std::llround(v));
            break;
        }
        case ParamSpec::Kind::kContinuous: {
            const size_t center_idx = static_cast<size_t>(
                rng.uniform_int(0, static_cast<int64_t>(model.centers.size()) - 1));
            double v = model.centers[center_idx] + model.bandwidth * rng.normal();
            v = std::clamp(v, transform(p, p.lo), transform(p, p.hi));
            out[p.name] = untransform(p, v);
            break;
        }
        }
    }
    return out;
}

Config DensityRatioSampler::propose(Rng& rng) const {
    if (!ready_) throw InvalidInputError("DensityRatioSampler: propose before fit");
    Config best;
    double best_score = -1.0;
    for (uint32_t i = 0; i < n_candidates_; ++i) {
        Config candidate = sample_from(good_, rng);
        const double score =
            good_density(candidate) / std::max(bad_density(candidate), kDensityFloor);
        if (score > best_score) {
            best_score = score;
            best = std::move(candidate);
        }
    }
    return best;
}

double DensityRatioSampler::good_density(const Config& config) const {
    return density(good_, config);
}

double DensityRatioSampler::bad_density(const Config& config) const {
    return density(bad_, config);
}

namespace detail {

SearchResult bohb_impl(std::span<const ParamSpec> space, const BohbConfig& cfg,
                       TrialExecutor& executor, Rng& rng) {
    // Separate streams: uniform sampling consumes exactly the stream plain
    // hyperband would, so the degenerate cases coincide with it.
    Rng sample_rng = rng.fork();
    Rng model_rng = rng.fork();

    const uint32_t min_points = cfg.min_points_in_model == 0
                                    ? static_cast<uint32_t>(space.size()) + 2
                                    : cfg.min_points_in_model;

    // Observations grouped by the budget they were measured at.
    std::map<uint32_t, std::vector<std::pair<Config, double>>> by_budget;
    DensityRatioSampler sampler(space, cfg.good_quantile, cfg.n_candidates);
    bool model_ready = false;

    auto refit = [&]() {
        model_ready = false;
        for (auto it = by_budget.rbegin(); it != by_budget.rend(); ++it) {
            if (it->second.size() >= min_points) {
                model_ready = sampler.fit(it->second);
                return;
            }
        }
    };

    auto observe = [&](const std::vector<Trial>& trials, std::span<const size_t> active,
                       uint32_t budget) {
        auto& obs = by_budget[budget];
        for (size_t idx : active) {
            const Trial& t = trials[idx];
            obs.emplace_back(t.config, t.metric(cfg.hyperband.metric));
        }
        refit();
    };

    auto next_config = [&]() -> Config {
        if (model_ready) {
            if (model_rng.uniform() >= cfg.random_fraction) return sampler.propose(model_rng);
        }
        return sample_config(space, sample_rng);
    };

    return run_hyperband_loop(cfg.hyperband, executor, next_config, observe);
}

} // namespace detail
} // namespace fhproxy
