#pragma once

#include "fhproxy/search.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace fhproxy {

// Density-ratio configuration sampler in the TPE style: observations are
// split at the good_quantile into a "good" and a "bad" set, each modeled by
// a product of per-parameter kernel densities. A proposal draws
// n_candidates configs from the good model and keeps the one maximizing
// good(x) / bad(x).
//
// Kernels:
//   continuous — Gaussian, in log space when the parameter is log-scaled;
//                bandwidth by Silverman's rule (1.06 * sigma * n^-1/5),
//                floored at 1e-3 of the parameter range
//   integer    — treated as continuous, proposals rounded and clamped
//   categorical — Laplace-smoothed frequencies: P(v) = (count(v)+1)/(n+K)
class DensityRatioSampler {
public:
    DensityRatioSampler(std::span<const ParamSpec> space, double good_quantile,
                        uint32_t n_candidates);

    // Fits both models from (config, metric) observations; higher metric is
    // better. Returns false (not ready) until both sets are nonempty.
    bool fit(std::span<const std::pair<Config, double>> observations);

    bool ready() const { return ready_; }

    Config propose(Rng& rng) const;

    // Product density of one config under the good / bad model.
    double good_density(const Config& config) const;
    double bad_density(const Config& config) const;

private:
    struct ParamModel {
        std::vector<double> centers;   // continuous/integer: transformed samples
        double bandwidth = 1.0;
        std::vector<double> cat_probs; // categorical
    };

    double density(const std::vector<ParamModel>& models, const Config& config) const;
    Config sample_from(const std::vector<ParamModel>& models, Rng& rng) const;

    std::vector<ParamSpec> space_;
    double good_quantile_;
    uint32_t n_candidates_;
    bool ready_ = false;
    std::vector<ParamModel> good_, bad_;
};

} // namespace fhproxy
