#pragma once

#include "fhproxy/search.hpp"

#include <functional>

namespace fhproxy::detail {

using ConfigSource = std::function<Config()>;
using RungObserver = std::function<void(const std::vector<Trial>&, std::span<const size_t>,
                                        uint32_t budget)>;

// Shared bracket/rung driver behind hyperband() and bohb(): only config
// sourcing differs between the two.
SearchResult run_hyperband_loop(const HyperBandConfig& cfg, TrialExecutor& executor,
                                const ConfigSource& next_config, const RungObserver& observe);

SearchResult bohb_impl(std::span<const ParamSpec> space, const BohbConfig& cfg,
                       TrialExecutor& executor, Rng& rng);

} // namespace fhproxy::detail
