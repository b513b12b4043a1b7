#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "esv/contract.hpp"
#include "esv/price_model.hpp"

namespace esv {

struct LsmcConfig {
    std::size_t n_paths = 25000;
    int n_runs = 10;
    int basis_degree = 3;    ///< regression polynomial degree in the spot price
    std::uint64_t seed = 1;
    int threads = 1;         ///< concurrent outer runs
    bool collect_policy = true;
    bool out_of_sample = false; ///< extra diagnostic value on a fresh path set
};

/// Per-time energy-level distribution and action usage, pooled over all
/// trajectories of all runs. band_low/band_high delimit mean +- 1.96 sd of
/// the level distribution; se is the standard error of the mean.
struct PolicyStatistics {
    std::vector<double> times; // t_0 .. t_{M+1}
    std::vector<double> mean_energy;
    std::vector<double> band_low;
    std::vector<double> band_high;
    std::vector<double> se;
    std::vector<double> min_energy;
    std::vector<double> max_energy;
    /// Per exercise date m = 1..M: count of each chosen action (in steps).
    std::vector<std::map<int, std::uint64_t>> action_counts;
    std::size_t n_trajectories = 0;
    /// Fraction of trajectories ending at the top capacity level.
    double fraction_full_at_settlement = 0.0;
};

struct LsmcRun {
    double value = 0.0;                   ///< estimate at e_start
    std::vector<double> values_per_level; ///< estimates for every starting level
    bool regression_fallback = false;     ///< degenerate regressor handled by a lower degree
    double out_of_sample_value = 0.0;     ///< valid when requested
    bool has_out_of_sample = false;
};

struct LsmcResult {
    double value_mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::vector<double> run_values;
    PolicyStatistics policy;
    bool regression_fallback = false;
    double out_of_sample_mean = 0.0;
    bool has_out_of_sample = false;
};

/// One regression-based valuation run: simulate n_paths spot paths, fit a
/// per-level polynomial continuation regression backward in time, pick the
/// cash-flow-maximizing actions and accumulate realized discounted cash
/// flows. `policy` (optional) collects the replayed trajectory statistics.
LsmcRun lsmc_value(const ContractSpec& spec, const PriceModel& model,
                   const LsmcConfig& config, std::uint64_t run_seed,
                   PolicyStatistics* policy = nullptr);

/// 95% interval mean +- 1.96 sd / sqrt(n) over independent run values.
/// Throws std::invalid_argument for fewer than two runs.
std::pair<double, double> confidence_interval(std::span<const double> run_values);

/// n_runs independent valuations with derived seeds, the confidence interval
/// of the mean, and pooled policy statistics.
LsmcResult lsmc_estimate(const ContractSpec& spec, const PriceModel& model,
                         const LsmcConfig& config);

} // namespace esv
