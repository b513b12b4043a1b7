#pragma once

#include <string>
#include <variant>
#include <vector>

namespace esv {

/// Evenly spaced exercise schedule t_m = t0 + m dt, m = 0..M, with the
/// settlement date one step after maturity.
struct TimeGrid {
    double t0 = 0.0;
    double maturity = 1.0;
    int n_exercise = 50; ///< M

    double dt() const { return (maturity - t0) / n_exercise; }
    double settlement() const { return maturity + dt(); }
    double time_at(int m) const { return t0 + m * dt(); } ///< m = 0..M+1
};

/// Storage capacity discretized into n_levels equal intervals of width
/// delta = (e_max - e_min) / n_levels; the grid holds n_levels + 1 points.
struct EnergyGrid {
    double e_min = 0.0;
    double e_max = 0.0;
    int n_levels = 0; ///< number of intervals

    double delta() const { return (e_max - e_min) / n_levels; }
    int level_count() const { return n_levels + 1; }
    double level(int j) const { return e_min + j * delta(); }

    /// Grid index of an energy value; throws std::invalid_argument when the
    /// value is not a grid point.
    int index_of(double e) const;
};

/// Settlement charge of `penalty` (<= 0) when the final level is strictly
/// below `threshold`, zero otherwise.
struct ThresholdConstantPenalty {
    double threshold = 0.0;
    double penalty = 0.0;
    bool operator==(const ThresholdConstantPenalty&) const = default;
};

/// Settlement charge -slope_penalty * (e_max - e) / (e_max - e_fix) for
/// e >= e_fix, and -floor_penalty below e_fix.
struct PiecewiseLinearPenalty {
    double e_fix = 0.0;
    double slope_penalty = 0.0; ///< magnitude, >= 0
    double floor_penalty = 0.0; ///< magnitude, >= slope_penalty
    bool operator==(const PiecewiseLinearPenalty&) const = default;
};

using SettlementPenalty =
    std::variant<ThresholdConstantPenalty, PiecewiseLinearPenalty>;

/// An admissible change of the stored energy level: de = steps * delta.
struct Action {
    int steps = 0;
    double de = 0.0;
};

/// Full storage-contract description: schedule, capacity grid, rate limits,
/// efficiency and penalty terms.
struct ContractSpec {
    TimeGrid time;
    EnergyGrid grid;
    double e_start = 0.0;      ///< energy in storage at t0
    double i_min_op = 0.0;     ///< largest release per step (<= 0)
    double i_max_op = 0.0;     ///< largest charge per step (>= 0)
    double i_min_market = 0.0; ///< required minimum release, in [i_min_op, 0]
    double i_min_b = 0.0;      ///< penalty-free release bound
    double i_max_b = 0.0;      ///< penalty-free charge bound
    double eta = 1.0;          ///< storage efficiency in (0, 1]
    double q_b_value = 0.0;    ///< rapidity penalty (<= 0) for actions outside the free band
    SettlementPenalty settlement = ThresholdConstantPenalty{};
};

/// All admissible actions at level e: integer multiples of delta keeping
/// e + de within capacity and de within [i_min_op, i_min_market] u [0, i_max_op].
/// Ascending in de; always contains 0. Throws for off-grid e.
std::vector<Action> allowed_actions(const ContractSpec& spec, double e);

/// The penalty-free subset, with the band [i_min_b, i_min_market] u [0, i_max_b].
std::vector<Action> penalty_free_actions(const ContractSpec& spec, double e);

/// Whether an admissible action avoids the rapidity penalty.
bool is_penalty_free(const ContractSpec& spec, const Action& a);

/// Cash flow of an action at spot price s: -s/eta * de when charging,
/// -s * de when releasing (a positive amount), 0 for inaction.
double payoff(const ContractSpec& spec, double s, const Action& a);

/// q_b applied to actions in A \ D; throws std::invalid_argument when the
/// action is not admissible at level e.
double rapidity_penalty(const ContractSpec& spec, double e, const Action& a);

/// Settlement-date charge for final level e (always <= 0).
double settlement_penalty(const ContractSpec& spec, double e);

struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    bool ok() const { return errors.empty(); }
};

/// Checks every structural invariant of the contract. A market minimum
/// smaller in magnitude than delta cannot bind on the grid and is reported
/// as a warning, not an error.
ValidationReport validate_spec(const ContractSpec& spec);

} // namespace esv
