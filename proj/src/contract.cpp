#include "esv/contract.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace esv {

namespace {

constexpr double kGridTol = 1e-9;

// Integer multiple of delta nearest the bound, biased so that values that are
// exact multiples up to rounding resolve to that multiple.
int floor_steps(double value, double delta) {
    return static_cast<int>(std::floor(value / delta + kGridTol));
}

int ceil_steps(double value, double delta) {
    return static_cast<int>(std::ceil(value / delta - kGridTol));
}

bool is_multiple_of(double value, double delta) {
    const double steps = value / delta;
    return std::abs(steps - std::round(steps)) <= kGridTol * std::max(1.0, std::abs(steps));
}

// Admissible step range on the release side [lo_bound, i_min_market] and the
// charge side [0, hi_bound], intersected with the capacity limits.
std::vector<Action> enumerate_actions(const ContractSpec& spec, double e,
                                      double lo_bound, double hi_bound) {
    const int j = spec.grid.index_of(e);
    const double delta = spec.grid.delta();

    const int cap_lo = -j;
    const int cap_hi = spec.grid.n_levels - j;

    std::vector<Action> out;
    const int rel_lo = std::max(ceil_steps(lo_bound, delta), cap_lo);
    const int rel_hi = std::min(floor_steps(spec.i_min_market, delta), cap_hi);
    for (int s = rel_lo; s <= rel_hi && s < 0; ++s) {
        out.push_back({s, s * delta});
    }
    const int chg_lo = std::max(0, cap_lo);
    const int chg_hi = std::min(floor_steps(hi_bound, delta), cap_hi);
    for (int s = chg_lo; s <= chg_hi; ++s) {
        out.push_back({s, s * delta});
    }
    return out;
}

} // namespace

int EnergyGrid::index_of(double e) const {
    const double pos = (e - e_min) / delta();
    const int j = static_cast<int>(std::lround(pos));
    if (j < 0 || j > n_levels || std::abs(pos - j) > kGridTol * std::max(1.0, std::abs(pos))) {
        throw std::invalid_argument("EnergyGrid: energy " + std::to_string(e) +
                                    " is not a grid level");
    }
    return j;
}

std::vector<Action> allowed_actions(const ContractSpec& spec, double e) {
    return enumerate_actions(spec, e, spec.i_min_op, spec.i_max_op);
}

std::vector<Action> penalty_free_actions(const ContractSpec& spec, double e) {
    return enumerate_actions(spec, e, spec.i_min_b, spec.i_max_b);
}

bool is_penalty_free(const ContractSpec& spec, const Action& a) {
    const double delta = spec.grid.delta();
    if (a.steps == 0) return true;
    if (a.steps > 0) return a.steps <= floor_steps(spec.i_max_b, delta);
    return a.steps >= ceil_steps(spec.i_min_b, delta) &&
           a.steps <= floor_steps(spec.i_min_market, delta);
}

double payoff(const ContractSpec& spec, double s, const Action& a) {
    if (a.steps > 0) return -s / spec.eta * a.de;
    if (a.steps < 0) return -s * a.de;
    return 0.0;
}

double rapidity_penalty(const ContractSpec& spec, double e, const Action& a) {
    const auto actions = allowed_actions(spec, e);
    const bool admissible = std::any_of(actions.begin(), actions.end(),
                                        [&](const Action& x) { return x.steps == a.steps; });
    if (!admissible) {
        throw std::invalid_argument("rapidity_penalty: action " + std::to_string(a.de) +
                                    " is not admissible at level " + std::to_string(e));
    }
    return is_penalty_free(spec, a) ? 0.0 : spec.q_b_value;
}

double settlement_penalty(const ContractSpec& spec, double e) {
    if (const auto* t = std::get_if<ThresholdConstantPenalty>(&spec.settlement)) {
        return e < t->threshold ? t->penalty : 0.0;
    }
    const auto& p = std::get<PiecewiseLinearPenalty>(spec.settlement);
    if (e < p.e_fix) return -p.floor_penalty;
    return -p.slope_penalty * (spec.grid.e_max - e) / (spec.grid.e_max - p.e_fix);
}

ValidationReport validate_spec(const ContractSpec& spec) {
    ValidationReport rep;
    auto fail = [&rep](const std::string& msg) { rep.errors.push_back(msg); };

    if (!(spec.time.maturity > spec.time.t0)) fail("time: maturity must exceed t0");
    if (spec.time.n_exercise < 1) fail("time: n_exercise must be >= 1");
    if (!(spec.grid.e_min < spec.grid.e_max)) fail("grid: e_min must be < e_max");
    if (spec.grid.n_levels < 1) fail("grid: n_levels must be >= 1");
    if (!rep.ok()) return rep;

    const double delta = spec.grid.delta();
    if (!(spec.i_min_op <= spec.i_min_b)) fail("i_min_b: must be >= i_min_op");
    if (!(spec.i_min_b <= spec.i_min_market)) fail("i_min_market: must be >= i_min_b");
    if (!(spec.i_min_market <= 0.0)) fail("i_min_market: must be <= 0");
    if (!(spec.i_max_b >= 0.0)) fail("i_max_b: must be >= 0");
    if (!(spec.i_max_b <= spec.i_max_op)) fail("i_max_op: must be >= i_max_b");
    if (!(spec.eta > 0.0 && spec.eta <= 1.0)) fail("eta: must lie in (0, 1]");
    if (!(spec.q_b_value <= 0.0)) fail("q_b: must be <= 0");

    for (const auto& [name, value] :
         {std::pair<const char*, double>{"i_min_op", spec.i_min_op},
          {"i_max_op", spec.i_max_op},
          {"i_min_b", spec.i_min_b},
          {"i_max_b", spec.i_max_b}}) {
        if (!is_multiple_of(value, delta)) {
            fail(std::string(name) + ": must be an integer multiple of delta");
        }
    }

    if (spec.e_start < spec.grid.e_min - kGridTol || spec.e_start > spec.grid.e_max + kGridTol) {
        fail("e_start: outside [e_min, e_max]");
    } else if (!is_multiple_of(spec.e_start - spec.grid.e_min, delta)) {
        fail("e_start: not on the energy grid");
    }

    if (std::abs(spec.i_min_market) < delta && spec.i_min_market != 0.0) {
        rep.warnings.push_back(
            "i_min_market: |value| < delta, the market-minimum constraint cannot bind "
            "on this grid and is inactive");
    }

    if (const auto* t = std::get_if<ThresholdConstantPenalty>(&spec.settlement)) {
        if (!(t->penalty <= 0.0)) fail("settlement.penalty: must be <= 0");
    } else {
        const auto& p = std::get<PiecewiseLinearPenalty>(spec.settlement);
        if (!(p.e_fix < spec.grid.e_max)) fail("settlement.e_fix: must be < e_max");
        if (!(p.slope_penalty >= 0.0)) fail("settlement.slope_penalty: must be >= 0");
        if (!(p.floor_penalty >= p.slope_penalty)) {
            fail("settlement.floor_penalty: must be >= slope_penalty (monotone penalty)");
        }
    }
    return rep;
}

} // namespace esv
