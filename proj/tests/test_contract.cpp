#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "esv/contract.hpp"
#include "esv/reference_cases.hpp"

using namespace esv;

namespace {

std::vector<int> steps_of(const std::vector<Action>& actions) {
    std::vector<int> out;
    for (const auto& a : actions) out.push_back(a.steps);
    return out;
}

} // namespace

TEST_CASE("allowed actions for the standard battery") {
    const auto spec = reference::contract_spec(reference::Contract::standard_battery);

    SUBCASE("empty storage cannot release") {
        CHECK(steps_of(allowed_actions(spec, 0.0)) == std::vector<int>{0, 1, 2, 3, 4, 5, 6});
    }
    SUBCASE("mid level sees the full band, market minimum inactive at delta 1") {
        CHECK(steps_of(allowed_actions(spec, 7.0)) ==
              std::vector<int>{-6, -5, -4, -3, -2, -1, 0, 1, 2, 3, 4, 5, 6});
    }
    SUBCASE("full storage cannot charge") {
        const auto acts = steps_of(allowed_actions(spec, 15.0));
        CHECK(std::none_of(acts.begin(), acts.end(), [](int s) { return s > 0; }));
        CHECK(acts == std::vector<int>{-6, -5, -4, -3, -2, -1, 0});
    }
    SUBCASE("off-grid level rejected") {
        CHECK_THROWS_AS(allowed_actions(spec, 7.25), std::invalid_argument);
    }
}

TEST_CASE("penalty-free actions and the rapidity penalty") {
    const auto spec = reference::contract_spec(reference::Contract::standard_battery);

    const auto d = steps_of(penalty_free_actions(spec, 7.0));
    CHECK(d == std::vector<int>{-4, -3, -2, -1, 0, 1, 2, 3, 4});

    CHECK(rapidity_penalty(spec, 7.0, Action{5, 5.0}) == doctest::Approx(-3.0));
    CHECK(rapidity_penalty(spec, 7.0, Action{3, 3.0}) == 0.0);
    CHECK(rapidity_penalty(spec, 7.0, Action{0, 0.0}) == 0.0);
    CHECK_THROWS_AS(rapidity_penalty(spec, 7.0, Action{9, 9.0}), std::invalid_argument);

    SUBCASE("coincident bounds make every admissible action free") {
        auto wide = spec;
        wide.i_min_b = wide.i_min_op;
        wide.i_max_b = wide.i_max_op;
        const auto a = steps_of(allowed_actions(wide, 7.0));
        const auto free = steps_of(penalty_free_actions(wide, 7.0));
        CHECK(a == free);
    }
    SUBCASE("empty storage only has non-negative free actions") {
        const auto free = steps_of(penalty_free_actions(spec, 0.0));
        CHECK(std::none_of(free.begin(), free.end(), [](int s) { return s < 0; }));
    }
}

TEST_CASE("set inclusion and grid closure hold on every level") {
    for (const auto c : {reference::Contract::standard_battery, reference::Contract::car_park,
                         reference::Contract::charging_cost}) {
        const auto spec = reference::contract_spec(c);
        for (int j = 0; j < spec.grid.level_count(); ++j) {
            const double e = spec.grid.level(j);
            const auto a = allowed_actions(spec, e);
            const auto d = penalty_free_actions(spec, e);
            const auto a_steps = steps_of(a);
            // 0 is always present in both sets
            CHECK(std::count(a_steps.begin(), a_steps.end(), 0) == 1);
            for (const auto& act : d) {
                CHECK(std::find(a_steps.begin(), a_steps.end(), act.steps) != a_steps.end());
                CHECK(is_penalty_free(spec, act));
            }
            for (const auto& act : a) {
                const double target = e + act.de;
                CHECK(target >= spec.grid.e_min - 1e-12);
                CHECK(target <= spec.grid.e_max + 1e-12);
                CHECK_NOTHROW(spec.grid.index_of(target));
            }
        }
    }
}

TEST_CASE("payoff") {
    const auto spec = reference::contract_spec(reference::Contract::standard_battery);
    CHECK(payoff(spec, 30.0, Action{-1, -1.0}) == doctest::Approx(30.0));
    CHECK(payoff(spec, 30.0, Action{1, 1.0}) == doctest::Approx(-30.0 / 0.95));
    CHECK(payoff(spec, 30.0, Action{0, 0.0}) == 0.0);

    SUBCASE("positively homogeneous in the price") {
        for (const double lambda : {0.0, 0.5, 2.0, 7.3}) {
            for (const int s : {-3, -1, 0, 2, 6}) {
                const Action a{s, static_cast<double>(s)};
                CHECK(payoff(spec, lambda * 30.0, a) ==
                      doctest::Approx(lambda * payoff(spec, 30.0, a)));
            }
        }
    }
}

TEST_CASE("settlement penalty") {
    SUBCASE("threshold variant (standard battery)") {
        const auto spec = reference::contract_spec(reference::Contract::standard_battery);
        CHECK(settlement_penalty(spec, 6.0) == doctest::Approx(-350.0));
        CHECK(settlement_penalty(spec, 7.0) == 0.0);
        CHECK(settlement_penalty(spec, 15.0) == 0.0);
    }
    SUBCASE("piecewise linear variant (charging cost)") {
        const auto spec = reference::contract_spec(reference::Contract::charging_cost);
        CHECK(settlement_penalty(spec, 12.0) == doctest::Approx(0.0));
        CHECK(settlement_penalty(spec, 9.0) == doctest::Approx(-500.0));
        CHECK(settlement_penalty(spec, 5.0) == doctest::Approx(-2000.0));
        CHECK(settlement_penalty(spec, 6.0) == doctest::Approx(-1000.0));
    }
    SUBCASE("zero-penalty contract") {
        auto spec = reference::contract_spec(reference::Contract::standard_battery);
        spec.settlement = ThresholdConstantPenalty{7.0, 0.0};
        for (int j = 0; j < spec.grid.level_count(); ++j) {
            CHECK(settlement_penalty(spec, spec.grid.level(j)) == 0.0);
        }
    }
    SUBCASE("non-positive and monotone non-decreasing in e") {
        for (const auto c : {reference::Contract::standard_battery,
                             reference::Contract::charging_cost}) {
            const auto spec = reference::contract_spec(c);
            double prev = -1e300;
            for (int j = 0; j < spec.grid.level_count(); ++j) {
                const double q = settlement_penalty(spec, spec.grid.level(j));
                CHECK(q <= 0.0);
                CHECK(q >= prev - 1e-12);
                prev = q;
            }
        }
    }
}

TEST_CASE("spec validation") {
    SUBCASE("bundled contracts validate cleanly") {
        for (const auto c : {reference::Contract::standard_battery,
                             reference::Contract::high_efficiency,
                             reference::Contract::car_park, reference::Contract::charging_cost}) {
            const auto rep = validate_spec(reference::contract_spec(c));
            CHECK(rep.ok());
            REQUIRE(rep.warnings.size() == 1); // inactive market minimum at delta 1
        }
    }
    SUBCASE("violations are reported per field") {
        auto spec = reference::contract_spec(reference::Contract::standard_battery);
        spec.i_max_b = 7.0; // above i_max_op
        spec.eta = 1.5;
        spec.e_start = 7.3;
        const auto rep = validate_spec(spec);
        CHECK_FALSE(rep.ok());
        CHECK(rep.errors.size() == 3);
    }
    SUBCASE("market minimum becomes an active error only through bound ordering") {
        auto spec = reference::contract_spec(reference::Contract::standard_battery);
        spec.i_min_market = 0.2; // must be <= 0
        CHECK_FALSE(validate_spec(spec).ok());
    }
}
