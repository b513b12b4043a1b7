#include "esv/reference_cases.hpp"

#include <stdexcept>

namespace esv::reference {

ContractSpec contract_spec(Contract c) {
    ContractSpec spec;
    spec.time = TimeGrid{0.0, 1.0, 50};
    spec.i_min_market = -0.1;

    switch (c) {
    case Contract::standard_battery:
    case Contract::high_efficiency:
        spec.grid = EnergyGrid{0.0, 15.0, 15};
        spec.e_start = 7.0;
        spec.i_min_op = -6.0;
        spec.i_max_op = 6.0;
        spec.i_min_b = -4.0;
        spec.i_max_b = 4.0;
        spec.eta = c == Contract::high_efficiency ? 1.0 : 0.95;
        spec.q_b_value = -3.0;
        spec.settlement = ThresholdConstantPenalty{7.0, -350.0};
        break;
    case Contract::car_park:
        spec.grid = EnergyGrid{0.0, 12.0, 12};
        spec.e_start = 6.0;
        spec.i_min_op = -4.0;
        spec.i_max_op = 4.0;
        spec.i_min_b = -3.0;
        spec.i_max_b = 3.0;
        spec.eta = 0.9;
        spec.q_b_value = -10.0;
        spec.settlement = ThresholdConstantPenalty{6.0, -2000.0};
        break;
    case Contract::charging_cost:
        spec.grid = EnergyGrid{0.0, 12.0, 12};
        spec.e_start = 2.0;
        spec.i_min_op = -4.0;
        spec.i_max_op = 4.0;
        spec.i_min_b = -3.0;
        spec.i_max_b = 3.0;
        spec.eta = 0.9;
        spec.q_b_value = -10.0;
        spec.settlement = PiecewiseLinearPenalty{6.0, 1000.0, 2000.0};
        break;
    default:
        throw std::invalid_argument("unknown bundled contract");
    }
    return spec;
}

PriceModel price_model(double sigma) {
    PriceModel model;
    model.map = second_order_map(0.5);
    model.ou = OUParams{0.3, 10.1, sigma, 10.0};
    model.market = MarketParams{0.01};
    return model;
}

const std::vector<ValueEntry>& reference_values() {
    static const std::vector<ValueEntry> table = {
        {Contract::standard_battery, 0.3, 0.0000},
        {Contract::standard_battery, 0.6, 0.0000},
        {Contract::standard_battery, 0.9, 0.0091},
        {Contract::standard_battery, 1.2, 0.1433},
        {Contract::high_efficiency, 0.3, 1.8630},
        {Contract::high_efficiency, 0.6, 3.4641},
        {Contract::high_efficiency, 0.9, 5.2291},
        {Contract::high_efficiency, 1.2, 7.1464},
        {Contract::car_park, 0.3, 0.0000},
        {Contract::car_park, 0.6, 0.0000},
        {Contract::car_park, 0.9, 0.0000},
        {Contract::car_park, 1.2, 0.0004},
        {Contract::charging_cost, 0.3, -331.3160},
        {Contract::charging_cost, 0.6, -330.7742},
        {Contract::charging_cost, 0.9, -330.3782},
        {Contract::charging_cost, 1.2, -330.1442},
    };
    return table;
}

const std::vector<GreeksEntry>& reference_greeks() {
    static const std::vector<GreeksEntry> table = {
        {Contract::standard_battery, 0.6, 0.0000, 0.0001, 0.0000},
        {Contract::high_efficiency, 0.6, 0.1663, 0.8336, 0.3054},
        {Contract::car_park, 0.6, 0.0000, 0.0000, 0.0000},
        {Contract::charging_cost, 0.6, -9.1176, 0.4957, 0.1260},
        {Contract::standard_battery, 1.2, -0.0443, 0.0516, 0.0372},
        {Contract::high_efficiency, 1.2, -0.2294, 0.4055, 0.2934},
        {Contract::car_park, 1.2, -0.0003, 0.0003, 0.0002},
        {Contract::charging_cost, 1.2, -9.3865, 0.3245, 0.1237},
    };
    return table;
}

std::string contract_name(Contract c) {
    switch (c) {
    case Contract::standard_battery: return "contract1-standard-battery";
    case Contract::high_efficiency: return "contract2-high-efficiency";
    case Contract::car_park: return "contract3-car-park";
    case Contract::charging_cost: return "contract4-charging-cost";
    }
    return "unknown";
}

} // namespace esv::reference
