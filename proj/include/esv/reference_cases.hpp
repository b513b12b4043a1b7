#pragma once

#include <array>
#include <string>
#include <vector>

#include "esv/contract.hpp"
#include "esv/price_model.hpp"

namespace esv::reference {

/// The four bundled storage contracts: a standard rechargeable battery, the
/// same battery with perfect efficiency, a car park operated as one storage
/// plant, and price-based charging of a car park that must end full.
enum class Contract { standard_battery = 1, high_efficiency = 2, car_park = 3, charging_cost = 4 };

/// Shared schedule and market-minimum settings for all bundled contracts.
ContractSpec contract_spec(Contract c);

/// Second-order map, gamma = 0.5, kappa = 0.3, theta = 10.1, x0 = 10, r = 0.01.
PriceModel price_model(double sigma);

inline constexpr std::array<double, 4> kSigmas = {0.3, 0.6, 0.9, 1.2};

/// Reference contract values (series length 200) per contract and sigma.
struct ValueEntry {
    Contract contract;
    double sigma;
    double value;
};
const std::vector<ValueEntry>& reference_values();

/// Reference initial-time Greeks at sigma = 0.6 and sigma = 1.2.
struct GreeksEntry {
    Contract contract;
    double sigma;
    double delta;
    double gamma;
    double vega;
};
const std::vector<GreeksEntry>& reference_greeks();

std::string contract_name(Contract c);

} // namespace esv::reference
