#pragma once

#include "esv/ou_process.hpp"
#include "esv/polynomial_map.hpp"

namespace esv {

/// The structural spot-price model S_t = Phi(X_t) with X an OU process,
/// plus the discounting rate.
struct PriceModel {
    PolynomialMap map;
    OUParams ou;
    MarketParams market;

    double spot0() const { return map(ou.x0); }
};

} // namespace esv
