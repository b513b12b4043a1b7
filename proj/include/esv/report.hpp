#pragma once

#include <string>
#include <vector>

#include "esv/config.hpp"
#include "esv/cos_pricer.hpp"
#include "esv/lsmc.hpp"

namespace esv {

/// Creates the directory (and parents) when missing.
void ensure_directory(const std::string& dir);

/// values.csv / valuation.json with per-level t0 values and the start value.
void write_valuation(const std::string& dir, const std::string& format,
                     const ContractSpec& spec, const ValuationResult& result);

/// greeks.csv / greeks.json rows (s, e, delta, gamma, vega).
void write_greeks(const std::string& dir, const std::string& format,
                  const std::vector<GreeksRow>& rows);

/// lsmc.json plus energy_levels.csv and action_usage.csv.
void write_lsmc(const std::string& dir, const std::string& format,
                const ContractSpec& spec, const LsmcResult& result);

/// convergence.csv rows (n_terms, value).
void write_convergence(const std::string& dir,
                       const std::vector<std::pair<int, double>>& rows);

/// coefficients.csv rows (m, e, k, v_k) for every retained date and level.
void write_coefficient_dump(const std::string& dir, const ContractSpec& spec,
                            const CoefficientTable& table);

} // namespace esv
