#pragma once

#include <cstdint>
#include <string>

#include "esv/contract.hpp"
#include "esv/cos_pricer.hpp"
#include "esv/lsmc.hpp"
#include "esv/price_model.hpp"

namespace esv {

struct OutputConfig {
    std::string dir = "out";
    std::string format = "csv"; // csv | json
};

/// Everything a run needs: price model, contract, both engine settings and
/// the output sink.
struct RunConfig {
    PriceModel model;
    ContractSpec contract;
    CosConfig cos;
    LsmcConfig lsmc;
    OutputConfig output;
};

/// Parses the sectioned key = value configuration format. Unknown sections or
/// keys, missing required fields and invariant violations raise ConfigError
/// with one message per offending field.
RunConfig parse_run_config(const std::string& text);

/// Reads and parses a configuration file.
RunConfig load_run_config(const std::string& path);

/// Serializes a RunConfig back to the configuration format.
std::string format_run_config(const RunConfig& config);

} // namespace esv
