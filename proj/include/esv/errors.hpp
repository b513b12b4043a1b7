#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace esv {

/// Raised when a computation produces non-finite values or fails to converge.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by configuration parsing and validation; carries field-level messages.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& summary,
                         std::vector<std::string> details = {})
        : std::runtime_error(compose(summary, details)), details_(std::move(details)) {}

    const std::vector<std::string>& details() const noexcept { return details_; }

private:
    static std::string compose(const std::string& summary,
                               const std::vector<std::string>& details) {
        std::string msg = summary;
        for (const auto& d : details) {
            msg += "\n  - " + d;
        }
        return msg;
    }

    std::vector<std::string> details_;
};

} // namespace esv
