#pragma once

#include <stdexcept>
#include <string>

namespace oscstab {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainViolation : Error {
    explicit DomainViolation(const std::string& msg) : Error(msg) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& msg) : Error(msg) {}
};

/// Controllability matrix numerically singular at the queried point.
struct RankDeficient : Error {
    explicit RankDeficient(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct SearchExhausted : Error {
    explicit SearchExhausted(const std::string& msg) : Error(msg) {}
};

struct UnsupportedSpec : Error {
    explicit UnsupportedSpec(const std::string& msg) : Error(msg) {}
};

struct QuadratureBudgetExceeded : Error {
    explicit QuadratureBudgetExceeded(const std::string& msg) : Error(msg) {}
};

struct NonFinite : Error {
    explicit NonFinite(const std::string& msg) : Error(msg) {}
};

struct ZeroState : Error {
    explicit ZeroState(const std::string& msg) : Error(msg) {}
};

}  // namespace oscstab
