#pragma once

#include <stdexcept>
#include <string>

namespace qkd {

/// Invalid or inconsistent configuration (bad key, out-of-range value, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Violation of the classical-channel wire protocol or session contract.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// Transport did not deliver data within the configured deadline.
class TimeoutError : public ProtocolError {
public:
    explicit TimeoutError(const std::string& what) : ProtocolError(what) {}
};

/// A statistic whose denominator is empty (QBER of an empty key, false-count
/// rate with no single clicks). Distinct from precondition violations.
class UndefinedStatistic : public std::runtime_error {
public:
    explicit UndefinedStatistic(const std::string& what) : std::runtime_error(what) {}
};

} // namespace qkd
