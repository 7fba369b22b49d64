#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace solar_ddpg {

// Every error carries a short class name so the CLI can print a
// machine-parsable line without RTTI games.
class Error : public std::runtime_error {
public:
    Error(const char* kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    const char* kind() const noexcept { return kind_; }

private:
    const char* kind_;
};

#define SOLAR_DDPG_ERROR(Name, tag)                                                    \
    class Name : public Error {                                                        \
    public:                                                                            \
        explicit Name(const std::string& what) : Error(tag, what) {}                   \
    }

SOLAR_DDPG_ERROR(FormatError, "format_error");
SOLAR_DDPG_ERROR(ValidationError, "validation_error");
SOLAR_DDPG_ERROR(DuplicateError, "duplicate_error");
SOLAR_DDPG_ERROR(NotFoundError, "not_found");
SOLAR_DDPG_ERROR(DomainError, "domain_error");
SOLAR_DDPG_ERROR(ProtocolError, "protocol_error");
SOLAR_DDPG_ERROR(ContractViolation, "contract_violation");
SOLAR_DDPG_ERROR(ShapeError, "shape_error");
SOLAR_DDPG_ERROR(NumericError, "numeric_error");
SOLAR_DDPG_ERROR(PolicyError, "policy_error");
SOLAR_DDPG_ERROR(ResourceGuardError, "resource_guard");
SOLAR_DDPG_ERROR(IoError, "io_error");

#undef SOLAR_DDPG_ERROR

// Optionally names the offending configuration key as a dotted path.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error("config_error", what) {}
    ConfigError(std::string key_path, const std::string& what)
        : Error("config_error", key_path + ": " + what), key_path_(std::move(key_path)) {}
    const std::string& key_path() const noexcept { return key_path_; }

private:
    std::string key_path_;
};

}  // namespace solar_ddpg
