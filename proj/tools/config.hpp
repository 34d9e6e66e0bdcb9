#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pderm::cli {

/// Bad, missing or unknown configuration entries.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Section = std::map<std::string, std::string>;

/**
 * Flat INI configuration with sections [dgp], [rule], [erm], [study] and
 * [output]. Values are stored in canonical text form (shortest round-trip
 * doubles, comma-separated lists), so a resolved config written with to_ini()
 * parses back to an identical object.
 */
struct RunConfig {
    std::map<std::string, Section> sections;

    bool has(const std::string& section, const std::string& key) const;
    /// Throws ConfigError "missing required key [section] key".
    const std::string& text(const std::string& section, const std::string& key) const;
    double real(const std::string& section, const std::string& key) const;
    std::uint64_t u64(const std::string& section, const std::string& key) const;
    std::size_t size(const std::string& section, const std::string& key) const;
    bool flag(const std::string& section, const std::string& key) const;
    std::vector<double> reals(const std::string& section, const std::string& key) const;
    std::vector<std::size_t> sizes(const std::string& section, const std::string& key) const;

    std::string to_ini() const;

    bool operator==(const RunConfig&) const = default;
};

/// Shortest decimal text that reads back to exactly `x`.
std::string format_double(double x);

/// Strict parse: unknown sections or keys, duplicates and malformed values are errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& file);

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
};

/// Commands understood by resolve() and the tool.
const std::vector<std::string>& commands();

/**
 * Apply overrides, check the keys `command` requires and fill in every
 * default, so the result names every parameter the run uses.
 */
RunConfig resolve(RunConfig cfg, const std::string& command, const Overrides& overrides = {});

}  // namespace pderm::cli
