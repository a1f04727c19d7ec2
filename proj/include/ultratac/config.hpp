#pragma once

#include <boost/property_tree/ptree.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ultratac {

/// Raised for malformed or out-of-range configuration. The CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// INI-style key/value document (`[section]` headers, `key = value` lines, `;` or `#` comments).
/// Keys inside a section are addressed as "section.key".
class KeyValueConfig {
public:
    KeyValueConfig() = default;

    static KeyValueConfig parse(const std::string& text);
    static KeyValueConfig load(const std::filesystem::path& path);

    bool has(const std::string& key) const;
    std::optional<std::string> find(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    /// Comma-separated list; surrounding whitespace trimmed, empty items dropped.
    std::vector<std::string> get_list(const std::string& key, const std::vector<std::string>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;

    /// Top-level section names in file order.
    std::vector<std::string> sections() const;

    void set(const std::string& key, const std::string& value);
    std::string to_string() const;

private:
    boost::property_tree::ptree tree_;
};

std::string trim(std::string_view s);

/// Shortest decimal representation that round-trips exactly.
std::string format_double(double value);

/// Fixed-point representation with `digits` decimals.
std::string format_fixed(double value, int digits);

double parse_double(std::string_view text, const std::string& what);

}  // namespace ultratac
