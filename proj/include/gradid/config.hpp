#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gradid {

// Flat, human-readable key-value configuration with [section] headers.
// Keys address as "section.key"; '#' and ';' start comments. Values may be
// plain numbers or fractions like 8/255.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::string& path);
    static ConfigFile parse_string(const std::string& text, const std::string& origin = "<string>");

    // dotted_key is "section.key"; also used by CLI --set overrides.
    void set(const std::string& dotted_key, const std::string& value);
    bool has(const std::string& dotted_key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<std::size_t> get_size_list(const std::string& key,
                                           const std::vector<std::size_t>& fallback) const;
    // Absent key or empty value -> nullopt.
    std::optional<std::size_t> get_optional_size(const std::string& key,
                                                 std::optional<std::size_t> fallback) const;

    const std::map<std::string, std::string>& values() const { return values_; }

    // Keys present in the file but not in `known` raise ConfigError; catches
    // typos before they silently change an experiment.
    void require_known_keys(const std::vector<std::string>& known) const;

private:
    std::map<std::string, std::string> values_;
};

double parse_double_or_fraction(const std::string& text, const std::string& key);

}  // namespace gradid
