#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace majoraudit {

// Flat key=value configuration. Files may use `[section]` headers, which
// prefix subsequent keys as "section.key"; `#` and `;` start comments.
// Lookups are exact-key; every getter with a default never throws, typed
// getters throw ConfigError on unparsable values.
class Config {
public:
    Config() = default;

    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get(const std::string& key, const std::string& fallback) const;
    std::string require(const std::string& key) const;

    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // comma-separated list, items trimmed, empty items dropped
    std::vector<std::string> get_list(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;

    // all keys under "prefix." with the prefix stripped, in key order
    std::vector<std::pair<std::string, std::string>> entries_with_prefix(
        const std::string& prefix) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

    // canonical "k=v\n" snapshot in sorted key order; feeds the manifest hash
    std::string snapshot() const;

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace majoraudit
