#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xfrl/error.hpp"

namespace xfrl::cfg {

// One parsed `key = value` line. The line number feeds every diagnostic.
struct Entry {
    std::string value;
    std::size_t line = 0;
};

// Flat view of an INI-style file: keys are stored as "section.key".
// Parsing is fail-closed: unknown sections/keys, duplicate keys, and
// malformed lines are errors, each reported with its line number.
struct Config {
    std::filesystem::path origin;    // the config file itself, for diagnostics
    std::filesystem::path base_dir;  // directory of the config file; relative paths resolve against it
    std::map<std::string, Entry> entries;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    // Typed getters. The *_or forms supply a default when the key is absent;
    // the plain forms throw config_error naming the missing key.
    std::string get_str(const std::string& key) const;
    std::string get_str_or(const std::string& key, const std::string& dflt) const;
    long get_int(const std::string& key) const;
    long get_int_or(const std::string& key, long dflt) const;
    double get_double(const std::string& key) const;
    double get_double_or(const std::string& key, double dflt) const;
    bool get_bool_or(const std::string& key, bool dflt) const;
    std::vector<double> get_doubles(const std::string& key) const;  // comma-separated
    std::vector<long> get_ints(const std::string& key) const;       // comma-separated
    std::vector<std::string> get_strs(const std::string& key) const;
    // Path values resolve relative to the config file's directory.
    std::filesystem::path get_path(const std::string& key) const;
};

// Keys the parser accepts, grouped by section. Anything else is rejected.
const std::map<std::string, std::vector<std::string>>& known_keys();

Config parse_config_text(const std::string& text, const std::filesystem::path& origin);
Config load_config(const std::filesystem::path& path);

}  // namespace xfrl::cfg
