#pragma once

#include <map>
#include <string>
#include <vector>

namespace tdg {

// Minimal TOML subset for flat config files: [tables], key = value with
// strings, integers, floats, booleans, and homogeneous arrays of those.
// Comments (#) and blank lines are skipped. Dotted keys, dates, multiline
// strings and nested tables are not supported.
struct TomlValue {
    enum class Kind { String, Integer, Float, Boolean, Array };
    Kind kind = Kind::String;
    std::string str;
    int64_t integer = 0;
    double number = 0.0;
    bool boolean = false;
    std::vector<TomlValue> array;

    double as_number() const;  // integer or float
};

class TomlTable {
public:
    // keys are "table.key" for entries under [table], bare "key" otherwise
    std::map<std::string, TomlValue> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
};

TomlTable parse_toml_file(const std::string& path);
TomlTable parse_toml(const std::string& text);

}  // namespace tdg
