#include "tdg/io/toml.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tdg {

double TomlValue::as_number() const {
    if (kind == Kind::Integer) return static_cast<double>(integer);
    if (kind == Kind::Float) return number;
    throw std::runtime_error("toml: value is not numeric");
}

std::string TomlTable::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::String)
        throw std::runtime_error("toml: " + key + " is not a string");
    return it->second.str;
}

int64_t TomlTable::get_int(const std::string& key, int64_t fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::Integer)
        throw std::runtime_error("toml: " + key + " is not an integer");
    return it->second.integer;
}

double TomlTable::get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    return it->second.as_number();
}

bool TomlTable::get_bool(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != TomlValue::Kind::Boolean)
        throw std::runtime_error("toml: " + key + " is not a boolean");
    return it->second.boolean;
}

namespace {

std::string strip(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

// removes a trailing comment that is not inside a quoted string
std::string strip_comment(const std::string& s) {
    bool quoted = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') quoted = !quoted;
        if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
}

TomlValue parse_scalar(const std::string& raw, int line_no);

TomlValue parse_value(const std::string& raw, int line_no) {
    std::string v = strip(raw);
    if (v.empty()) throw std::runtime_error("toml: empty value at line " + std::to_string(line_no));
    if (v.front() == '[') {
        if (v.back() != ']')
            throw std::runtime_error("toml: unterminated array at line " + std::to_string(line_no));
        TomlValue out;
        out.kind = TomlValue::Kind::Array;
        std::string inner = v.substr(1, v.size() - 2);
        std::string item;
        bool quoted = false;
        for (char ch : inner) {
            if (ch == '"') quoted = !quoted;
            if (ch == ',' && !quoted) {
                if (!strip(item).empty()) out.array.push_back(parse_scalar(strip(item), line_no));
                item.clear();
            } else {
                item += ch;
            }
        }
        if (!strip(item).empty()) out.array.push_back(parse_scalar(strip(item), line_no));
        return out;
    }
    return parse_scalar(v, line_no);
}

TomlValue parse_scalar(const std::string& v, int line_no) {
    TomlValue out;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') {
        out.kind = TomlValue::Kind::String;
        std::string s;
        for (size_t i = 1; i + 1 < v.size(); ++i) {
            if (v[i] == '\\' && i + 2 < v.size()) {
                ++i;
                switch (v[i]) {
                    case 'n': s += '\n'; break;
                    case 't': s += '\t'; break;
                    case '"': s += '"'; break;
                    case '\\': s += '\\'; break;
                    default:
                        throw std::runtime_error("toml: bad escape at line " +
                                                 std::to_string(line_no));
                }
            } else {
                s += v[i];
            }
        }
        out.str = s;
        return out;
    }
    if (v == "true" || v == "false") {
        out.kind = TomlValue::Kind::Boolean;
        out.boolean = v == "true";
        return out;
    }
    bool looks_float = v.find_first_of(".eE") != std::string::npos &&
                       v.find_first_not_of("+-0123456789.eE_") == std::string::npos;
    std::string digits;
    for (char c : v)
        if (c != '_') digits += c;  // TOML permits underscores in numbers
    try {
        size_t used = 0;
        if (!looks_float) {
            out.kind = TomlValue::Kind::Integer;
            out.integer = std::stoll(digits, &used);
            if (used == digits.size()) return out;
        }
        out.kind = TomlValue::Kind::Float;
        out.number = std::stod(digits, &used);
        if (used != digits.size()) throw std::invalid_argument("trailing");
        return out;
    } catch (const std::exception&) {
        throw std::runtime_error("toml: cannot parse value '" + v + "' at line " +
                                 std::to_string(line_no));
    }
}

}  // namespace

TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string line;
    std::string prefix;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip(strip_comment(line));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw std::runtime_error("toml: bad table header at line " +
                                         std::to_string(line_no));
            prefix = strip(line.substr(1, line.size() - 2));
            if (prefix.empty())
                throw std::runtime_error("toml: empty table name at line " +
                                         std::to_string(line_no));
            prefix += '.';
            continue;
        }
        size_t eq = std::string::npos;
        bool quoted = false;
        for (size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '=' && !quoted) {
                eq = i;
                break;
            }
        }
        if (eq == std::string::npos)
            throw std::runtime_error("toml: expected key = value at line " +
                                     std::to_string(line_no));
        std::string key = strip(line.substr(0, eq));
        if (key.empty())
            throw std::runtime_error("toml: empty key at line " + std::to_string(line_no));
        table.values[prefix + key] = parse_value(line.substr(eq + 1), line_no);
    }
    return table;
}

TomlTable parse_toml_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("toml: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_toml(ss.str());
}

}  // namespace tdg
