#include "optsim/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace optsim::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

bool parse_number(const std::string& tok, double& out) {
    const std::string t = trim(tok);
    if (t.empty()) return false;
    char* end = nullptr;
    out = std::strtod(t.c_str(), &end);
    return end == t.c_str() + t.size();
}

Value parse_value(const std::string& raw, const std::string& origin, int line) {
    Value v;
    v.line = line;
    const std::string s = trim(raw);
    if (s.empty()) fail(origin, line, "missing value");

    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"') fail(origin, line, "unterminated string");
        v.kind = Value::Kind::String;
        v.text = s.substr(1, s.size() - 2);
        return v;
    }
    if (s == "true" || s == "false") {
        v.kind = Value::Kind::Bool;
        v.boolean = (s == "true");
        return v;
    }
    if (s.front() == '[') {
        if (s.back() != ']') fail(origin, line, "unterminated array");
        v.kind = Value::Kind::NumberList;
        std::stringstream ss(s.substr(1, s.size() - 2));
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (trim(item).empty()) continue;
            double num = 0.0;
            if (!parse_number(item, num)) fail(origin, line, "bad array element '" + trim(item) + "'");
            v.list.push_back(num);
        }
        return v;
    }
    if (!parse_number(s, v.number)) fail(origin, line, "cannot parse value '" + s + "'");
    v.kind = Value::Kind::Number;
    return v;
}

}  // namespace

Table Table::parse_text(const std::string& text, const std::string& origin) {
    Table t;
    t.origin_ = origin;
    std::istringstream ss(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        // strip comments outside quotes
        bool in_quote = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        const std::string s = trim(line);
        if (s.empty()) continue;

        if (s.front() == '[') {
            if (s.back() != ']') fail(origin, lineno, "unterminated table header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty table name");
            continue;
        }
        const std::size_t eq = s.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        const std::string key = trim(s.substr(0, eq));
        if (key.empty()) fail(origin, lineno, "empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (t.values_.count(full)) fail(origin, lineno, "duplicate key '" + full + "'");
        t.values_[full] = parse_value(s.substr(eq + 1), origin, lineno);
    }
    return t;
}

Table Table::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_text(ss.str(), path);
}

const Value& Table::require(const std::string& key, Value::Kind kind) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    if (it->second.kind != kind)
        throw ConfigError(origin_ + ":" + std::to_string(it->second.line) + ": key '" + key +
                          "' has the wrong type");
    return it->second;
}

double Table::number(const std::string& key) const { return require(key, Value::Kind::Number).number; }

double Table::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

std::string Table::text(const std::string& key) const { return require(key, Value::Kind::String).text; }

std::string Table::text_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? text(key) : fallback;
}

bool Table::boolean_or(const std::string& key, bool fallback) const {
    return has(key) ? require(key, Value::Kind::Bool).boolean : fallback;
}

std::vector<double> Table::number_list(const std::string& key) const {
    return require(key, Value::Kind::NumberList).list;
}

}  // namespace optsim::config
