#pragma once

#include <map>
#include <string>
#include <vector>

#include "optsim/types.hpp"

namespace optsim::config {

// Minimal structured-text reader: [table] headers, key = value lines,
// values are numbers, "strings", booleans, or arrays of numbers. Comments
// start with '#'. Keys are reported as "table.key".
struct Value {
    enum class Kind { Number, String, Bool, NumberList } kind = Kind::Number;
    double number = 0.0;
    std::string text;
    bool boolean = false;
    std::vector<double> list;
    int line = 0;
};

class Table {
  public:
    static Table parse_file(const std::string& path);
    static Table parse_text(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    std::string text(const std::string& key) const;
    std::string text_or(const std::string& key, const std::string& fallback) const;
    bool boolean_or(const std::string& key, bool fallback) const;
    std::vector<double> number_list(const std::string& key) const;

    const std::map<std::string, Value>& values() const { return values_; }
    const std::string& origin() const { return origin_; }

  private:
    const Value& require(const std::string& key, Value::Kind kind) const;
    std::map<std::string, Value> values_;
    std::string origin_;
};

}  // namespace optsim::config
