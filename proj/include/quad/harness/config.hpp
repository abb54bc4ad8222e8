#pragma once

#include <map>
#include <string>
#include <vector>

#include "quad/common.hpp"

namespace quad::harness {

// Flat key=value text config with an explicit schema version. CLI flags
// override file values through set().
class Config {
public:
    static constexpr int kSchemaVersion = 1;

    static Config from_file(const std::string& path);
    static Config empty();

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;
    std::vector<double> get_double_list(const std::string& key, const std::vector<double>& fallback) const;
    std::vector<std::string> get_string_list(const std::string& key, const std::vector<std::string>& fallback) const;

    // Stable "k=v\n" dump in key order; hashed into manifests.
    std::string canonical() const;

private:
    std::map<std::string, std::string> values_;
};

std::vector<std::string> split_list(const std::string& s, char delim = ',');

}  // namespace quad::harness
