#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ambc {

/// Flat `key = value` document. Blank lines and `#` comments are ignored.
/// Keys are case-sensitive; duplicate keys are an error.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& text, const std::string& origin = "<string>");
    static KeyValueFile load(const std::filesystem::path& path);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::string& raw(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<double> get_double_list(const std::string& key) const;
    std::vector<std::string> get_string_list(const std::string& key) const;

    /// Throws ConfigError naming the first key not in `allowed`.
    void reject_unknown(const std::set<std::string>& allowed) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
};

/// Parses a real number, accepting `-inf`/`inf`. Throws ConfigError on junk.
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_u64(const std::string& text, const std::string& what);
std::vector<std::string> split_list(const std::string& text);

}  // namespace ambc
