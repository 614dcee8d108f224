#include "ambc/keyvalue.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ambc/errors.hpp"

namespace ambc {
namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

double parse_double(const std::string& text, const std::string& what) {
    const std::string t = lower(trim(text));
    if (t == "-inf" || t == "-infinity") return -std::numeric_limits<double>::infinity();
    if (t == "inf" || t == "+inf" || t == "infinity") return std::numeric_limits<double>::infinity();
    double v = 0;
    const char* first = t.data();
    if (!t.empty() && t.front() == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || std::isnan(v))
        throw ConfigError(what + ": not a number: '" + text + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
    const std::string t = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(what + ": not a non-negative integer: '" + text + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (!kv.values_.emplace(key, value).second)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

const std::string& KeyValueFile::raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError(origin_ + ": missing key '" + key + "'");
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) const { return raw(key); }

double KeyValueFile::get_double(const std::string& key) const { return parse_double(raw(key), origin_ + ": " + key); }

std::int64_t KeyValueFile::get_int(const std::string& key) const {
    const std::string t = trim(raw(key));
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
        throw ConfigError(origin_ + ": " + key + ": not an integer: '" + t + "'");
    return v;
}

std::uint64_t KeyValueFile::get_u64(const std::string& key) const { return parse_u64(raw(key), origin_ + ": " + key); }

bool KeyValueFile::get_bool(const std::string& key) const {
    const std::string t = lower(trim(raw(key)));
    if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
    if (t == "false" || t == "0" || t == "no" || t == "off") return false;
    throw ConfigError(origin_ + ": " + key + ": not a boolean: '" + t + "'");
}

std::vector<double> KeyValueFile::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(raw(key))) out.push_back(parse_double(item, origin_ + ": " + key));
    return out;
}

std::vector<std::string> KeyValueFile::get_string_list(const std::string& key) const { return split_list(raw(key)); }

void KeyValueFile::reject_unknown(const std::set<std::string>& allowed) const {
    for (const auto& [key, value] : values_)
        if (!allowed.count(key)) throw ConfigError(origin_ + ": unknown key '" + key + "'");
}

}  // namespace ambc
