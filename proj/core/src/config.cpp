#include "flocode/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace flocode {

namespace {

std::string trim(const std::string& s) {
    size_t begin = 0;
    size_t end = s.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
    return s.substr(begin, end - begin);
}

bool valid_key(const std::string& key) {
    if (key.empty()) return false;
    for (char c : key) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
        if (!ok) return false;
    }
    return key.front() != '.' && key.back() != '.';
}

[[noreturn]] void fail_line(int line, const std::string& what) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

}  // namespace

KvConfig KvConfig::parse_text(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        size_t hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) fail_line(line_no, "expected `key = value`, got `" + trim(raw) + "`");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!valid_key(key)) fail_line(line_no, "invalid key `" + key + "`");
        if (value.empty()) fail_line(line_no, "empty value for key `" + key + "`");
        if (cfg.has(key)) fail_line(line_no, "duplicate key `" + key + "`");
        cfg.values_[key] = value;
    }
    return cfg;
}

KvConfig KvConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str());
}

void KvConfig::set(const std::string& key, const std::string& value) {
    if (!valid_key(key)) throw std::invalid_argument("invalid config key: " + key);
    std::string v = trim(value);
    if (v.empty()) throw std::invalid_argument("empty value for config key: " + key);
    values_[key] = v;
}

void KvConfig::set_int(const std::string& key, long value) { set(key, std::to_string(value)); }

void KvConfig::set_double(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    set(key, buf);
}

void KvConfig::set_bool(const std::string& key, bool value) { set(key, value ? "true" : "false"); }

bool KvConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::vector<std::string> KvConfig::keys() const {
    std::vector<std::string> out;
    out.reserve(values_.size());
    for (const auto& [k, v] : values_) out.push_back(k);
    return out;
}

std::optional<std::string> KvConfig::find(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
}

std::string KvConfig::get_string(const std::string& key) const {
    auto v = find(key);
    if (!v) throw std::invalid_argument("missing config key: " + key);
    return *v;
}

long KvConfig::get_int(const std::string& key) const {
    std::string v = get_string(key);
    size_t consumed = 0;
    long out;
    try {
        out = std::stol(v, &consumed);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": `" + v + "` is not an integer");
    }
    if (consumed != v.size())
        throw std::invalid_argument("config key " + key + ": `" + v + "` is not an integer");
    return out;
}

double KvConfig::get_double(const std::string& key) const {
    std::string v = get_string(key);
    size_t consumed = 0;
    double out;
    try {
        out = std::stod(v, &consumed);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": `" + v + "` is not a number");
    }
    if (consumed != v.size() || !std::isfinite(out))
        throw std::invalid_argument("config key " + key + ": `" + v + "` is not a finite number");
    return out;
}

bool KvConfig::get_bool(const std::string& key) const {
    std::string v = get_string(key);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config key " + key + ": `" + v + "` is not a boolean (true/false/1/0)");
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}

long KvConfig::get_int(const std::string& key, long fallback) const {
    return has(key) ? get_int(key) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

void KvConfig::merge_overrides(const KvConfig& overrides) {
    for (const auto& [k, v] : overrides.values_) values_[k] = v;
}

std::string KvConfig::serialize() const {
    std::ostringstream out;
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

void KvConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config file: " + path);
    out << serialize();
    if (!out) throw std::runtime_error("failed writing config file: " + path);
}

uint64_t KvConfig::hash() const {
    const std::string text = serialize();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace flocode
