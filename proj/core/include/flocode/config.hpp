#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flocode {

/// Flat configuration document: dotted keys mapped to string values, parsed
/// from `key = value` lines (`#` starts a comment). Values keep their text
/// form; typed getters parse on access and reject trailing garbage. Keys
/// serialize in sorted order so equal configs produce identical text and
/// therefore identical hashes.
class KvConfig {
public:
    static KvConfig parse_text(const std::string& text);
    static KvConfig parse_file(const std::string& path);

    void set(const std::string& key, const std::string& value);
    void set_int(const std::string& key, long value);
    void set_double(const std::string& key, double value);
    void set_bool(const std::string& key, bool value);

    bool has(const std::string& key) const;
    std::vector<std::string> keys() const;
    size_t size() const { return values_.size(); }

    // Required getters throw when the key is absent or malformed.
    std::string get_string(const std::string& key) const;
    long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // Defaulted getters fall back when the key is absent (still throw on
    // malformed values: a typo should never silently select a default).
    std::string get_string(const std::string& key, const std::string& fallback) const;
    long get_int(const std::string& key, long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Applies every entry of `overrides` on top of this config.
    void merge_overrides(const KvConfig& overrides);

    /// Sorted `key = value` lines; parse_text(serialize()) round-trips.
    std::string serialize() const;
    void write_file(const std::string& path) const;

    /// FNV-1a over the serialized form; stable across runs and platforms.
    uint64_t hash() const;

    bool operator==(const KvConfig& other) const { return values_ == other.values_; }

private:
    std::optional<std::string> find(const std::string& key) const;
    std::map<std::string, std::string> values_;
};

}  // namespace flocode
