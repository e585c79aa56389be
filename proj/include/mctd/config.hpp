#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// key=value experiment configs with a mandatory version field. Unknown keys
// are rejected so configs cannot silently drift.

namespace mctd {

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Config {
public:
    Config() = default;

    // Parses and validates against the known-key set. '#' starts a comment.
    static Config parse(const std::string& text, const std::set<std::string>& known_keys);
    static Config load(const std::string& path, const std::set<std::string>& known_keys);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback = "") const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<std::uint64_t> get_u64s(const std::string& key,
                                        const std::vector<std::uint64_t>& fallback) const;

    // FNV over the sorted key=value pairs; stable config fingerprint.
    std::string hash() const;

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

// Every key the CLI understands (shared by all subcommands).
const std::set<std::string>& known_config_keys();

}  // namespace mctd
