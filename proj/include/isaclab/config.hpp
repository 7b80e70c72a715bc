#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace isaclab {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Scalar scene/problem parameters. Defaults are the full-scale simulation
/// setting (16x16 antennas, 5 users, 200 m cell, L = 20).
struct SystemConfig {
    int n_tx = 16;
    int n_rx = 16;
    int n_cu = 5;
    int wave_len = 20;
    double alpha = 0.5;
    double snr_s_db = 10.0;
    double snr_c_db = 0.0;
    double cell_radius_km = 0.2;
    double noise_power = 1.0;
    double csi_accuracy = 1.0;
    /// Users are placed uniformly in [d0, cu_range_factor * d0].
    double cu_range_factor = 1.25;
    std::uint64_t seed = 1;

    int feature_len() const { return 2 * n_rx * n_cu + n_tx; }
    void validate() const;
};

/// Ordered `key = value` pairs; `#` starts a comment.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

KeyValues parse_key_values(std::istream& in);
KeyValues read_key_values(const std::string& path);

double parse_double(const std::string& key, const std::string& value);
long long parse_int(const std::string& key, const std::string& value);
std::uint64_t parse_u64(const std::string& key, const std::string& value);
std::vector<double> parse_double_list(const std::string& key, const std::string& value);
std::vector<std::string> split_list(const std::string& value);

/// Applies one key to the config; returns false when the key is not a
/// system key.
bool apply_system_key(SystemConfig& cfg, const std::string& key, const std::string& value);

/// Builds a config from pairs, rejecting unknown keys.
SystemConfig system_config_from(const KeyValues& kv);
SystemConfig load_system_config(const std::string& path);

void write_system_config(std::ostream& out, const SystemConfig& cfg);

/// ISACLAB_SEED, if set and parseable.
std::optional<std::uint64_t> seed_from_env();

/// Precedence: command-line flag, then environment, then config file.
std::uint64_t resolve_seed(std::optional<std::uint64_t> cli, std::uint64_t from_config);

} // namespace isaclab
