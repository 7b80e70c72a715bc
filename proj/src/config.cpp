#include "isaclab/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace isaclab {

namespace {

std::string trim(const std::string& s)
{
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

void check(bool ok, const std::string& what)
{
    if (!ok) {
        throw ConfigError(what);
    }
}

} // namespace

void SystemConfig::validate() const
{
    check(n_tx >= 1 && n_rx >= 1 && n_cu >= 1 && wave_len >= 1, "all counts must be >= 1");
    check(wave_len > n_tx, "wave_len must exceed n_tx");
    check(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
    check(csi_accuracy >= 0.0 && csi_accuracy <= 1.0, "csi_accuracy must lie in [0, 1]");
    check(std::isfinite(snr_s_db) && std::isfinite(snr_c_db), "SNR values must be finite");
    check(cell_radius_km > 0.0, "cell_radius_km must be positive");
    check(noise_power > 0.0, "noise_power must be positive");
    check(cu_range_factor >= 1.0, "cu_range_factor must be >= 1");
}

KeyValues parse_key_values(std::istream& in)
{
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        check(eq != std::string::npos, "line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        check(!key.empty(), "line " + std::to_string(lineno) + ": empty key");
        for (const auto& [k, v] : kv) {
            check(k != key, "duplicate key '" + key + "'");
        }
        kv.emplace_back(std::move(key), std::move(value));
    }
    return kv;
}

KeyValues read_key_values(const std::string& path)
{
    std::ifstream in(path);
    check(static_cast<bool>(in), "cannot open config file '" + path + "'");
    return parse_key_values(in);
}

double parse_double(const std::string& key, const std::string& value)
{
    double out = 0.0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    check(ec == std::errc() && ptr == end && !value.empty(), "key '" + key + "': not a number: '" + value + "'");
    return out;
}

long long parse_int(const std::string& key, const std::string& value)
{
    long long out = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    check(ec == std::errc() && ptr == end && !value.empty(), "key '" + key + "': not an integer: '" + value + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value)
{
    std::uint64_t out = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    check(ec == std::errc() && ptr == end && !value.empty(),
          "key '" + key + "': not an unsigned integer: '" + value + "'");
    return out;
}

std::vector<std::string> split_list(const std::string& value)
{
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value)
{
    std::vector<double> out;
    for (const auto& item : split_list(value)) {
        out.push_back(parse_double(key, item));
    }
    return out;
}

bool apply_system_key(SystemConfig& cfg, const std::string& key, const std::string& value)
{
    auto as_int = [&] { return static_cast<int>(parse_int(key, value)); };
    if (key == "n_tx") cfg.n_tx = as_int();
    else if (key == "n_rx") cfg.n_rx = as_int();
    else if (key == "n_cu") cfg.n_cu = as_int();
    else if (key == "wave_len") cfg.wave_len = as_int();
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "snr_s_db") cfg.snr_s_db = parse_double(key, value);
    else if (key == "snr_c_db") cfg.snr_c_db = parse_double(key, value);
    else if (key == "cell_radius_km") cfg.cell_radius_km = parse_double(key, value);
    else if (key == "noise_power") cfg.noise_power = parse_double(key, value);
    else if (key == "csi_accuracy") cfg.csi_accuracy = parse_double(key, value);
    else if (key == "cu_range_factor") cfg.cu_range_factor = parse_double(key, value);
    else if (key == "seed") cfg.seed = parse_u64(key, value);
    else return false;
    return true;
}

SystemConfig system_config_from(const KeyValues& kv)
{
    SystemConfig cfg;
    for (const auto& [key, value] : kv) {
        check(apply_system_key(cfg, key, value), "unknown config key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

SystemConfig load_system_config(const std::string& path)
{
    return system_config_from(read_key_values(path));
}

void write_system_config(std::ostream& out, const SystemConfig& cfg)
{
    const auto old = out.precision(17);
    out << "n_tx = " << cfg.n_tx << '\n'
        << "n_rx = " << cfg.n_rx << '\n'
        << "n_cu = " << cfg.n_cu << '\n'
        << "wave_len = " << cfg.wave_len << '\n'
        << "alpha = " << cfg.alpha << '\n'
        << "snr_s_db = " << cfg.snr_s_db << '\n'
        << "snr_c_db = " << cfg.snr_c_db << '\n'
        << "cell_radius_km = " << cfg.cell_radius_km << '\n'
        << "noise_power = " << cfg.noise_power << '\n'
        << "csi_accuracy = " << cfg.csi_accuracy << '\n'
        << "cu_range_factor = " << cfg.cu_range_factor << '\n'
        << "seed = " << cfg.seed << '\n';
    out.precision(old);
}

std::optional<std::uint64_t> seed_from_env()
{
    const char* raw = std::getenv("ISACLAB_SEED");
    if (raw == nullptr || *raw == '\0') {
        return std::nullopt;
    }
    return parse_u64("ISACLAB_SEED", raw);
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> cli, std::uint64_t from_config)
{
    if (cli) {
        return *cli;
    }
    if (auto env = seed_from_env()) {
        return *env;
    }
    return from_config;
}

} // namespace isaclab
