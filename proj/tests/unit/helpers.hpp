#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "isaclab/scene.hpp"
#include "isaclab/solvers.hpp"

namespace testutil {

inline isaclab::SystemConfig small_config(int n_tx = 4, int n_rx = 4, int n_cu = 2, int wave_len = 6)
{
    isaclab::SystemConfig cfg;
    cfg.n_tx = n_tx;
    cfg.n_rx = n_rx;
    cfg.n_cu = n_cu;
    cfg.wave_len = wave_len;
    cfg.seed = 11;
    return cfg;
}

/// Scene from explicit parts; derived fields computed the library way.
inline isaclab::Scene hand_scene(const isaclab::CMat& h, const isaclab::RVec& p, const isaclab::RVec& sigma_t,
                                 int wave_len, double sense_power, double noise = 1.0)
{
    using namespace isaclab;
    Scene sc;
    sc.channel = h;
    sc.channel_est = h;
    sc.cu_power = p;
    sc.tcm_eigvals = sigma_t;
    sc.tcm_eigvecs = CMat::Identity(sigma_t.size(), sigma_t.size());
    sc.sense_power = sense_power;
    sc.noise_power = noise;
    sc.wave_len = wave_len;
    sc.interf_eigvals = interference_eigvals(h, p, noise);
    sc.norm_sense = waterfill_ms(sigma_t, sense_power, noise, sc.n_rx(), wave_len).max_rate;
    sc.norm_comm = max_comm_rate(sc);
    return sc;
}

inline double rel_diff(double a, double b)
{
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
        : path_(std::filesystem::temp_directory_path() / ("isaclab_test_" + tag))
    {
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testutil
