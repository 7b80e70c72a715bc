#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isaclab/config.hpp"
#include "isaclab/linalg.hpp"
#include "isaclab/parallel.hpp"
#include "isaclab/rng.hpp"

namespace isaclab {

/// One problem instance. Immutable after generation.
struct Scene {
    CMat channel;      ///< true CSI H, n_rx x n_cu
    CMat channel_est;  ///< estimated CSI, equal to `channel` for perfect CSI
    RVec cu_power;     ///< p_k in watts
    RVec tcm_eigvals;  ///< target covariance eigenvalues, descending
    CMat tcm_eigvecs;  ///< unitary, column i pairs with tcm_eigvals[i]
    double sense_power = 0.0;
    RVec interf_eigvals;  ///< eigenvalues of (H diag(p) H^H + noise I)^-1, descending
    double norm_sense = 0.0;
    double norm_comm = 0.0;
    double noise_power = 1.0;
    int wave_len = 1;
    bool use_estimate = false;  ///< features come from channel_est

    int n_tx() const { return static_cast<int>(tcm_eigvals.size()); }
    int n_rx() const { return static_cast<int>(channel.rows()); }
    int n_cu() const { return static_cast<int>(channel.cols()); }
    /// The CSI the network sees.
    const CMat& observed_channel() const { return use_estimate ? channel_est : channel; }
};

/// Linear pathloss for the 128.1 + 37.6 log10(d) model, d in km.
double pathloss_coeff(double d_km);

/// Transmit power that yields `snr_db` through a link of gain `xi_ref`.
double snr_to_power(double snr_db, double xi_ref, double noise);

/// Transmit power budget of the sensing waveform. The target covariance
/// is trace-normalized to n_tx, so the sensing link has unit mean gain and
/// snr_s_db is the per-eigenmode sensing SNR.
double sensing_power(const SystemConfig& cfg);

struct ChannelDraw {
    CMat channel;
    CMat channel_est;
    CMat error;  ///< E in H = sqrt(beta) * Hest + E
    RVec cu_power;
    RVec cu_distance_km;
};

/// Rayleigh channels with distance pathloss and the imperfect-CSI mixing
/// model. The estimation error of user k is CN(0, (1 - beta) xi_k), i.e. the
/// mixing acts on the small-scale fading.
ChannelDraw gen_channel(const SystemConfig& cfg, Rng& rng);

struct TargetCovariance {
    RVec eigvals;
    CMat eigvecs;
};

TargetCovariance gen_tcm(const SystemConfig& cfg, Rng& rng);

/// Eigenvalues of R_H = (H diag(p) H^H + noise I)^-1, descending.
RVec interference_eigvals(const CMat& channel, const RVec& cu_power, double noise);

/// [Re(h_1^T) ... Re(h_K^T), Im(h_1^T) ... Im(h_K^T), sigma_t].
RVec build_features(const Scene& scene);

/// Builds a scene from parts, deriving the interference eigenvalues and
/// both normalizers.
Scene assemble_scene(const SystemConfig& cfg, ChannelDraw channel, TargetCovariance tcm);

Scene generate_scene(const SystemConfig& cfg, Stream ns, std::uint64_t index);

/// FNV-1a over the true channel bytes; used to check train/eval disjointness.
std::uint64_t scene_hash(const Scene& scene);

struct Dataset {
    SystemConfig config;
    std::vector<Scene> samples;
    double val_split = 0.2;

    std::size_t val_count() const;
    std::size_t train_count() const { return samples.size() - val_count(); }
};

Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_samples, Stream ns = Stream::train,
                         Exec exec = Exec::parallel);

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
/// Parses a dataset image. With `verify`, derived quantities (interference
/// eigenvalues and normalizers) are recomputed and must match to 1e-10.
Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes, bool verify = true);

void write_dataset(const std::string& path, const Dataset& ds);
Dataset read_dataset(const std::string& path, bool verify = true);

} // namespace isaclab
