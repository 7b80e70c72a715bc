#include "isaclab/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "isaclab/solvers.hpp"

namespace isaclab {

double pathloss_coeff(double d_km)
{
    if (!(d_km > 0.0) || !std::isfinite(d_km)) {
        throw std::domain_error("pathloss_coeff: distance must be positive");
    }
    return std::pow(10.0, -12.81) / std::pow(d_km, 3.76);
}

double snr_to_power(double snr_db, double xi_ref, double noise)
{
    if (!(xi_ref > 0.0) || !(noise > 0.0)) {
        throw std::domain_error("snr_to_power: gain and noise must be positive");
    }
    return noise * std::pow(10.0, snr_db / 10.0) / xi_ref;
}

double sensing_power(const SystemConfig& cfg)
{
    return snr_to_power(cfg.snr_s_db, 1.0, cfg.noise_power);
}

ChannelDraw gen_channel(const SystemConfig& cfg, Rng& rng)
{
    const double beta = cfg.csi_accuracy;
    if (beta <= 0.0) {
        throw ConfigError("csi_accuracy = 0: the channel estimate carries no information");
    }
    const int n_rx = cfg.n_rx;
    const int n_cu = cfg.n_cu;
    ChannelDraw out;
    out.cu_distance_km.resize(n_cu);
    out.cu_power.resize(n_cu);
    RVec xi(n_cu);
    const double d0 = cfg.cell_radius_km;
    for (int k = 0; k < n_cu; ++k) {
        out.cu_distance_km[k] = rng.uniform(d0, cfg.cu_range_factor * d0);
        xi[k] = pathloss_coeff(out.cu_distance_km[k]);
        out.cu_power[k] = snr_to_power(cfg.snr_c_db, xi[k], cfg.noise_power);
    }
    const CMat fading = rng.complex_gaussian(n_rx, n_cu);
    // Always drawn so that scenes differing only in beta share H and R_T.
    const CMat error_fading = rng.complex_gaussian(n_rx, n_cu, 1.0 - beta);

    out.channel.resize(n_rx, n_cu);
    out.error.resize(n_rx, n_cu);
    for (int k = 0; k < n_cu; ++k) {
        const double s = std::sqrt(xi[k]);
        out.channel.col(k) = s * fading.col(k);
        out.error.col(k) = s * error_fading.col(k);
    }
    if (beta == 1.0) {
        out.error.setZero();
        out.channel_est = out.channel;
    } else {
        out.channel_est = (out.channel - out.error) / std::sqrt(beta);
    }
    return out;
}

TargetCovariance gen_tcm(const SystemConfig& cfg, Rng& rng)
{
    const int n = cfg.n_tx;
    const CMat g = rng.complex_gaussian(n, n);
    Eigen::JacobiSVD<CMat> svd(g, Eigen::ComputeFullU);
    TargetCovariance out;
    out.eigvecs = svd.matrixU();
    out.eigvals.resize(n);
    for (int i = 0; i < n; ++i) {
        out.eigvals[i] = rng.uniform_pos();
    }
    out.eigvals *= static_cast<double>(n) / out.eigvals.sum();
    std::sort(out.eigvals.begin(), out.eigvals.end(), std::greater<>());
    return out;
}

RVec interference_eigvals(const CMat& channel, const RVec& cu_power, double noise)
{
    require(channel.cols() == cu_power.size(), "interference_eigvals: one power per user");
    if (!channel.allFinite() || (cu_power.array() <= 0.0).any() || !(noise > 0.0)) {
        throw std::invalid_argument("interference_eigvals: needs finite H, positive powers and noise");
    }
    const Eigen::Index n_rx = channel.rows();
    CMat cov = channel * cu_power.cast<cplx>().asDiagonal() * channel.adjoint();
    cov += noise * CMat::Identity(n_rx, n_rx);
    const double scale = cov.cwiseAbs().maxCoeff();
    if (hermitian_asymmetry(cov) > 1e-8 * scale) {
        throw NumericalError("interference covariance drifted from Hermitian");
    }
    cov = 0.5 * (cov + cov.adjoint()).eval();
    // Eigenvalues of the inverse are reciprocals; ascending lambda gives
    // descending sigma_h.
    const RVec lambda = hermitian_eigvals_desc(cov).reverse();
    return lambda.cwiseInverse();
}

RVec build_features(const Scene& scene)
{
    const CMat& h = scene.observed_channel();
    const int n_rx = scene.n_rx();
    const int n_cu = scene.n_cu();
    RVec f(2 * n_rx * n_cu + scene.n_tx());
    Eigen::Index pos = 0;
    for (int k = 0; k < n_cu; ++k) {
        for (int r = 0; r < n_rx; ++r) {
            f[pos++] = h(r, k).real();
        }
    }
    for (int k = 0; k < n_cu; ++k) {
        for (int r = 0; r < n_rx; ++r) {
            f[pos++] = h(r, k).imag();
        }
    }
    f.tail(scene.n_tx()) = scene.tcm_eigvals;
    return f;
}

Scene assemble_scene(const SystemConfig& cfg, ChannelDraw channel, TargetCovariance tcm)
{
    Scene sc;
    sc.channel = std::move(channel.channel);
    sc.channel_est = std::move(channel.channel_est);
    sc.cu_power = std::move(channel.cu_power);
    sc.tcm_eigvals = std::move(tcm.eigvals);
    sc.tcm_eigvecs = std::move(tcm.eigvecs);
    sc.sense_power = sensing_power(cfg);
    sc.noise_power = cfg.noise_power;
    sc.wave_len = cfg.wave_len;
    sc.use_estimate = cfg.csi_accuracy < 1.0;
    sc.interf_eigvals = interference_eigvals(sc.channel, sc.cu_power, sc.noise_power);
    sc.norm_sense = waterfill_ms(sc.tcm_eigvals, sc.sense_power, sc.noise_power, sc.n_rx(), sc.wave_len).max_rate;
    sc.norm_comm = max_comm_rate(sc);
    return sc;
}

Scene generate_scene(const SystemConfig& cfg, Stream ns, std::uint64_t index)
{
    Rng rng(derive_seed(cfg.seed, ns, index));
    ChannelDraw channel = gen_channel(cfg, rng);
    TargetCovariance tcm = gen_tcm(cfg, rng);
    return assemble_scene(cfg, std::move(channel), std::move(tcm));
}

std::uint64_t scene_hash(const Scene& scene)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&](double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (Eigen::Index i = 0; i < scene.channel.size(); ++i) {
        mix(scene.channel.data()[i].real());
        mix(scene.channel.data()[i].imag());
    }
    return h;
}

} // namespace isaclab
