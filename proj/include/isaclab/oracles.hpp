#pragma once

// Slow, independent reference computations. They share no code paths with
// the fast implementations they are used to check.

#include <cstdint>
#include <functional>

#include "isaclab/isacnn.hpp"
#include "isaclab/metrics.hpp"
#include "isaclab/scene.hpp"

namespace isaclab::oracle {

/// Sensing MI from the vectorized received signal, with every Kronecker
/// factor materialized:
///   log2 |I + R_I^-1 (I kron S) (I kron R_T) (I kron S)^H|,
///   R_I = (H diag(p) H^H) kron I_L + noise I.
double sensing_mi_kron(const Waveform& s, const Scene& scene);

/// Maximum interference-free sensing rate found by repeated grid refinement
/// over the full-power simplex (n_tx <= 3). Uses no KKT reasoning.
double waterfill_zoom(const RVec& sigma_t, double sense_power, double noise, int n_rx, int wave_len);

/// Fourth-order central difference of f at x along coordinate i.
double central_diff(const std::function<double(const RVec&)>& f, const RVec& x, Eigen::Index i, double h);

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
};

/// Analytic loss gradient w.r.t. sigma vs finite differences. The error is
/// |g - g_fd|_inf / |g_fd|_inf.
GradCheck check_sigma_gradient(const Scene& scene, const RVec& sigma, double alpha);

/// Analytic parameter gradient of the batch loss (train-mode BN) vs
/// finite differences on every parameter. Per-parameter error is
/// |g - g_fd| / max(|g|, |g_fd|, floor), floor = 1e-6 * |g_fd|_inf.
GradCheck check_network_gradient(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                                 double alpha);

/// Batch loss as a function of the flat weights (train-mode BN statistics,
/// metrics-module objective).
double network_loss(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes, double alpha);

/// Uniform entries in (0, 1) scaled so the l1 norm is `fill` * budget, sorted
/// descending.
RVec random_spectrum(Rng& rng, int n, double budget, double fill);

} // namespace isaclab::oracle
