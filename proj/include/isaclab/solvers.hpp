#pragma once

#include <cstdint>
#include <vector>

#include "isaclab/metrics.hpp"
#include "isaclab/parallel.hpp"
#include "isaclab/scene.hpp"

namespace isaclab {

struct BeamformerSet {
    std::vector<CVec> beams;  ///< one n_rx receive beam per user
};

struct OracleResult {
    PowerSpectrum best_sigma_s;
    double best_wsnr = 0.0;
    double grid_resolution = 0.0;
};

/// Minimum-variance distortionless receive beams,
///   w_k = R_k^-1 h_k^* / (sqrt(p_k) h_k^T R_k^-1 h_k^*),
/// with R_k the interference-plus-noise covariance at spectrum sigma_s.
BeamformerSet mvdr_beams(const RVec& sigma_s, const Scene& scene);

struct WaterfillResult {
    RVec sigma_s;
    double max_rate = 0.0;
    double water_level = 0.0;
    int active = 0;
};

/// Interference-free sensing optimum: water-filling over the target
/// eigenmodes with the active set iterated until every active allocation is
/// positive. Returns the allocation and M_s.
WaterfillResult waterfill_ms(const RVec& sigma_t, double sense_power, double noise, int n_rx, int wave_len);

/// Communication rate with no sensing signal (M_c).
double max_comm_rate(const Scene& scene);

enum class UnitaryKind { identity, random };

struct UnitaryChoice {
    UnitaryKind kind = UnitaryKind::identity;
    std::uint64_t seed = 0;
};

/// Haar-distributed n x n unitary.
CMat random_unitary(Eigen::Index n, std::uint64_t seed);

/// S = U_s [diag(sqrt(sigma_s)); 0] U_T^H.
Waveform recover_waveform(const RVec& sigma_s, const CMat& tcm_eigvecs, const CMat& left_unitary);
Waveform recover_waveform(const RVec& sigma_s, const CMat& tcm_eigvecs, int wave_len, UnitaryChoice choice = {});

/// Receive beams for a predicted spectrum; same closed form as mvdr_beams.
BeamformerSet recover_beams(const RVec& sigma_pred, const Scene& scene);

/// sigma_s,i = P_s / n_tx.
PowerSpectrum baseline_average(const Scene& scene);

struct ZeroForcing {
    PowerSpectrum spectrum;
    BeamformerSet beams;
};

/// Zero-forcing receive beams (normalized to the distortionless constraint)
/// with the uniform spectrum.
ZeroForcing baseline_zf(const Scene& scene);

/// Euclidean projection onto the feasible spectra
/// {x_1 >= ... >= x_n >= 0, sum x <= budget}.
RVec project_power_budget(const RVec& x, double budget);

struct GradientAscentResult {
    PowerSpectrum spectrum;
    double wsnr = 0.0;
    int iterations = 0;
    bool converged = false;  ///< false: step budget ran out, best iterate returned
};

/// Reference optimizer: projected gradient ascent on the weighted sum of
/// normalized rates with backtracking, started from the uniform spectrum and
/// from a low-power copy of it; the better end point is returned.
GradientAscentResult projected_gradient(const Scene& scene, double alpha, int steps = 2000, double step_size = 0.1);

/// Exhaustive search over the descending grid {n_1 >= ... >= n_N >= 0,
/// sum n_i <= P_s / resolution} for n_tx <= 3.
OracleResult grid_oracle(const Scene& scene, double alpha, double resolution, Exec exec = Exec::parallel);

} // namespace isaclab
