#pragma once

#include <vector>

#include "isaclab/linalg.hpp"
#include "isaclab/scene.hpp"

namespace isaclab {

/// Squared singular values of the sensing waveform: nonnegative, descending,
/// l1 norm within the sensing budget.
struct PowerSpectrum {
    RVec values;
    double budget = 0.0;

    /// Throws std::invalid_argument unless the invariants hold.
    static PowerSpectrum checked(RVec values, double budget);
    bool feasible(double rel_tol = 1e-9) const;
};

struct Waveform {
    CMat matrix;  ///< L x n_tx

    double power() const { return matrix.squaredNorm(); }
};

struct RatePair {
    double sense_rate = 0.0;  ///< bits/s/Hz per waveform slot
    double comm_rate = 0.0;   ///< bits/s/Hz averaged over users
    double wsnr = 0.0;
};

/// ||vec(ABC) - (C^T kron A) vec(B)||.
double kron_vec_identity(const CMat& a, const CMat& b, const CMat& c);

/// | det(I + AB kron CD) - det(I + BA kron DC) |.
double kron_det_identity(const CMat& a, const CMat& b, const CMat& c, const CMat& d);

/// Sensing mutual information in bits for an arbitrary waveform, evaluated as
/// log2|I + R_H kron S R_T S^H| block by block in the eigenbasis of R_H.
double sensing_mi_full(const Waveform& s, const Scene& scene);

/// (1/L) sum_i sum_j log2(1 + sigma_t,i sigma_s,i sigma_h,j).
double reduced_sense_rate(const RVec& sigma_s, const Scene& scene);

/// Sensing interference power seen by the communication receiver,
/// sigma_t^T sigma_s / L.
double sensing_interference(const RVec& sigma_s, const Scene& scene);

/// SINR of user k (0-based) for an explicit receive beam.
double sinr_direct(const CVec& w, int k, const RVec& sigma_s, const Scene& scene);

/// p_k h_k^T R_k^-1 h_k^* for every user, R_k the interference-plus-noise
/// covariance of user k.
RVec optimal_sinrs(const RVec& sigma_s, const Scene& scene);

double reduced_comm_rate(const RVec& sigma_s, const Scene& scene);

/// User-averaged rate when user k is received with beams[k].
double comm_rate_for_beams(const std::vector<CVec>& beams, const RVec& sigma_s, const Scene& scene);

RatePair compose_rates(double sense_rate, double comm_rate, const Scene& scene, double alpha);

RatePair wsnr(const RVec& sigma_s, const Scene& scene, double alpha);

/// Analytic gradient of the weighted sum of normalized rates w.r.t. sigma_s.
RVec wsnr_gradient(const RVec& sigma_s, const Scene& scene, double alpha);

/// Per-scene precomputation for repeated objective evaluation. The optimal
/// SINR of user k is written in the eigenbasis of its inter-user covariance
/// A_k = V diag(a) V^H:
///   gamma_k(t) = sum_m c_km / (a_km + t + noise),  c_km = p_k |v_m^H h_k^*|^2,
/// so rate and gradient cost O(K n_rx) once the eigensystems are known.
class SceneObjective {
public:
    explicit SceneObjective(const Scene& scene);

    double sense_rate(const RVec& sigma_s) const;
    double comm_rate(const RVec& sigma_s) const;
    RatePair evaluate(const RVec& sigma_s, double alpha) const;
    /// Objective value, gradient written to `grad`.
    double value_and_gradient(const RVec& sigma_s, double alpha, RVec& grad) const;

private:
    const Scene* scene_;
    std::vector<RVec> inter_eig_;
    std::vector<RVec> weight_;
};

} // namespace isaclab
