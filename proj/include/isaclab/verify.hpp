#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "isaclab/config.hpp"

namespace isaclab {

struct PropertyResult {
    std::string name;
    double residual = 0.0;
    double threshold = 0.0;
    bool pass = false;
};

PropertyResult make_result(std::string name, double residual, double threshold);

/// Random instance generator for the property checks: dims drawn per
/// instance, everything else from the desk-scale defaults.
SystemConfig desk_config();

PropertyResult prop_kron_vec(int instances, std::uint64_t seed);
PropertyResult prop_kron_det(int instances, std::uint64_t seed);
/// Block-diagonal MI evaluation against the fully materialized Kronecker form.
PropertyResult prop_mi_kron_form(int scenes, std::uint64_t seed);
/// Full MI of a waveform aligned with the target eigenvectors equals the
/// reduced rate.
PropertyResult prop_mi_aligned(int scenes, std::uint64_t seed);
/// Misaligned waveforms never beat the reduced rate of their own spectrum.
PropertyResult prop_mi_upper_bound(int scenes, std::uint64_t seed);
/// Random unit beams never beat the closed-form optimal SINR.
PropertyResult prop_mvdr_dominates(int scenes, int beams_per_user, std::uint64_t seed);
/// Closed-form optimal SINR equals the direct SINR of the MVDR beam.
PropertyResult prop_mvdr_closed_form(int scenes, std::uint64_t seed);
/// Water-filling: KKT residual, budget use, and agreement with a grid search.
std::vector<PropertyResult> prop_waterfill(int instances, std::uint64_t seed);
PropertyResult prop_sigma_gradient(int points, std::uint64_t seed);
PropertyResult prop_network_gradient(std::uint64_t seed);
PropertyResult prop_lambda_feasible(int pairs, std::uint64_t seed);
/// Projected gradient against the exhaustive grid at n_tx = 2.
std::vector<PropertyResult> prop_pgrad_vs_grid(int scenes, std::uint64_t seed);

/// scope: lemmas | gradients | oracles | all.
std::vector<PropertyResult> run_verify(const std::string& scope, std::uint64_t seed);

/// One `property,residual,threshold,pass` line per result, with header.
std::string format_report(const std::vector<PropertyResult>& results);

} // namespace isaclab
