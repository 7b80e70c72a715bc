#include "isaclab/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "isaclab/rng.hpp"

namespace isaclab {

namespace {

CMat interference_plus_noise(const Scene& scene, int k, double level)
{
    const int n_rx = scene.n_rx();
    CMat r = level * CMat::Identity(n_rx, n_rx);
    for (int i = 0; i < scene.n_cu(); ++i) {
        if (i != k) {
            const CVec hc = scene.channel.col(i).conjugate();
            r.noalias() += scene.cu_power[i] * hc * hc.adjoint();
        }
    }
    return r;
}

BeamformerSet distortionless_beams(const RVec& sigma_s, const Scene& scene)
{
    const double level = sensing_interference(sigma_s, scene) + scene.noise_power;
    BeamformerSet out;
    out.beams.reserve(scene.n_cu());
    for (int k = 0; k < scene.n_cu(); ++k) {
        Eigen::LLT<CMat> llt(interference_plus_noise(scene, k, level));
        if (llt.info() != Eigen::Success) {
            throw NumericalError("interference covariance is not positive definite");
        }
        const CVec hc = scene.channel.col(k).conjugate();
        const CVec x = llt.solve(hc);
        const double quad = hc.dot(x).real();
        out.beams.push_back(x / (std::sqrt(scene.cu_power[k]) * quad));
    }
    return out;
}

} // namespace

BeamformerSet mvdr_beams(const RVec& sigma_s, const Scene& scene)
{
    return distortionless_beams(sigma_s, scene);
}

BeamformerSet recover_beams(const RVec& sigma_pred, const Scene& scene)
{
    return distortionless_beams(sigma_pred, scene);
}

WaterfillResult waterfill_ms(const RVec& sigma_t, double sense_power, double noise, int n_rx, int wave_len)
{
    const auto n = static_cast<int>(sigma_t.size());
    if (n == 0 || !(sense_power > 0.0) || !(noise > 0.0) || (sigma_t.array() <= 0.0).any()) {
        throw std::invalid_argument("waterfill_ms: needs positive gains, power and noise");
    }
    // Channels ordered by floor height noise / sigma_t, lowest first.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return sigma_t[a] > sigma_t[b]; });

    int active = n;
    double level = 0.0;
    while (active > 0) {
        double floors = 0.0;
        for (int m = 0; m < active; ++m) {
            floors += noise / sigma_t[order[m]];
        }
        level = (sense_power + floors) / active;
        if (level - noise / sigma_t[order[active - 1]] > 0.0) {
            break;
        }
        --active;
    }

    WaterfillResult out;
    out.sigma_s = RVec::Zero(n);
    for (int m = 0; m < active; ++m) {
        const int i = order[m];
        out.sigma_s[i] = level - noise / sigma_t[i];
    }
    double rate = 0.0;
    for (int i = 0; i < n; ++i) {
        rate += std::log1p(sigma_t[i] * out.sigma_s[i] / noise);
    }
    out.max_rate = static_cast<double>(n_rx) / wave_len * rate / kLn2;
    out.water_level = level;
    out.active = active;
    return out;
}

double max_comm_rate(const Scene& scene)
{
    double acc = 0.0;
    for (int k = 0; k < scene.n_cu(); ++k) {
        Eigen::LLT<CMat> llt(interference_plus_noise(scene, k, scene.noise_power));
        if (llt.info() != Eigen::Success) {
            throw NumericalError("max_comm_rate: covariance is not positive definite");
        }
        const CVec hc = scene.channel.col(k).conjugate();
        const double gamma = scene.cu_power[k] * hc.dot(llt.solve(hc)).real();
        acc += std::log1p(gamma) / kLn2;
    }
    return acc / scene.n_cu();
}

CMat random_unitary(Eigen::Index n, std::uint64_t seed)
{
    Rng rng(seed);
    const CMat g = rng.complex_gaussian(n, n);
    Eigen::HouseholderQR<CMat> qr(g);
    CMat q = qr.householderQ() * CMat::Identity(n, n);
    const CMat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mag = std::abs(r(i, i));
        if (mag > 0.0) {
            q.col(i) *= r(i, i) / mag;
        }
    }
    return q;
}

Waveform recover_waveform(const RVec& sigma_s, const CMat& tcm_eigvecs, const CMat& left_unitary)
{
    const Eigen::Index n_tx = tcm_eigvecs.rows();
    const Eigen::Index l = left_unitary.rows();
    require(tcm_eigvecs.cols() == n_tx, "recover_waveform: U_T must be square");
    require(sigma_s.size() == n_tx, "recover_waveform: sigma_s length must equal n_tx");
    require(left_unitary.cols() == l && l >= n_tx, "recover_waveform: U_s must be square with L >= n_tx");
    if ((sigma_s.array() < 0.0).any()) {
        throw std::invalid_argument("recover_waveform: negative power");
    }
    // U_s Sigma keeps only the first n_tx columns of U_s.
    const CMat scaled = left_unitary.leftCols(n_tx) * sigma_s.cwiseSqrt().cast<cplx>().asDiagonal();
    return Waveform{scaled * tcm_eigvecs.adjoint()};
}

Waveform recover_waveform(const RVec& sigma_s, const CMat& tcm_eigvecs, int wave_len, UnitaryChoice choice)
{
    require(wave_len >= tcm_eigvecs.rows(), "recover_waveform: L must be >= n_tx");
    const CMat us = choice.kind == UnitaryKind::identity ? CMat::Identity(wave_len, wave_len)
                                                          : random_unitary(wave_len, choice.seed);
    return recover_waveform(sigma_s, tcm_eigvecs, us);
}

PowerSpectrum baseline_average(const Scene& scene)
{
    const int n = scene.n_tx();
    return PowerSpectrum{RVec::Constant(n, scene.sense_power / n), scene.sense_power};
}

ZeroForcing baseline_zf(const Scene& scene)
{
    const int n_cu = scene.n_cu();
    const int n_rx = scene.n_rx();
    if (n_cu > n_rx) {
        throw std::invalid_argument("baseline_zf: needs n_cu <= n_rx");
    }
    Eigen::ColPivHouseholderQR<CMat> qr(scene.channel);
    qr.setThreshold(1e-10);
    if (qr.rank() < n_cu) {
        throw std::invalid_argument("baseline_zf: channel matrix is rank deficient");
    }
    // W = H^* (H^T H^*)^-1, so H^T W = I.
    const CMat hc = scene.channel.conjugate();
    const CMat gram = scene.channel.transpose() * hc;
    const CMat w = hc * gram.partialPivLu().solve(CMat::Identity(n_cu, n_cu));

    ZeroForcing out{baseline_average(scene), {}};
    out.beams.beams.reserve(n_cu);
    for (int k = 0; k < n_cu; ++k) {
        out.beams.beams.push_back(w.col(k) / std::sqrt(scene.cu_power[k]));
    }
    return out;
}

RVec project_power_budget(const RVec& x, double budget)
{
    // Nearest descending sequence first (pool-adjacent-violators). Shifting
    // by a constant commutes with it, so the budget and the sign constraint
    // then reduce to a threshold on an already sorted vector.
    std::vector<double> level;
    std::vector<double> weight;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        level.push_back(x[i]);
        weight.push_back(1.0);
        while (level.size() > 1 && level[level.size() - 2] < level.back()) {
            const double w = weight[weight.size() - 2] + weight.back();
            const double v = (level[level.size() - 2] * weight[weight.size() - 2] + level.back() * weight.back()) / w;
            level.pop_back();
            weight.pop_back();
            level.back() = v;
            weight.back() = w;
        }
    }
    RVec z(x.size());
    Eigen::Index pos = 0;
    for (std::size_t b = 0; b < level.size(); ++b) {
        for (int r = 0; r < static_cast<int>(weight[b]); ++r) {
            z[pos++] = level[b];
        }
    }

    RVec y = z.cwiseMax(0.0);
    if (l1_sum(y) > budget) {
        // Simplex threshold: y = max(z - theta, 0) with sum y = budget.
        double cum = 0.0;
        double theta = 0.0;
        for (Eigen::Index j = 0; j < z.size(); ++j) {
            cum += z[j];
            const double t = (cum - budget) / static_cast<double>(j + 1);
            if (z[j] - t > 0.0) {
                theta = t;
            }
        }
        y = (z.array() - theta).cwiseMax(0.0);
        // Rounding may leave the sum a few ulps above the budget.
        const double s = l1_sum(y);
        if (s > budget) {
            y *= budget / s;
            while (l1_sum(y) > budget) {
                y *= 1.0 - 0x1.0p-52;
            }
        }
    }
    // Averaged blocks can differ from their neighbours by an ulp.
    std::sort(y.begin(), y.end(), std::greater<>());
    return y;
}

GradientAscentResult projected_gradient(const Scene& scene, double alpha, int steps, double step_size)
{
    const SceneObjective objective(scene);
    const double budget = scene.sense_power;
    const RVec uniform = baseline_average(scene).values;

    GradientAscentResult best;
    best.wsnr = -1.0;
    for (const double start_scale : {1.0, 1e-3}) {
        RVec sigma = project_power_budget(start_scale * uniform, budget);
        RVec grad;
        double value = objective.value_and_gradient(sigma, alpha, grad);
        double step = step_size;
        int it = 0;
        bool converged = false;
        for (; it < steps; ++it) {
            const double gmax = grad.cwiseAbs().maxCoeff();
            if (gmax == 0.0) {
                converged = true;
                break;
            }
            bool accepted = false;
            while (step > 1e-14) {
                // Step length is measured in units of the budget.
                const RVec trial = project_power_budget(sigma + (step * budget / gmax) * grad, budget);
                RVec trial_grad;
                const double trial_value = objective.value_and_gradient(trial, alpha, trial_grad);
                if (trial_value >= value) {
                    const double moved = (trial - sigma).cwiseAbs().maxCoeff();
                    const double gained = trial_value - value;
                    sigma = trial;
                    grad = trial_grad;
                    value = trial_value;
                    step = std::min(2.0 * step, 1.0);
                    accepted = true;
                    if (moved <= 1e-13 * budget || gained <= 1e-15) {
                        converged = true;
                    }
                    break;
                }
                step *= 0.5;
            }
            if (!accepted || converged) {
                converged = true;
                break;
            }
        }
        if (value > best.wsnr) {
            best.spectrum = PowerSpectrum{sigma, budget};
            best.wsnr = value;
            best.iterations = it;
            best.converged = converged;
        }
    }
    return best;
}

OracleResult grid_oracle(const Scene& scene, double alpha, double resolution, Exec exec)
{
    const int n_tx = scene.n_tx();
    if (n_tx > 3) {
        throw std::invalid_argument("grid_oracle: refused for n_tx > 3");
    }
    if (!(resolution > 0.0)) {
        throw std::invalid_argument("grid_oracle: resolution must be positive");
    }
    const auto n_max = static_cast<long>(std::floor(scene.sense_power / resolution * (1.0 + 1e-12)));

    struct Best {
        double value = -1.0;
        RVec sigma;
    };
    // One slot per leading coordinate n_1, reduced in order afterwards.
    std::vector<Best> per_lead(static_cast<std::size_t>(n_max) + 1);
    for_each_index(exec, per_lead.size(), [&](std::size_t lead) {
        Best local;
        RVec sigma = RVec::Zero(n_tx);
        auto consider = [&] {
            const double v = wsnr(sigma, scene, alpha).wsnr;
            if (v > local.value) {
                local.value = v;
                local.sigma = sigma;
            }
        };
        const long n1 = static_cast<long>(lead);
        sigma[0] = n1 * resolution;
        if (n_tx == 1) {
            consider();
        } else {
            for (long n2 = 0; n2 <= std::min(n1, n_max - n1); ++n2) {
                sigma[1] = n2 * resolution;
                if (n_tx == 2) {
                    consider();
                    continue;
                }
                for (long n3 = 0; n3 <= std::min(n2, n_max - n1 - n2); ++n3) {
                    sigma[2] = n3 * resolution;
                    consider();
                }
            }
        }
        per_lead[lead] = std::move(local);
    });

    Best best;
    for (auto& b : per_lead) {
        if (b.value > best.value) {
            best = std::move(b);
        }
    }
    return {PowerSpectrum{best.sigma, scene.sense_power}, best.value, resolution};
}

} // namespace isaclab
