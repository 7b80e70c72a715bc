#include "isaclab/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "isaclab/linalg.hpp"

namespace isaclab::oracle {

double sensing_mi_kron(const Waveform& s, const Scene& scene)
{
    const int n_rx = scene.n_rx();
    const int l = scene.wave_len;
    const CMat& h = scene.channel;
    const CMat eye_l = CMat::Identity(l, l);
    const CMat eye_r = CMat::Identity(n_rx, n_rx);
    const CMat comm = h * scene.cu_power.cast<cplx>().asDiagonal() * h.adjoint();
    const CMat r_i = kron(comm, eye_l) + scene.noise_power * CMat::Identity(n_rx * l, n_rx * l);
    const CMat& u = scene.tcm_eigvecs;
    const CMat r_t = u * scene.tcm_eigvals.cast<cplx>().asDiagonal() * u.adjoint();
    const CMat s_tilde = kron(eye_r, s.matrix);
    const CMat r_g = kron(eye_r, r_t);
    const CMat m = CMat::Identity(n_rx * l, n_rx * l) + r_i.inverse() * s_tilde * r_g * s_tilde.adjoint();
    // m is not Hermitian; use the LU determinant.
    const cplx det = m.fullPivLu().determinant();
    return std::log2(std::abs(det));
}

namespace {

double interference_free_rate(const RVec& sigma_t, const RVec& sigma_s, double noise, int n_rx, int wave_len)
{
    double acc = 0.0;
    for (Eigen::Index i = 0; i < sigma_t.size(); ++i) {
        acc += std::log2(1.0 + sigma_t[i] * sigma_s[i] / noise);
    }
    return acc * n_rx / wave_len;
}

} // namespace

double waterfill_zoom(const RVec& sigma_t, double sense_power, double noise, int n_rx, int wave_len)
{
    const auto n = static_cast<int>(sigma_t.size());
    if (n < 1 || n > 3) {
        throw std::invalid_argument("waterfill_zoom: n_tx must be 1, 2 or 3");
    }
    // The rate increases in every coordinate, so the optimum spends the full
    // budget; search the first n-1 coordinates, the last takes the rest.
    RVec best = RVec::Constant(n, sense_power / n);
    double best_val = interference_free_rate(sigma_t, best, noise, n_rx, wave_len);
    if (n == 1) {
        best[0] = sense_power;
        return interference_free_rate(sigma_t, best, noise, n_rx, wave_len);
    }
    const int points = n == 2 ? 2001 : 401;
    double half_width = sense_power;
    for (int round = 0; round < 40; ++round) {
        const RVec centre = best;
        const double step = 2.0 * half_width / (points - 1);
        auto try_point = [&](const RVec& x) {
            if ((x.array() < 0.0).any()) {
                return;
            }
            const double v = interference_free_rate(sigma_t, x, noise, n_rx, wave_len);
            if (v > best_val) {
                best_val = v;
                best = x;
            }
        };
        RVec x(n);
        for (int a = 0; a < points; ++a) {
            x[0] = centre[0] - half_width + a * step;
            if (n == 2) {
                x[1] = sense_power - x[0];
                try_point(x);
                continue;
            }
            for (int b = 0; b < points; ++b) {
                x[1] = centre[1] - half_width + b * step;
                x[2] = sense_power - x[0] - x[1];
                try_point(x);
            }
        }
        half_width = std::max(4.0 * step, half_width * 0.05);
        if (half_width < 1e-13 * sense_power) {
            break;
        }
    }
    return best_val;
}

double central_diff(const std::function<double(const RVec&)>& f, const RVec& x, Eigen::Index i, double h)
{
    RVec xp = x;
    auto at = [&](double d) {
        xp[i] = x[i] + d;
        return f(xp);
    };
    return (8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h);
}

GradCheck check_sigma_gradient(const Scene& scene, const RVec& sigma, double alpha)
{
    const RVec g = loss_grad_sigma(sigma, scene, alpha);
    auto f = [&](const RVec& x) { return -wsnr(x, scene, alpha).wsnr; };
    GradCheck out;
    RVec fd(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        const double h = 1e-4 * std::max(sigma[i], scene.sense_power / sigma.size());
        fd[i] = central_diff(f, sigma, i, std::min(h, 0.5 * sigma[i]));
    }
    const double scale = fd.cwiseAbs().maxCoeff();
    Eigen::Index worst = 0;
    const double err = (g - fd).cwiseAbs().maxCoeff(&worst);
    out.max_rel_error = scale > 0.0 ? err / scale : err;
    out.worst_index = static_cast<std::size_t>(worst);
    out.checked = static_cast<std::size_t>(sigma.size());
    return out;
}

double network_loss(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes, double alpha)
{
    const auto outs = forward(params, scenes, nn::Mode::train, nullptr, Exec::serial);
    std::vector<PowerSpectrum> sig;
    for (const auto& o : outs) {
        sig.push_back(o.sigma_pred);
    }
    return loss(sig, scenes, alpha);
}

GradCheck check_network_gradient(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes, double alpha)
{
    nn::ForwardCache cache;
    const auto outs = forward(params, scenes, nn::Mode::train, &cache, Exec::serial);
    std::vector<RVec> gs;
    for (std::size_t i = 0; i < outs.size(); ++i) {
        gs.push_back(loss_grad_sigma(outs[i].sigma_pred.values, *scenes[i], alpha) /
                     static_cast<double>(scenes.size()));
    }
    const std::vector<double> g = backward(params, cache, outs, gs, Exec::serial);

    const std::size_t n = params.weights.size();
    std::vector<double> fd(n);
    nn::NetworkParams probe = params;
    auto f = [&](const RVec& w) {
        std::copy(w.data(), w.data() + w.size(), probe.weights.begin());
        return network_loss(probe, scenes, alpha);
    };
    const RVec w0 = Eigen::Map<const RVec>(params.weights.data(), static_cast<Eigen::Index>(n));
    // Steps 1e-4, 1e-5, 1e-6 (relative). Round-off favours the large ones,
    // ReLU kinks inside the stencil favour the small ones; keep the estimate
    // from the adjacent pair that agrees best.
    for (std::size_t i = 0; i < n; ++i) {
        const auto idx = static_cast<Eigen::Index>(i);
        const double s = std::max(1.0, std::abs(w0[idx]));
        const double d[3] = {central_diff(f, w0, idx, 1e-4 * s), central_diff(f, w0, idx, 1e-5 * s),
                             central_diff(f, w0, idx, 1e-6 * s)};
        fd[i] = std::abs(d[0] - d[1]) < std::abs(d[1] - d[2]) ? d[1] : d[2];
    }
    double scale = 0.0;
    for (double v : fd) {
        scale = std::max(scale, std::abs(v));
    }
    const double floor = 1e-6 * scale;
    GradCheck out;
    out.checked = n;
    for (std::size_t i = 0; i < n; ++i) {
        const double denom = std::max({std::abs(g[i]), std::abs(fd[i]), floor});
        const double rel = denom > 0.0 ? std::abs(g[i] - fd[i]) / denom : 0.0;
        if (rel > out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_index = i;
        }
    }
    return out;
}

RVec random_spectrum(Rng& rng, int n, double budget, double fill)
{
    RVec x(n);
    for (int i = 0; i < n; ++i) {
        x[i] = rng.uniform_pos();
    }
    std::sort(x.data(), x.data() + n, std::greater<>());
    x *= fill * budget / x.sum();
    while (l1_sum(x) > budget) {
        x *= 1.0 - 0x1p-52;
    }
    return x;
}

} // namespace isaclab::oracle
