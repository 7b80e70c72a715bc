#include "isaclab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "isaclab/isacnn.hpp"
#include "isaclab/oracles.hpp"
#include "isaclab/rng.hpp"
#include "isaclab/solvers.hpp"

namespace isaclab {

PropertyResult make_result(std::string name, double residual, double threshold)
{
    // NaN residuals fail.
    return {std::move(name), residual, threshold, residual <= threshold};
}

SystemConfig desk_config()
{
    SystemConfig cfg;
    cfg.n_tx = 4;
    cfg.n_rx = 4;
    cfg.n_cu = 2;
    cfg.wave_len = 6;
    return cfg;
}

namespace {

int draw_int(Rng& rng, int lo, int hi)
{
    return lo + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
}

SystemConfig random_dims(Rng& rng, int max_tx, int max_rx, int max_cu, int max_len)
{
    SystemConfig cfg = desk_config();
    cfg.n_tx = draw_int(rng, 1, std::min(max_tx, max_len - 1));
    cfg.n_rx = draw_int(rng, 1, max_rx);
    cfg.n_cu = draw_int(rng, 1, max_cu);
    cfg.wave_len = draw_int(rng, cfg.n_tx + 1, max_len);
    cfg.snr_s_db = rng.uniform(-5.0, 20.0);
    cfg.snr_c_db = rng.uniform(-5.0, 15.0);
    return cfg;
}

} // namespace

PropertyResult prop_kron_vec(int instances, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 1000 + t));
        const int m = draw_int(rng, 1, 4), n = draw_int(rng, 1, 4), p = draw_int(rng, 1, 4), q = draw_int(rng, 1, 4);
        const CMat a = rng.complex_gaussian(m, n, 1.0);
        const CMat b = rng.complex_gaussian(n, p, 1.0);
        const CMat c = rng.complex_gaussian(p, q, 1.0);
        worst = std::max(worst, kron_vec_identity(a, b, c) / (a * b * c).norm());
    }
    return make_result("kron_vec_identity", worst, 1e-10);
}

PropertyResult prop_kron_det(int instances, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < instances; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 2000 + t));
        const int m = draw_int(rng, 1, 4), p = draw_int(rng, 1, 4);
        const CMat a = rng.complex_gaussian(m, m, 1.0);
        const CMat b = rng.complex_gaussian(m, m, 1.0);
        const CMat c = rng.complex_gaussian(p, p, 1.0);
        const CMat d = rng.complex_gaussian(p, p, 1.0);
        const CMat lhs = CMat::Identity(m * p, m * p) + kron(a * b, c * d);
        const double scale = std::abs(lhs.fullPivLu().determinant());
        worst = std::max(worst, kron_det_identity(a, b, c, d) / scale);
    }
    return make_result("kron_det_identity", worst, 1e-8);
}

PropertyResult prop_mi_kron_form(int scenes, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < scenes; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 3000 + t));
        const SystemConfig cfg = random_dims(rng, 8, 8, 4, 12);
        const Scene sc = generate_scene(cfg, Stream::test, 3000 + t);
        const CMat s = rng.complex_gaussian(sc.wave_len, sc.n_tx(), sc.sense_power / (sc.wave_len * sc.n_tx()));
        const Waveform w{s};
        const double a = sensing_mi_full(w, sc);
        const double b = oracle::sensing_mi_kron(w, sc);
        worst = std::max(worst, std::abs(a - b) / std::max(std::abs(b), 1e-300));
    }
    return make_result("mi_blockwise_vs_kronecker", worst, 1e-8);
}

PropertyResult prop_mi_aligned(int scenes, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < scenes; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 4000 + t));
        const SystemConfig cfg = random_dims(rng, 8, 8, 4, 12);
        const Scene sc = generate_scene(cfg, Stream::test, 4000 + t);
        const RVec sigma = oracle::random_spectrum(rng, sc.n_tx(), sc.sense_power, rng.uniform(0.1, 1.0));
        const Waveform s = recover_waveform(sigma, sc.tcm_eigvecs, sc.wave_len, {UnitaryKind::random, rng.next_u64()});
        const double full = sensing_mi_full(s, sc) / sc.wave_len;
        const double reduced = reduced_sense_rate(sigma, sc);
        worst = std::max(worst, std::abs(full - reduced) / reduced);
    }
    return make_result("mi_full_equals_reduced", worst, 1e-8);
}

PropertyResult prop_mi_upper_bound(int scenes, std::uint64_t seed)
{
    double worst = -1e300;
    for (int t = 0; t < scenes; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 5000 + t));
        const SystemConfig cfg = random_dims(rng, 8, 8, 4, 12);
        const Scene sc = generate_scene(cfg, Stream::test, 5000 + t);
        const CMat s = rng.complex_gaussian(sc.wave_len, sc.n_tx(), sc.sense_power / (sc.wave_len * sc.n_tx()));
        Eigen::JacobiSVD<CMat> svd(s);
        const RVec spectrum = svd.singularValues().array().square();
        const double full = sensing_mi_full(Waveform{s}, sc) / sc.wave_len;
        worst = std::max(worst, full - reduced_sense_rate(spectrum, sc));
    }
    return make_result("mi_misaligned_below_reduced", std::max(worst, 0.0), 1e-9);
}

PropertyResult prop_mvdr_dominates(int scenes, int beams_per_user, std::uint64_t seed)
{
    double worst = -1e300;
    for (int t = 0; t < scenes; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 6000 + t));
        SystemConfig cfg = desk_config();
        cfg.n_cu = 3;
        cfg.n_rx = 6;
        cfg.snr_c_db = rng.uniform(-5.0, 15.0);
        const Scene sc = generate_scene(cfg, Stream::test, 6000 + t);
        const RVec sigma = oracle::random_spectrum(rng, sc.n_tx(), sc.sense_power, rng.uniform(0.0, 1.0));
        const RVec opt = optimal_sinrs(sigma, sc);
        for (int k = 0; k < sc.n_cu(); ++k) {
            for (int b = 0; b < beams_per_user; ++b) {
                CVec w = rng.complex_gaussian(sc.n_rx(), 1, 1.0).col(0);
                w /= w.norm();
                worst = std::max(worst, (sinr_direct(w, k, sigma, sc) - opt[k]) / opt[k]);
            }
        }
    }
    return make_result("mvdr_beats_random_beams", std::max(worst, 0.0), 1e-12);
}

PropertyResult prop_mvdr_closed_form(int scenes, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < scenes; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 7000 + t));
        SystemConfig cfg = desk_config();
        cfg.n_cu = 3;
        cfg.n_rx = 6;
        const Scene sc = generate_scene(cfg, Stream::test, 7000 + t);
        const RVec sigma = oracle::random_spectrum(rng, sc.n_tx(), sc.sense_power, rng.uniform(0.0, 1.0));
        const RVec opt = optimal_sinrs(sigma, sc);
        const BeamformerSet beams = mvdr_beams(sigma, sc);
        for (int k = 0; k < sc.n_cu(); ++k) {
            worst = std::max(worst, std::abs(sinr_direct(beams.beams[k], k, sigma, sc) - opt[k]) / opt[k]);
        }
    }
    return make_result("mvdr_closed_form_matches_direct", worst, 1e-10);
}

std::vector<PropertyResult> prop_waterfill(int instances, std::uint64_t seed)
{
    double kkt = 0.0, power = 0.0, gap = 0.0;
    for (int t = 0; t < instances; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 8000 + t));
        SystemConfig cfg = desk_config();
        cfg.n_tx = 2 + t % 2;
        cfg.snr_s_db = rng.uniform(-10.0, 20.0);
        const Scene sc = generate_scene(cfg, Stream::test, 8000 + t);
        const RVec& st = sc.tcm_eigvals;
        const WaterfillResult wf = waterfill_ms(st, sc.sense_power, sc.noise_power, sc.n_rx(), sc.wave_len);
        // Marginal gain of channel i is proportional to st_i / (noise + st_i s_i);
        // equal on the active set and no larger off it.
        double level = 0.0;
        int active = 0;
        for (Eigen::Index i = 0; i < st.size(); ++i) {
            if (wf.sigma_s[i] > 0.0) {
                level += st[i] / (sc.noise_power + st[i] * wf.sigma_s[i]);
                ++active;
            }
        }
        level /= active;
        for (Eigen::Index i = 0; i < st.size(); ++i) {
            const double marginal = st[i] / (sc.noise_power + st[i] * wf.sigma_s[i]);
            kkt = std::max(kkt, wf.sigma_s[i] > 0.0 ? std::abs(marginal - level) / level
                                                    : std::max(0.0, (marginal - level) / level));
        }
        power = std::max(power, std::abs(wf.sigma_s.sum() - sc.sense_power) / sc.sense_power);
        const double zoom = oracle::waterfill_zoom(st, sc.sense_power, sc.noise_power, sc.n_rx(), sc.wave_len);
        gap = std::max(gap, std::abs(wf.max_rate - zoom));
    }
    return {make_result("waterfill_kkt", kkt, 1e-10), make_result("waterfill_total_power", power, 1e-12),
            make_result("waterfill_vs_grid", gap, 1e-6)};
}

PropertyResult prop_sigma_gradient(int points, std::uint64_t seed)
{
    double worst = 0.0;
    for (int t = 0; t < points; ++t) {
        Rng rng(derive_seed(seed, Stream::test, 9000 + t));
        const SystemConfig cfg = random_dims(rng, 6, 6, 3, 10);
        const Scene sc = generate_scene(cfg, Stream::test, 9000 + t);
        const RVec sigma = oracle::random_spectrum(rng, sc.n_tx(), sc.sense_power, rng.uniform(0.05, 1.0));
        worst = std::max(worst, oracle::check_sigma_gradient(sc, sigma, rng.uniform()).max_rel_error);
    }
    return make_result("loss_grad_sigma_vs_fd", worst, 1e-6);
}

PropertyResult prop_network_gradient(std::uint64_t seed)
{
    // n_rx = 2, n_cu = 2, n_tx = 4 gives a 12-long feature vector.
    SystemConfig cfg = desk_config();
    cfg.n_rx = 2;
    std::vector<Scene> scenes;
    for (int i = 0; i < 4; ++i) {
        scenes.push_back(generate_scene(cfg, Stream::test, 10000 + i));
    }
    std::vector<const Scene*> ptrs;
    for (const auto& s : scenes) {
        ptrs.push_back(&s);
    }
    const auto params = nn::init_params(nn::Architecture::isacnn(cfg.feature_len(), cfg.n_tx), seed);
    const oracle::GradCheck gc = oracle::check_network_gradient(params, ptrs, 0.5);
    return make_result("network_param_grad_vs_fd", gc.max_rel_error, 1e-4);
}

PropertyResult prop_lambda_feasible(int pairs, std::uint64_t seed)
{
    SystemConfig cfg = desk_config();
    const int len = cfg.feature_len();
    constexpr int kInputsPerParams = 100;
    const int param_sets = std::max(1, pairs / kInputsPerParams);
    std::vector<int> bad(param_sets, 0);
    for_each_index(Exec::parallel, param_sets, [&](std::size_t p) {
        Rng rng(derive_seed(seed, Stream::test, 20000 + p));
        nn::NetworkParams params = nn::init_params(
            p % 2 ? nn::Architecture::isacnn(len, cfg.n_tx) : nn::Architecture::fcnn(len, cfg.n_tx), rng.next_u64());
        // Blow up some parameter sets to drive the heads into saturation.
        const double spread = std::pow(10.0, rng.uniform(-2.0, 3.0));
        for (double& w : params.weights) {
            w += spread * rng.normal();
        }
        nn::Batch x(kInputsPerParams, nn::Shape{1, len});
        std::vector<double> budgets(kInputsPerParams);
        for (int i = 0; i < kInputsPerParams; ++i) {
            const double scale = std::pow(10.0, rng.uniform(-8.0, 4.0));
            for (int j = 0; j < len; ++j) {
                x.row(i)[j] = scale * rng.normal();
            }
            budgets[i] = std::pow(10.0, rng.uniform(-6.0, 12.0));
        }
        const nn::Mode mode = p % 4 < 2 ? nn::Mode::train : nn::Mode::infer;
        for (const auto& o : forward(params, x, budgets, mode, nullptr, Exec::serial)) {
            const RVec& s = o.sigma_pred.values;
            if ((s.array() < 0.0).any() || !s.allFinite() || !is_descending(s) || l1_sum(s) > o.sigma_pred.budget) {
                ++bad[p];
            }
        }
    });
    double violations = 0.0;
    for (int b : bad) {
        violations += b;
    }
    return make_result("lambda_output_feasible", violations, 0.0);
}

std::vector<PropertyResult> prop_pgrad_vs_grid(int scenes, std::uint64_t seed)
{
    double below_average = 0.0;
    double steps_apart = 0.0;
    for (int t = 0; t < scenes; ++t) {
        SystemConfig cfg = desk_config();
        cfg.n_tx = 2;
        const Scene sc = generate_scene(cfg, Stream::test, derive_seed(seed, Stream::test, 30000 + t));
        const double alpha = 0.3 + 0.2 * (t % 3);
        const double res = sc.sense_power / 200.0;
        const OracleResult grid = grid_oracle(sc, alpha, res);
        const GradientAscentResult pg = projected_gradient(sc, alpha);
        const double avg = wsnr(baseline_average(sc).values, sc, alpha).wsnr;
        below_average = std::max(below_average, avg - pg.wsnr);
        // Moving one grid step changes the objective by at most about the
        // step times the l1 norm of the gradient.
        const double slope = std::max(wsnr_gradient(pg.spectrum.values, sc, alpha).cwiseAbs().sum(),
                                      wsnr_gradient(grid.best_sigma_s.values, sc, alpha).cwiseAbs().sum());
        steps_apart = std::max(steps_apart, std::abs(pg.wsnr - grid.best_wsnr) / (res * slope + 1e-12));
    }
    return {make_result("pgrad_not_below_average", std::max(below_average, 0.0), 1e-12),
            make_result("pgrad_within_one_grid_step", steps_apart, 1.0)};
}

std::vector<PropertyResult> run_verify(const std::string& scope, std::uint64_t seed)
{
    const bool all = scope == "all";
    if (!all && scope != "lemmas" && scope != "gradients" && scope != "oracles") {
        throw std::invalid_argument("unknown verify scope '" + scope + "' (lemmas, gradients, oracles, all)");
    }
    std::vector<PropertyResult> out;
    if (all || scope == "lemmas") {
        out.push_back(prop_kron_vec(100, seed));
        out.push_back(prop_kron_det(100, seed));
        out.push_back(prop_mi_kron_form(20, seed));
        out.push_back(prop_mi_aligned(50, seed));
        out.push_back(prop_mi_upper_bound(50, seed));
        out.push_back(prop_mvdr_dominates(20, 1000, seed));
        out.push_back(prop_mvdr_closed_form(20, seed));
    }
    if (all || scope == "gradients") {
        out.push_back(prop_sigma_gradient(20, seed));
        out.push_back(prop_network_gradient(seed));
    }
    if (all || scope == "oracles") {
        for (auto& r : prop_waterfill(20, seed)) {
            out.push_back(std::move(r));
        }
        for (auto& r : prop_pgrad_vs_grid(12, seed)) {
            out.push_back(std::move(r));
        }
        out.push_back(prop_lambda_feasible(10000, seed));
    }
    return out;
}

std::string format_report(const std::vector<PropertyResult>& results)
{
    std::ostringstream out;
    out.precision(6);
    out << "property,residual,threshold,pass\n";
    for (const auto& r : results) {
        out << r.name << ',' << std::scientific << r.residual << ',' << r.threshold << ',' << (r.pass ? 1 : 0) << '\n';
    }
    return out.str();
}

} // namespace isaclab
