// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
// Exit status is nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "isaclab/experiment.hpp"
#include "isaclab/isacnn.hpp"
#include "isaclab/verify.hpp"

using namespace isaclab;

namespace {

constexpr std::uint64_t kSeed = 20240601;

// Tolerances.
constexpr double kKronVecTol = 1e-10;
constexpr double kKronDetTol = 1e-8;
constexpr double kMiEqualTol = 1e-8;
constexpr double kMiBoundTol = 1e-9;
constexpr double kMvdrClosedTol = 1e-10;
constexpr double kMvdrSlack = 1e-12; // relative rounding allowance for random beams
constexpr double kWfKktTol = 1e-10;
constexpr double kWfPowerTol = 1e-12;
constexpr double kWfGridTol = 1e-6;
constexpr double kSigmaGradTol = 1e-6;
constexpr double kNetGradTol = 1e-4;
constexpr double kAlphaZeroWsnr = 0.98;
constexpr double kOracleRatio = 0.95;
constexpr double kDominanceMargin = -0.005;
constexpr double kCsiDegradation = 0.05;

// Runtime limits in seconds.
constexpr double kLemmaSecs = 5;
constexpr double kMiSecs = 30;
constexpr double kMvdrSecs = 30;
constexpr double kWaterfillSecs = 60;
constexpr double kGradientSecs = 120;
constexpr double kFeasibleSecs = 10;

constexpr int kTrainSamples = 2000;
constexpr int kEvalSamples = 200;

SystemConfig desk(int n_tx = 4)
{
    SystemConfig cfg = desk_config();
    cfg.n_tx = n_tx;
    cfg.seed = kSeed;
    return cfg;
}

TrainConfig desk_training()
{
    TrainConfig tc;  // Table II protocol unchanged: Adam 1e-3, batch 256, 500 epochs, patience 20/10
    tc.seed = kSeed;
    return tc;
}

ExperimentSpec desk_experiment(const std::string& name, SweepVar var, std::vector<double> values,
                               std::vector<Scheme> schemes, int n_tx = 4)
{
    ExperimentSpec spec;
    spec.name = name;
    spec.base = desk(n_tx);
    spec.sweep = var;
    spec.sweep_values = std::move(values);
    spec.schemes = std::move(schemes);
    spec.eval_samples = kEvalSamples;
    spec.train_samples = kTrainSamples;
    spec.train = desk_training();
    return spec;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run(int id, const std::string& title, double limit_secs, const std::function<Outcome()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    std::ostringstream timing;
    timing.precision(3);
    timing << secs << " s";
    if (limit_secs > 0) {
        timing << ", limit " << limit_secs << " s";
        if (secs > limit_secs) {
            o.pass = false;
            o.detail += "; over time limit";
        }
    }
    if (!o.pass) {
        ++failures;
    }
    std::printf("%s  %2d  %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(),
                timing.str().c_str());
    std::fflush(stdout);
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

std::string describe(const std::vector<PropertyResult>& rs, bool& all)
{
    std::string out;
    all = true;
    for (const auto& r : rs) {
        all = all && r.pass;
        if (!out.empty()) {
            out += ", ";
        }
        out += r.name + " " + fmt(r.residual) + (r.pass ? " <= " : " > ") + fmt(r.threshold);
    }
    return out;
}

Outcome from_properties(std::vector<PropertyResult> rs, const std::vector<double>& required)
{
    // The thresholds inside the property suite must be the ones pinned here.
    for (std::size_t i = 0; i < rs.size(); ++i) {
        if (rs[i].threshold != required[i]) {
            return {false, rs[i].name + " threshold " + fmt(rs[i].threshold) + " != " + fmt(required[i])};
        }
    }
    bool all = false;
    const std::string d = describe(rs, all);
    return {all, d};
}

const ResultRow& find(const std::vector<ResultRow>& rows, Scheme s, double value)
{
    for (const auto& r : rows) {
        if (r.scheme == s && r.sweep_value == value) {
            return r;
        }
    }
    throw std::logic_error("missing result row");
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

int main()
{
    std::printf("acceptance run, seed %llu, %d OpenMP threads\n", static_cast<unsigned long long>(kSeed),
                max_threads());

    run(1, "Kronecker lemmas (100 instances each)", kLemmaSecs, [] {
        return from_properties({prop_kron_vec(100, kSeed), prop_kron_det(100, kSeed)}, {kKronVecTol, kKronDetTol});
    });

    run(2, "MI form equivalence (50 aligned, 50 misaligned)", kMiSecs, [] {
        return from_properties({prop_mi_aligned(50, kSeed), prop_mi_upper_bound(50, kSeed)}, {kMiEqualTol, kMiBoundTol});
    });

    run(3, "MVDR optimality (20 scenes, K=3, N_r=6, 1000 beams/user)", kMvdrSecs, [] {
        return from_properties({prop_mvdr_dominates(20, 1000, kSeed), prop_mvdr_closed_form(20, kSeed)},
                               {kMvdrSlack, kMvdrClosedTol});
    });

    run(4, "water-filling (20 instances, N_t in {2,3})", kWaterfillSecs,
        [] { return from_properties(prop_waterfill(20, kSeed), {kWfKktTol, kWfPowerTol, kWfGridTol}); });

    run(5, "gradient fidelity (20 sigma points; tiny ISACNN, input 12)", kGradientSecs, [] {
        return from_properties({prop_sigma_gradient(20, kSeed), prop_network_gradient(kSeed)},
                               {kSigmaGradTol, kNetGradTol});
    });

    run(6, "structural feasibility (10^4 params/input pairs)", kFeasibleSecs,
        [] { return from_properties({prop_lambda_feasible(10000, kSeed)}, {0.0}); });

    run(7, "alpha=0 optimum (N_t=4, N_r=4, K=2, L=6, 2000 samples)", 0, [] {
        SystemConfig cfg = desk();
        cfg.alpha = 0.0;
        const Dataset ds = generate_dataset(cfg, kTrainSamples);
        const TrainResult r = train(ds, desk_training(), nn::ArchKind::isacnn, 0.0);
        std::vector<const Scene*> val;
        for (std::size_t i = ds.train_count(); i < ds.samples.size(); ++i) {
            val.push_back(&ds.samples[i]);
        }
        const auto spectra = predict_spectra(r.params, val);
        double mean = 0.0, power = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) {
            mean += wsnr(spectra[i].values, *val[i], 0.0).wsnr;
            power += spectra[i].values.sum() / val[i]->sense_power;
        }
        mean /= static_cast<double>(val.size());
        power /= static_cast<double>(val.size());
        return Outcome{mean >= kAlphaZeroWsnr, "mean validation wsnr " + fmt(mean) + " (>= " + fmt(kAlphaZeroWsnr) +
                                                   "), mean power fraction " + fmt(power) + ", " +
                                                   std::to_string(r.run.epoch) + " epochs"};
    });

    run(8, "oracle gap (N_t=2, alpha in {0.3,0.5,0.7}, 200 scenes, grid P_s/200)", 0, [] {
        const std::vector<double> alphas{0.3, 0.5, 0.7};
        const auto spec = desk_experiment("oracle_gap", SweepVar::alpha, alphas, {Scheme::isacnn, Scheme::oracle}, 2);
        const auto rows = run_experiment(spec, {});
        bool ok = true;
        std::string d;
        for (double a : alphas) {
            const double net = find(rows, Scheme::isacnn, a).mean_wsnr;
            const double grid = find(rows, Scheme::oracle, a).mean_wsnr;
            ok = ok && net >= kOracleRatio * grid;
            d += (d.empty() ? "" : "; ") + std::string("alpha ") + fmt(a) + ": net/grid " + fmt(net) + "/" +
                 fmt(grid) + " = " + fmt(net / grid);
        }
        return Outcome{ok, d + " (ratio >= " + fmt(kOracleRatio) + ")"};
    });

    run(9, "baseline dominance (alpha sweep, desk scale)", 0, [] {
        const std::vector<double> alphas{0.0, 0.25, 0.5, 0.75, 1.0};
        const auto spec = desk_experiment("dominance", SweepVar::alpha, alphas,
                                          {Scheme::isacnn, Scheme::average, Scheme::zf});
        const auto rows = run_experiment(spec, {});
        bool ok = true;
        std::string d;
        for (double a : alphas) {
            const double net = find(rows, Scheme::isacnn, a).mean_wsnr;
            const double avg = find(rows, Scheme::average, a).mean_wsnr;
            const double zf = find(rows, Scheme::zf, a).mean_wsnr;
            ok = ok && net - avg >= kDominanceMargin && net - zf >= kDominanceMargin;
            d += (d.empty() ? "" : "; ") + std::string("alpha ") + fmt(a) + ": net " + fmt(net) + " avg " + fmt(avg) +
                 " zf " + fmt(zf);
        }
        return Outcome{ok, d + " (margin >= " + fmt(kDominanceMargin) + ")"};
    });

    run(10, "SNR_s trend (0, 5, 10, 15 dB, trained ISACNN)", 0, [] {
        const std::vector<double> snrs{0.0, 5.0, 10.0, 15.0};
        const auto rows = run_experiment(desk_experiment("snr_trend", SweepVar::snr_s_db, snrs, {Scheme::isacnn}), {});
        bool ok = true;
        std::string rs = "R_s", rc = "R_c";
        for (std::size_t i = 0; i < snrs.size(); ++i) {
            const auto& r = find(rows, Scheme::isacnn, snrs[i]);
            rs += " " + fmt(r.mean_sense_rate);
            rc += " " + fmt(r.mean_comm_rate);
            if (i > 0) {
                const auto& prev = find(rows, Scheme::isacnn, snrs[i - 1]);
                ok = ok && r.mean_sense_rate >= prev.mean_sense_rate && r.mean_comm_rate <= prev.mean_comm_rate;
            }
        }
        return Outcome{ok, rs + "; " + rc};
    });

    run(11, "imperfect CSI (beta 0.7 vs 1)", 0, [] {
        const auto rows =
            run_experiment(desk_experiment("csi", SweepVar::csi_accuracy, {1.0, 0.7}, {Scheme::isacnn}), {});
        const double perfect = find(rows, Scheme::isacnn, 1.0).mean_wsnr;
        const double noisy = find(rows, Scheme::isacnn, 0.7).mean_wsnr;
        const double loss = (perfect - noisy) / perfect;
        return Outcome{loss <= kCsiDegradation, "wsnr " + fmt(perfect) + " -> " + fmt(noisy) + ", degradation " +
                                                    fmt(100 * loss) + "% (<= " + fmt(100 * kCsiDegradation) + "%)"};
    });

    run(12, "reproducibility (dataset and result CSV bytes)", 0, [] {
        const auto dir = std::filesystem::temp_directory_path() / "isaclab_acceptance";
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        auto path = [&](const std::string& f) { return (dir / f).string(); };
        {
            std::ofstream sys(path("sys.cfg"));
            write_system_config(sys, desk());
            std::ofstream exp(path("exp.cfg"));
            write_system_config(exp, desk(2));
            exp << "name = repro\nsweep = alpha\nsweep_values = 0.3, 0.7\nschemes = isacnn, fcnn, average, zf, "
                   "pgrad, oracle\neval_samples = 50\ntrain_samples = 400\ntrain.max_epochs = 20\n";
        }
        std::ostringstream log;
        for (const char* tag : {"1", "2"}) {
            cmd_gen_data({path("sys.cfg"), path(std::string("data") + tag + ".bin"), 500, std::nullopt}, log);
            EvalArgs ev;
            ev.config = path("exp.cfg");
            ev.out = path(std::string("results") + tag + ".csv");
            cmd_eval(ev, log);
        }
        const bool data_same = slurp(path("data1.bin")) == slurp(path("data2.bin"));
        const bool csv_same = slurp(path("results1.csv")) == slurp(path("results2.csv")) &&
                              slurp(path("results1.samples.csv")) == slurp(path("results2.samples.csv"));
        const auto bytes = slurp(path("data1.bin")).size();
        std::filesystem::remove_all(dir);
        return Outcome{data_same && csv_same && bytes > 0, std::string("dataset ") + (data_same ? "identical" : "DIFFERS") +
                                                               " (" + std::to_string(bytes) + " bytes), results " +
                                                               (csv_same ? "identical" : "DIFFER")};
    });

    std::printf("%d of 12 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
