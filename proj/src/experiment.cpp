#include "isaclab/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include "isaclab/bytes.hpp"
#include "isaclab/verify.hpp"

namespace isaclab {

std::string to_string(SweepVar v)
{
    switch (v) {
    case SweepVar::alpha:
        return "alpha";
    case SweepVar::snr_s_db:
        return "snr_s_db";
    case SweepVar::snr_c_db:
        return "snr_c_db";
    case SweepVar::n_cu:
        return "n_cu";
    case SweepVar::n_tx:
        return "n_tx";
    case SweepVar::n_rx:
        return "n_rx";
    case SweepVar::csi_accuracy:
        return "csi_accuracy";
    }
    return "unknown";
}

SweepVar sweep_var_from(const std::string& name)
{
    for (SweepVar v : {SweepVar::alpha, SweepVar::snr_s_db, SweepVar::snr_c_db, SweepVar::n_cu, SweepVar::n_tx,
                       SweepVar::n_rx, SweepVar::csi_accuracy}) {
        if (to_string(v) == name) {
            return v;
        }
    }
    throw ConfigError("unknown sweep variable '" + name +
                      "' (alpha, snr_s_db, snr_c_db, n_cu, n_tx, n_rx, csi_accuracy)");
}

namespace {

int as_count(SweepVar var, double value)
{
    if (value != std::round(value) || value < 1.0 || value > 4096.0) {
        throw ConfigError(to_string(var) + " sweep values must be positive integers");
    }
    return static_cast<int>(value);
}

} // namespace

SystemConfig apply_sweep(const SystemConfig& base, SweepVar var, double value)
{
    if (!std::isfinite(value)) {
        throw ConfigError("sweep values must be finite");
    }
    SystemConfig cfg = base;
    switch (var) {
    case SweepVar::alpha:
        cfg.alpha = value;
        break;
    case SweepVar::snr_s_db:
        cfg.snr_s_db = value;
        break;
    case SweepVar::snr_c_db:
        cfg.snr_c_db = value;
        break;
    case SweepVar::n_cu:
        cfg.n_cu = as_count(var, value);
        break;
    case SweepVar::n_tx:
        cfg.n_tx = as_count(var, value);
        break;
    case SweepVar::n_rx:
        cfg.n_rx = as_count(var, value);
        break;
    case SweepVar::csi_accuracy:
        cfg.csi_accuracy = value;
        break;
    }
    cfg.validate();
    return cfg;
}

std::string to_string(Scheme s)
{
    switch (s) {
    case Scheme::isacnn:
        return "isacnn";
    case Scheme::fcnn:
        return "fcnn";
    case Scheme::average:
        return "average";
    case Scheme::zf:
        return "zf";
    case Scheme::pgrad:
        return "pgrad";
    case Scheme::oracle:
        return "oracle";
    }
    return "unknown";
}

Scheme scheme_from(const std::string& name)
{
    for (Scheme s : {Scheme::isacnn, Scheme::fcnn, Scheme::average, Scheme::zf, Scheme::pgrad, Scheme::oracle}) {
        if (to_string(s) == name) {
            return s;
        }
    }
    throw ConfigError("unknown scheme '" + name + "' (isacnn, fcnn, average, zf, pgrad, oracle)");
}

void ExperimentSpec::validate() const
{
    if (sweep_values.empty()) {
        throw ConfigError("experiment: sweep_values must not be empty");
    }
    if (schemes.empty()) {
        throw ConfigError("experiment: no schemes selected");
    }
    if (eval_samples < 1 || train_samples < 2 || pgrad_steps < 1) {
        throw ConfigError("experiment: eval_samples, train_samples and pgrad_steps must be positive");
    }
    if (!(oracle_resolution > 0.0 && oracle_resolution <= 1.0)) {
        throw ConfigError("experiment: oracle_resolution must be in (0, 1]");
    }
    train.validate();
    const bool wants_oracle = std::find(schemes.begin(), schemes.end(), Scheme::oracle) != schemes.end();
    const bool wants_zf = std::find(schemes.begin(), schemes.end(), Scheme::zf) != schemes.end();
    for (double v : sweep_values) {
        const SystemConfig cfg = apply_sweep(base, sweep, v);
        if (wants_oracle && cfg.n_tx > 3) {
            throw ConfigError("experiment: the oracle scheme needs n_tx <= 3");
        }
        if (wants_zf && cfg.n_cu > cfg.n_rx) {
            throw ConfigError("experiment: the zf scheme needs n_cu <= n_rx");
        }
    }
}

ExperimentSpec experiment_from(const KeyValues& kv)
{
    ExperimentSpec spec;
    for (const auto& [key, value] : kv) {
        if (apply_system_key(spec.base, key, value)) {
            continue;
        }
        if (key == "name") {
            spec.name = value;
        } else if (key == "sweep") {
            spec.sweep = sweep_var_from(value);
        } else if (key == "sweep_values") {
            spec.sweep_values = parse_double_list(key, value);
        } else if (key == "schemes") {
            spec.schemes.clear();
            for (const auto& s : split_list(value)) {
                spec.schemes.push_back(scheme_from(s));
            }
        } else if (key == "eval_samples") {
            spec.eval_samples = static_cast<int>(parse_int(key, value));
        } else if (key == "train_samples") {
            spec.train_samples = static_cast<int>(parse_int(key, value));
        } else if (key == "oracle_resolution") {
            spec.oracle_resolution = parse_double(key, value);
        } else if (key == "pgrad_steps") {
            spec.pgrad_steps = static_cast<int>(parse_int(key, value));
        } else if (key.rfind("train.", 0) == 0) {
            apply_train_key(spec.train, key.substr(6), value);
        } else {
            throw ConfigError("unknown experiment key '" + key + "'");
        }
    }
    spec.base.validate();
    spec.validate();
    return spec;
}

ExperimentSpec load_experiment(const std::string& path)
{
    return experiment_from(read_key_values(path));
}

void apply_sweep_flag(ExperimentSpec& spec, const std::string& flag)
{
    const auto eq = flag.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("--sweep expects var=v1,v2,...");
    }
    spec.sweep = sweep_var_from(flag.substr(0, eq));
    spec.sweep_values = parse_double_list("sweep", flag.substr(eq + 1));
}

namespace {

using Clock = std::chrono::steady_clock;

struct SchemeRunner {
    Scheme scheme;
    const nn::NetworkParams* params = nullptr;
};

/// Power spectrum and rates of one scheme on one scene.
SampleResult solve_one(const SchemeRunner& r, const ExperimentSpec& spec, const Scene& sc, double alpha)
{
    RatePair rates;
    switch (r.scheme) {
    case Scheme::average:
        rates = wsnr(baseline_average(sc).values, sc, alpha);
        break;
    case Scheme::zf: {
        const ZeroForcing z = baseline_zf(sc);
        rates = compose_rates(reduced_sense_rate(z.spectrum.values, sc),
                              comm_rate_for_beams(z.beams.beams, z.spectrum.values, sc), sc, alpha);
        break;
    }
    case Scheme::pgrad:
        rates = wsnr(projected_gradient(sc, alpha, spec.pgrad_steps).spectrum.values, sc, alpha);
        break;
    case Scheme::oracle:
        rates = wsnr(grid_oracle(sc, alpha, spec.oracle_resolution * sc.sense_power, Exec::serial).best_sigma_s.values,
                     sc, alpha);
        break;
    case Scheme::isacnn:
    case Scheme::fcnn:
        rates = predict(*r.params, sc, alpha).rates;
        break;
    }
    return {rates.sense_rate, rates.comm_rate, sc.norm_sense, sc.norm_comm, rates.wsnr};
}

/// Full single-scene pipeline as a deployed scheme would run it, including
/// receive beams, for latency measurement.
void predict_one(const SchemeRunner& r, const ExperimentSpec& spec, const Scene& sc, double alpha)
{
    switch (r.scheme) {
    case Scheme::average:
        (void)recover_beams(baseline_average(sc).values, sc);
        break;
    case Scheme::zf:
        (void)baseline_zf(sc);
        break;
    case Scheme::pgrad:
        (void)recover_beams(projected_gradient(sc, alpha, spec.pgrad_steps).spectrum.values, sc);
        break;
    case Scheme::oracle:
        (void)recover_beams(
            grid_oracle(sc, alpha, spec.oracle_resolution * sc.sense_power, Exec::serial).best_sigma_s.values, sc);
        break;
    case Scheme::isacnn:
    case Scheme::fcnn:
        (void)predict(*r.params, sc, alpha);
        break;
    }
}

constexpr int kTimingPredictions = 1000;

double median_latency_ms(const SchemeRunner& r, const ExperimentSpec& spec, const std::vector<const Scene*>& scenes,
                         double alpha)
{
    const std::size_t n = std::max<std::size_t>(kTimingPredictions, scenes.size());
    std::vector<double> ms(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto t0 = Clock::now();
        predict_one(r, spec, *scenes[i % scenes.size()], alpha);
        ms[i] = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    }
    std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(n / 2), ms.end());
    return ms[n / 2];
}

} // namespace

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const EvalOptions& opts)
{
    spec.validate();
    std::vector<ResultRow> rows;
    for (double value : spec.sweep_values) {
        const SystemConfig cfg = apply_sweep(spec.base, spec.sweep, value);
        const double alpha = cfg.alpha;
        const Dataset eval =
            generate_dataset(cfg, static_cast<std::size_t>(spec.eval_samples), Stream::eval, opts.exec);
        std::vector<const Scene*> scenes;
        for (const auto& s : eval.samples) {
            scenes.push_back(&s);
        }
        std::map<nn::ArchKind, nn::NetworkParams> nets;
        for (Scheme scheme : spec.schemes) {
            SchemeRunner runner{scheme, nullptr};
            if (scheme == Scheme::isacnn || scheme == Scheme::fcnn) {
                const nn::ArchKind kind = scheme == Scheme::isacnn ? nn::ArchKind::isacnn : nn::ArchKind::fcnn;
                if (opts.checkpoint && opts.checkpoint->run.best.arch.kind == kind) {
                    const nn::NetworkParams& p = opts.checkpoint->run.best;
                    if (p.arch.n_tx != cfg.n_tx || p.arch.input_len != cfg.feature_len()) {
                        throw DimensionError("checkpoint network (n_tx " + std::to_string(p.arch.n_tx) + ", input " +
                                             std::to_string(p.arch.input_len) + ") does not match the sweep point " +
                                             to_string(spec.sweep) + "=" + std::to_string(value));
                    }
                    nets[kind] = p;
                } else if (!nets.count(kind)) {
                    if (opts.progress) {
                        *opts.progress << "training " << to_string(scheme) << " for " << to_string(spec.sweep) << "="
                                       << value << '\n';
                    }
                    TrainConfig tc = spec.train;
                    const Dataset data =
                        generate_dataset(cfg, static_cast<std::size_t>(spec.train_samples), Stream::train, opts.exec);
                    nets[kind] = train(data, tc, kind, alpha, {}, opts.exec).params;
                }
                runner.params = &nets[kind];
            }
            ResultRow row;
            row.scheme = scheme;
            row.sweep_value = value;
            row.samples = static_cast<int>(scenes.size());
            row.per_sample.resize(scenes.size());
            for_each_index(opts.exec, scenes.size(),
                           [&](std::size_t i) { row.per_sample[i] = solve_one(runner, spec, *scenes[i], alpha); });
            for (const auto& s : row.per_sample) {
                row.mean_wsnr += s.wsnr;
                row.mean_sense_rate += s.sense_rate;
                row.mean_comm_rate += s.comm_rate;
            }
            row.mean_wsnr /= row.samples;
            row.mean_sense_rate /= row.samples;
            row.mean_comm_rate /= row.samples;
            row.mean_sum_comm_rate = cfg.n_cu * row.mean_comm_rate;
            if (opts.timing) {
                row.ms_per_prediction = median_latency_ms(runner, spec, scenes, alpha);
            }
            if (opts.progress) {
                *opts.progress << to_string(scheme) << ' ' << to_string(spec.sweep) << '=' << value << " mean wsnr "
                               << row.mean_wsnr << '\n';
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

std::string results_csv(const ExperimentSpec& spec, const std::vector<ResultRow>& rows)
{
    std::ostringstream out;
    out.precision(17);
    out << kResultsSchema << '\n';
    out << "experiment,scheme,sweep_var,sweep_value,mean_wsnr,mean_sense_rate,mean_comm_rate,mean_sum_comm_rate,"
           "samples,ms_per_prediction\n";
    for (const auto& r : rows) {
        out << spec.name << ',' << to_string(r.scheme) << ',' << to_string(spec.sweep) << ',' << r.sweep_value << ','
            << r.mean_wsnr << ',' << r.mean_sense_rate << ',' << r.mean_comm_rate << ',' << r.mean_sum_comm_rate << ','
            << r.samples << ',';
        if (r.ms_per_prediction) {
            out << *r.ms_per_prediction;
        } else {
            out << "NA";
        }
        out << '\n';
    }
    return out.str();
}

std::string samples_csv(const ExperimentSpec& spec, const std::vector<ResultRow>& rows)
{
    std::ostringstream out;
    out.precision(17);
    out << "# isaclab samples v1\n";
    out << "experiment,scheme,sweep_var,sweep_value,alpha,sample,sense_rate,comm_rate,norm_sense,norm_comm,wsnr\n";
    for (const auto& r : rows) {
        const double alpha = apply_sweep(spec.base, spec.sweep, r.sweep_value).alpha;
        for (std::size_t i = 0; i < r.per_sample.size(); ++i) {
            const auto& s = r.per_sample[i];
            out << spec.name << ',' << to_string(r.scheme) << ',' << to_string(spec.sweep) << ',' << r.sweep_value
                << ',' << alpha << ',' << i << ',' << s.sense_rate << ',' << s.comm_rate << ',' << s.norm_sense << ','
                << s.norm_comm << ',' << s.wsnr << '\n';
        }
    }
    return out.str();
}

namespace {

void write_text(const std::string& path, const std::string& text)
{
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

std::string samples_path(const std::string& results_path)
{
    const std::string ext = ".csv";
    if (results_path.size() > ext.size() &&
        results_path.compare(results_path.size() - ext.size(), ext.size(), ext) == 0) {
        return results_path.substr(0, results_path.size() - ext.size()) + ".samples.csv";
    }
    return results_path + ".samples.csv";
}

} // namespace

int cmd_gen_data(const GenDataArgs& args, std::ostream& log)
{
    if (args.out.empty()) {
        throw ConfigError("gen-data: --out is required");
    }
    SystemConfig cfg = args.config.empty() ? SystemConfig{} : load_system_config(args.config);
    cfg.seed = resolve_seed(args.seed, cfg.seed);
    cfg.validate();
    const Dataset ds = generate_dataset(cfg, args.samples);
    write_dataset(args.out, ds);
    log << "wrote " << ds.samples.size() << " samples (feature length " << cfg.feature_len() << ", seed " << cfg.seed
        << ") to " << args.out << '\n';
    return 0;
}

int cmd_train(const TrainArgs& args, std::ostream& log)
{
    if (args.data.empty() || args.out.empty()) {
        throw ConfigError("train: --data and --out are required");
    }
    const Dataset ds = read_dataset(args.data);
    const nn::ArchKind kind = nn::arch_kind_from(args.arch);
    const double alpha = args.alpha.value_or(ds.config.alpha);

    Checkpoint ck;
    if (!args.resume.empty()) {
        ck = read_checkpoint(args.resume);
        if (ck.run.current.arch.kind != kind) {
            throw ConfigError("train: checkpoint architecture is " + nn::to_string(ck.run.current.arch.kind));
        }
        if (ck.alpha != alpha) {
            throw ConfigError("train: checkpoint was trained with a different alpha");
        }
        if (!args.config.empty()) {
            ck.config = load_train_config(args.config);
        }
    } else {
        ck.config = args.config.empty() ? TrainConfig{} : load_train_config(args.config);
        ck.config.seed = resolve_seed(args.seed, ck.config.seed);
        ck.alpha = alpha;
        const Scene& first = ds.samples.at(0);
        ck.run = start_run(make_architecture(kind, ds.config.feature_len(), first.n_tx()), ck.config);
    }
    const std::string log_path = args.log.empty() ? args.out + ".log.csv" : args.log;
    int status = 0;
    try {
        continue_training(ck.run, ds, ck.config, alpha, [&](const EpochRecord& r) {
            if (r.epoch % 10 == 0 || r.epoch == 1) {
                log << "epoch " << r.epoch << " train " << r.train_loss << " val " << r.val_loss << " lr " << r.lr
                    << '\n';
            }
        });
        log << "stopped after " << ck.run.epoch << " epochs (" << ck.run.stop_reason << "), best val loss "
            << ck.run.best_val << " at epoch " << ck.run.best_epoch << '\n';
        write_checkpoint(args.out, ck);
    } catch (const TrainingDiverged& e) {
        log << "error: " << e.what() << '\n';
        status = 3;
    }
    write_text(log_path, history_csv(ck.run.history));
    return status;
}

int cmd_eval(const EvalArgs& args, std::ostream& log)
{
    if (args.config.empty()) {
        throw ConfigError("eval: --config (experiment file) is required");
    }
    ExperimentSpec spec = load_experiment(args.config);
    if (!args.sweep.empty()) {
        apply_sweep_flag(spec, args.sweep);
    }
    if (!args.schemes.empty()) {
        spec.schemes.clear();
        for (const auto& s : split_list(args.schemes)) {
            spec.schemes.push_back(scheme_from(s));
        }
    }
    if (args.samples) {
        spec.eval_samples = *args.samples;
    }
    const std::uint64_t seed = resolve_seed(args.seed, spec.base.seed);
    if (seed != spec.base.seed) {
        spec.base.seed = seed;
        spec.train.seed = seed;
    }
    spec.validate();
    EvalOptions opts;
    opts.timing = args.timing;
    opts.progress = &log;
    if (!args.checkpoint.empty()) {
        opts.checkpoint = read_checkpoint(args.checkpoint);
    }
    const auto rows = run_experiment(spec, opts);
    const std::string out = args.out.empty() ? spec.name + "_results.csv" : args.out;
    write_text(out, results_csv(spec, rows));
    write_text(samples_path(out), samples_csv(spec, rows));
    log << "wrote " << rows.size() << " rows to " << out << '\n';
    return 0;
}

int cmd_verify(const std::string& scope, std::optional<std::uint64_t> seed, const std::string& out, std::ostream& log)
{
    const auto results = run_verify(scope, resolve_seed(seed, 1));
    const std::string report = format_report(results);
    log << report;
    if (!out.empty()) {
        write_text(out, report);
    }
    const bool ok = std::all_of(results.begin(), results.end(), [](const PropertyResult& r) { return r.pass; });
    return ok ? 0 : 1;
}

} // namespace isaclab
