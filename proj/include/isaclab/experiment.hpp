#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "isaclab/config.hpp"
#include "isaclab/isacnn.hpp"

namespace isaclab {

enum class SweepVar { alpha, snr_s_db, snr_c_db, n_cu, n_tx, n_rx, csi_accuracy };

std::string to_string(SweepVar v);
SweepVar sweep_var_from(const std::string& name);

/// Applies one sweep value to a copy of the base config.
SystemConfig apply_sweep(const SystemConfig& base, SweepVar var, double value);

enum class Scheme { isacnn, fcnn, average, zf, pgrad, oracle };

std::string to_string(Scheme s);
Scheme scheme_from(const std::string& name);

struct ExperimentSpec {
    std::string name = "experiment";
    SystemConfig base;
    SweepVar sweep = SweepVar::alpha;
    std::vector<double> sweep_values{0.5};
    std::vector<Scheme> schemes{Scheme::average, Scheme::pgrad};
    int eval_samples = 200;
    int train_samples = 2000;               ///< per sweep point, when networks are retrained
    double oracle_resolution = 1.0 / 200.0; ///< grid step as a fraction of P_s
    int pgrad_steps = 2000;
    TrainConfig train;

    void validate() const;
};

/// Keys: the system keys, plus name, sweep, sweep_values, schemes,
/// eval_samples, train_samples, oracle_resolution, pgrad_steps and
/// train.<field> for the training configuration.
ExperimentSpec experiment_from(const KeyValues& kv);
ExperimentSpec load_experiment(const std::string& path);

/// `var=v1,v2,...`
void apply_sweep_flag(ExperimentSpec& spec, const std::string& flag);

struct SampleResult {
    double sense_rate = 0.0;
    double comm_rate = 0.0;
    double norm_sense = 0.0;
    double norm_comm = 0.0;
    double wsnr = 0.0;
};

struct ResultRow {
    Scheme scheme = Scheme::average;
    double sweep_value = 0.0;
    double mean_wsnr = 0.0;
    double mean_sense_rate = 0.0;
    double mean_comm_rate = 0.0;
    double mean_sum_comm_rate = 0.0; ///< n_cu * mean_comm_rate
    int samples = 0;
    std::optional<double> ms_per_prediction;
    std::vector<SampleResult> per_sample;
};

struct EvalOptions {
    std::optional<Checkpoint> checkpoint; ///< used for its architecture's scheme instead of retraining
    bool timing = false;                  ///< median single-sample latency over >= 1000 predictions
    Exec exec = Exec::parallel;
    std::ostream* progress = nullptr;
};

std::vector<ResultRow> run_experiment(const ExperimentSpec& spec, const EvalOptions& opts);

inline constexpr const char* kResultsSchema = "# isaclab results v1";

/// Summary table: one row per (scheme, sweep value).
std::string results_csv(const ExperimentSpec& spec, const std::vector<ResultRow>& rows);
/// Per-sample rates and normalizers, from which every summary wsnr can be
/// recomputed.
std::string samples_csv(const ExperimentSpec& spec, const std::vector<ResultRow>& rows);

/// CLI entry points; each returns a process exit code.
struct GenDataArgs {
    std::string config;
    std::string out;
    std::size_t samples = 10000;
    std::optional<std::uint64_t> seed;
};
int cmd_gen_data(const GenDataArgs& args, std::ostream& log);

struct TrainArgs {
    std::string data;
    std::string config; ///< training key/value file, optional
    std::string arch = "isacnn";
    std::optional<double> alpha; ///< defaults to the dataset's alpha
    std::string out;
    std::string log; ///< per-epoch CSV, default <out>.log.csv
    std::string resume;
    std::optional<std::uint64_t> seed;
};
int cmd_train(const TrainArgs& args, std::ostream& log);

struct EvalArgs {
    std::string config;
    std::string checkpoint;
    std::string out;
    std::string schemes; ///< comma list overriding the spec
    std::string sweep;   ///< var=v1,v2 overriding the spec
    std::optional<int> samples;
    std::optional<std::uint64_t> seed;
    bool timing = false;
};
int cmd_eval(const EvalArgs& args, std::ostream& log);

int cmd_verify(const std::string& scope, std::optional<std::uint64_t> seed, const std::string& out, std::ostream& log);

} // namespace isaclab
