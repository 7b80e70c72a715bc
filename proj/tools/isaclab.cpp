// Command-line front end: gen-data, train, eval, verify.

#include <iostream>

#include "CLI11.hpp"
#include "isaclab/experiment.hpp"

namespace {

std::optional<std::uint64_t> seed_opt(const CLI::Option* opt, std::uint64_t value)
{
    return opt->count() > 0 ? std::optional<std::uint64_t>(value) : std::nullopt;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Uplink ISAC waveform and beamforming design: data generation, training, evaluation"};
    app.require_subcommand(1);

    isaclab::GenDataArgs gen;
    std::uint64_t gen_seed = 0;
    auto* gen_cmd = app.add_subcommand("gen-data", "Generate a dataset of scenes with precomputed normalizers");
    gen_cmd->add_option("--config", gen.config, "System config (key = value)");
    gen_cmd->add_option("--out", gen.out, "Output dataset file")->required();
    gen_cmd->add_option("--samples", gen.samples, "Number of scenes")->capture_default_str();
    auto* gen_seed_opt = gen_cmd->add_option("--seed", gen_seed, "Seed (overrides ISACLAB_SEED and the config)");

    isaclab::TrainArgs tr;
    double tr_alpha = 0.0;
    std::uint64_t tr_seed = 0;
    auto* train_cmd = app.add_subcommand("train", "Train a network on a dataset");
    train_cmd->add_option("--data", tr.data, "Dataset file")->required();
    train_cmd->add_option("--config", tr.config, "Training config (key = value)");
    train_cmd->add_option("--arch", tr.arch, "isacnn or fcnn")->capture_default_str();
    auto* tr_alpha_opt = train_cmd->add_option("--alpha", tr_alpha, "Sensing weight (default: dataset alpha)");
    train_cmd->add_option("--out", tr.out, "Checkpoint file")->required();
    train_cmd->add_option("--log", tr.log, "Per-epoch CSV (default: <out>.log.csv)");
    train_cmd->add_option("--resume", tr.resume, "Continue from this checkpoint");
    auto* tr_seed_opt = train_cmd->add_option("--seed", tr_seed, "Initialization and shuffling seed");

    isaclab::EvalArgs ev;
    int ev_samples = 0;
    std::uint64_t ev_seed = 0;
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate schemes over a parameter sweep");
    eval_cmd->add_option("--config", ev.config, "Experiment file (key = value)")->required();
    eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained network to use instead of retraining");
    eval_cmd->add_option("--out", ev.out, "Results CSV (per-sample CSV is written alongside)");
    eval_cmd->add_option("--scheme", ev.schemes, "Comma list: isacnn,fcnn,average,zf,pgrad,oracle");
    eval_cmd->add_option("--sweep", ev.sweep, "var=v1,v2,... overriding the experiment file");
    auto* ev_samples_opt = eval_cmd->add_option("--samples", ev_samples, "Evaluation scenes per sweep point");
    auto* ev_seed_opt = eval_cmd->add_option("--seed", ev_seed, "Seed for scenes and training");
    eval_cmd->add_flag("--timing", ev.timing, "Measure median per-prediction latency (>= 1000 predictions)");

    std::string scope = "all";
    std::string verify_out;
    std::uint64_t verify_seed = 0;
    auto* verify_cmd = app.add_subcommand("verify", "Run numerical property checks");
    verify_cmd->add_option("--scope", scope, "lemmas, gradients, oracles or all")->capture_default_str();
    verify_cmd->add_option("--out", verify_out, "Also write the report here");
    auto* verify_seed_opt = verify_cmd->add_option("--seed", verify_seed, "Seed for random instances");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen_cmd) {
            gen.seed = seed_opt(gen_seed_opt, gen_seed);
            return isaclab::cmd_gen_data(gen, std::cerr);
        }
        if (*train_cmd) {
            if (tr_alpha_opt->count() > 0) {
                tr.alpha = tr_alpha;
            }
            tr.seed = seed_opt(tr_seed_opt, tr_seed);
            return isaclab::cmd_train(tr, std::cerr);
        }
        if (*eval_cmd) {
            if (ev_samples_opt->count() > 0) {
                ev.samples = ev_samples;
            }
            ev.seed = seed_opt(ev_seed_opt, ev_seed);
            return isaclab::cmd_eval(ev, std::cerr);
        }
        if (*verify_cmd) {
            return isaclab::cmd_verify(scope, seed_opt(verify_seed_opt, verify_seed), verify_out, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
