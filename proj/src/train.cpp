#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>

#include "isaclab/config.hpp"
#include "isaclab/isacnn.hpp"
#include "isaclab/rng.hpp"

namespace isaclab {

LambdaOutput lambda_forward(const RVec& theta, double eta, double budget)
{
    const auto n = static_cast<int>(theta.size());
    if (n == 0) {
        throw std::invalid_argument("lambda: empty theta");
    }
    if (!(budget > 0.0) || !std::isfinite(budget)) {
        throw std::invalid_argument("lambda: budget must be positive");
    }
    LambdaOutput out;
    out.theta = theta;
    out.eta = std::clamp(eta, 0.0, 1.0);
    out.theta_sum = l1_sum(theta);
    RVec u(n);
    if (out.theta_sum > 0.0 && std::isfinite(out.theta_sum) && (theta.array() >= 0.0).all()) {
        u = theta / out.theta_sum;
    } else {
        // Degenerate head output: fall back to an even split. The gradient
        // through theta is zero in this case.
        out.theta_sum = 0.0;
        u.setConstant(1.0 / n);
    }
    out.order.resize(n);
    std::iota(out.order.begin(), out.order.end(), 0);
    std::stable_sort(out.order.begin(), out.order.end(), [&](int a, int b) { return u[a] > u[b]; });
    const double scale = out.eta * budget;
    RVec sigma(n);
    for (int i = 0; i < n; ++i) {
        sigma[i] = u[out.order[i]] * scale;
    }
    // Rounding in the normalization can push the sum a few ulps past eta *
    // budget. Shrinking to a target n ulps inside the budget makes the sum
    // fit regardless of the order it is accumulated in.
    const double limit = budget * (1.0 - (2.0 * n + 2.0) * 0x1p-53);
    while (l1_sum(sigma) > limit) {
        sigma *= 1.0 - 0x1p-52;
    }
    out.sigma_pred.values = std::move(sigma);
    out.sigma_pred.budget = budget;
    return out;
}

void lambda_backward(const LambdaOutput& out, const RVec& grad_sigma, RVec& grad_theta, double& grad_eta)
{
    const auto n = static_cast<int>(out.theta.size());
    if (grad_sigma.size() != n) {
        throw std::invalid_argument("lambda backward: gradient length mismatch");
    }
    const double budget = out.sigma_pred.budget;
    const double scale = out.eta * budget;
    RVec du = RVec::Zero(n);
    grad_eta = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = out.theta_sum > 0.0 ? out.theta[out.order[i]] / out.theta_sum : 1.0 / n;
        grad_eta += budget * grad_sigma[i] * v;
        du[out.order[i]] = grad_sigma[i] * scale;
    }
    grad_theta = RVec::Zero(n);
    if (out.theta_sum > 0.0) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j) {
            dot += du[j] * out.theta[j] / out.theta_sum;
        }
        for (int j = 0; j < n; ++j) {
            grad_theta[j] = (du[j] - dot) / out.theta_sum;
        }
    }
}

double loss(const std::vector<PowerSpectrum>& sigma, const std::vector<const Scene*>& scenes, double alpha)
{
    if (sigma.size() != scenes.size() || sigma.empty()) {
        throw std::invalid_argument("loss: need one spectrum per scene");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < sigma.size(); ++i) {
        total += wsnr(sigma[i].values, *scenes[i], alpha).wsnr;
    }
    return -total / static_cast<double>(sigma.size());
}

RVec loss_grad_sigma(const RVec& sigma, const Scene& scene, double alpha)
{
    return -wsnr_gradient(sigma, scene, alpha);
}

nn::Batch feature_batch(const std::vector<const Scene*>& scenes)
{
    if (scenes.empty()) {
        throw std::invalid_argument("feature batch: no scenes");
    }
    const int len = static_cast<int>(build_features(*scenes.front()).size());
    nn::Batch b(static_cast<int>(scenes.size()), nn::Shape{1, len});
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const RVec f = build_features(*scenes[s]);
        if (f.size() != len) {
            throw DimensionError("feature batch: scenes have different feature lengths");
        }
        std::copy(f.data(), f.data() + len, b.row(static_cast<int>(s)));
    }
    return b;
}

nn::Architecture make_architecture(nn::ArchKind kind, int input_len, int n_tx)
{
    return kind == nn::ArchKind::isacnn ? nn::Architecture::isacnn(input_len, n_tx)
                                        : nn::Architecture::fcnn(input_len, n_tx);
}

std::vector<LambdaOutput> forward(const nn::NetworkParams& params, const nn::Batch& features,
                                  const std::vector<double>& budgets, nn::Mode mode, nn::ForwardCache* cache, Exec exec)
{
    if (budgets.size() != static_cast<std::size_t>(features.n)) {
        throw std::invalid_argument("forward: need one budget per sample");
    }
    const nn::HeadOutputs heads = nn::forward_heads(params, features, mode, cache, exec);
    const int n_tx = params.arch.n_tx;
    std::vector<LambdaOutput> out(features.n);
    for_each_index(exec, features.n, [&](std::size_t s) {
        const int i = static_cast<int>(s);
        const RVec theta = Eigen::Map<const RVec>(heads.theta.row(i), n_tx);
        out[s] = lambda_forward(theta, heads.eta.row(i)[0], budgets[s]);
    });
    return out;
}

std::vector<LambdaOutput> forward(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                                  nn::Mode mode, nn::ForwardCache* cache, Exec exec)
{
    for (const Scene* sc : scenes) {
        if (sc->n_tx() != params.arch.n_tx) {
            throw DimensionError("forward: scene n_tx does not match the network");
        }
    }
    std::vector<double> budgets;
    budgets.reserve(scenes.size());
    for (const Scene* sc : scenes) {
        budgets.push_back(sc->sense_power);
    }
    return forward(params, feature_batch(scenes), budgets, mode, cache, exec);
}

std::vector<double> backward(const nn::NetworkParams& params, const nn::ForwardCache& cache,
                             const std::vector<LambdaOutput>& outputs, const std::vector<RVec>& grad_sigma, Exec exec)
{
    const auto n = static_cast<int>(outputs.size());
    if (grad_sigma.size() != outputs.size()) {
        throw std::invalid_argument("backward: need one sigma gradient per output");
    }
    const int n_tx = params.arch.n_tx;
    nn::Batch g_theta(n, nn::Shape{n_tx, 1});
    nn::Batch g_eta(n, nn::Shape{1, 1});
    for_each_index(exec, n, [&](std::size_t s) {
        RVec gt;
        double ge = 0.0;
        lambda_backward(outputs[s], grad_sigma[s], gt, ge);
        std::copy(gt.data(), gt.data() + n_tx, g_theta.row(static_cast<int>(s)));
        g_eta.row(static_cast<int>(s))[0] = ge;
    });
    return nn::backward_heads(params, cache, g_theta, g_eta, exec);
}

std::string to_string(BnStats s)
{
    return s == BnStats::ema ? "ema" : "population";
}

void TrainConfig::validate() const
{
    if (!(lr_init > 0.0) || max_epochs < 0 || batch_size < 1 || early_stop_patience < 1 || plateau_patience < 1) {
        throw ConfigError("train config: lr_init > 0, max_epochs >= 0, batch_size and patiences >= 1 required");
    }
    if (!(plateau_factor > 0.0 && plateau_factor <= 1.0)) {
        throw ConfigError("train config: plateau_factor must be in (0, 1]");
    }
    if (!(val_split > 0.0 && val_split < 1.0)) {
        throw ConfigError("train config: val_split must be in (0, 1)");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
        throw ConfigError("train config: invalid Adam constants");
    }
    if (!(min_delta >= 0.0)) {
        throw ConfigError("train config: min_delta must be >= 0");
    }
}

void apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value)
{
    if (key == "lr_init") {
        cfg.lr_init = parse_double(key, value);
    } else if (key == "max_epochs") {
        cfg.max_epochs = static_cast<int>(parse_int(key, value));
    } else if (key == "batch_size") {
        cfg.batch_size = static_cast<int>(parse_int(key, value));
    } else if (key == "early_stop_patience") {
        cfg.early_stop_patience = static_cast<int>(parse_int(key, value));
    } else if (key == "plateau_patience") {
        cfg.plateau_patience = static_cast<int>(parse_int(key, value));
    } else if (key == "plateau_factor") {
        cfg.plateau_factor = parse_double(key, value);
    } else if (key == "val_split") {
        cfg.val_split = parse_double(key, value);
    } else if (key == "adam_beta1") {
        cfg.adam_beta1 = parse_double(key, value);
    } else if (key == "adam_beta2") {
        cfg.adam_beta2 = parse_double(key, value);
    } else if (key == "adam_eps") {
        cfg.adam_eps = parse_double(key, value);
    } else if (key == "min_delta") {
        cfg.min_delta = parse_double(key, value);
    } else if (key == "seed") {
        cfg.seed = parse_u64(key, value);
    } else if (key == "bn_stats") {
        if (value == "ema") {
            cfg.bn_stats = BnStats::ema;
        } else if (value == "population") {
            cfg.bn_stats = BnStats::population;
        } else {
            throw ConfigError("bn_stats must be ema or population");
        }
    } else {
        throw ConfigError("unknown training key '" + key + "'");
    }
}

TrainConfig load_train_config(const std::string& path)
{
    TrainConfig cfg;
    for (const auto& [k, v] : read_key_values(path)) {
        apply_train_key(cfg, k, v);
    }
    cfg.validate();
    return cfg;
}

TrainRun start_run(const nn::Architecture& arch, const TrainConfig& cfg)
{
    cfg.validate();
    TrainRun run;
    run.current = nn::init_params(arch, cfg.seed);
    run.best = run.current;
    run.adam.m.assign(run.current.weights.size(), 0.0);
    run.adam.v.assign(run.current.weights.size(), 0.0);
    run.lr = cfg.lr_init;
    return run;
}

namespace {

struct Split {
    std::vector<const Scene*> train;
    std::vector<const Scene*> val;
};

Split split_dataset(const Dataset& data, double val_split)
{
    const std::size_t n = data.samples.size();
    const auto n_val = static_cast<std::size_t>(std::floor(val_split * static_cast<double>(n)));
    if (n_val == 0 || n_val >= n) {
        throw std::invalid_argument("training: dataset of " + std::to_string(n) +
                                    " samples is too small for the validation split");
    }
    Split s;
    for (std::size_t i = 0; i < n; ++i) {
        (i < n - n_val ? s.train : s.val).push_back(&data.samples[i]);
    }
    return s;
}

std::vector<SceneObjective> objectives_for(const std::vector<const Scene*>& scenes, Exec exec)
{
    std::vector<std::optional<SceneObjective>> tmp(scenes.size());
    for_each_index(exec, scenes.size(), [&](std::size_t i) { tmp[i].emplace(*scenes[i]); });
    std::vector<SceneObjective> out;
    out.reserve(scenes.size());
    for (auto& o : tmp) {
        out.push_back(std::move(*o));
    }
    return out;
}

constexpr int kEvalChunk = 1024;

double mean_loss(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                 const std::vector<SceneObjective>& obj, double alpha, Exec exec)
{
    std::vector<double> per(scenes.size(), 0.0);
    for (std::size_t start = 0; start < scenes.size(); start += kEvalChunk) {
        const std::size_t stop = std::min(scenes.size(), start + kEvalChunk);
        const std::vector<const Scene*> chunk(scenes.begin() + start, scenes.begin() + stop);
        const auto outs = forward(params, chunk, nn::Mode::infer, nullptr, exec);
        for_each_index(exec, outs.size(), [&](std::size_t i) {
            per[start + i] = -obj[start + i].evaluate(outs[i].sigma_pred.values, alpha).wsnr;
        });
    }
    double total = 0.0;
    for (double v : per) {
        total += v;
    }
    return total / static_cast<double>(per.size());
}

void adam_step(nn::NetworkParams& params, AdamState& adam, const std::vector<double>& grad, double lr,
               const TrainConfig& cfg)
{
    adam.step += 1;
    const double t = static_cast<double>(adam.step);
    const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
    const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
    for (std::size_t i = 0; i < grad.size(); ++i) {
        adam.m[i] = cfg.adam_beta1 * adam.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
        adam.v[i] = cfg.adam_beta2 * adam.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
        const double mhat = adam.m[i] / c1;
        const double vhat = adam.v[i] / c2;
        params.weights[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
}

} // namespace

double evaluate_loss(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes, double alpha, Exec exec)
{
    if (scenes.empty()) {
        throw std::invalid_argument("evaluate_loss: no scenes");
    }
    return mean_loss(params, scenes, objectives_for(scenes, exec), alpha, exec);
}

void continue_training(TrainRun& run, const Dataset& data, const TrainConfig& cfg, double alpha,
                       const EpochCallback& on_epoch, Exec exec)
{
    cfg.validate();
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw std::invalid_argument("training: alpha must be in [0, 1]");
    }
    if (run.adam.m.size() != run.current.weights.size() || run.adam.v.size() != run.current.weights.size()) {
        throw std::invalid_argument("training: optimizer state does not match the parameters");
    }
    if (run.finished || run.epoch >= cfg.max_epochs) {
        return;
    }
    const Split split = split_dataset(data, cfg.val_split);
    if (split.train.front()->n_tx() != run.current.arch.n_tx ||
        static_cast<int>(build_features(*split.train.front()).size()) != run.current.arch.input_len) {
        throw DimensionError("training: dataset dimensions do not match the architecture");
    }
    const std::vector<SceneObjective> train_obj = objectives_for(split.train, exec);
    const std::vector<SceneObjective> val_obj = objectives_for(split.val, exec);
    const nn::Batch all_features = feature_batch(split.train);
    const int len = all_features.shape.size();
    const std::size_t n_train = split.train.size();

    while (!run.finished && run.epoch < cfg.max_epochs) {
        const int epoch = run.epoch + 1;
        std::vector<std::size_t> perm(n_train);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        Rng rng(derive_seed(cfg.seed, Stream::shuffle, static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = n_train; i > 1; --i) {
            const auto j = static_cast<std::size_t>(rng.next_u64() % i);
            std::swap(perm[i - 1], perm[j]);
        }

        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n_train, start + static_cast<std::size_t>(cfg.batch_size));
            const int nb = static_cast<int>(stop - start);
            nn::Batch x(nb, nn::Shape{1, len});
            std::vector<double> budgets(nb);
            for (int b = 0; b < nb; ++b) {
                const std::size_t idx = perm[start + b];
                std::copy(all_features.row(static_cast<int>(idx)), all_features.row(static_cast<int>(idx)) + len,
                          x.row(b));
                budgets[b] = split.train[idx]->sense_power;
            }
            nn::ForwardCache cache;
            const auto outs = forward(run.current, x, budgets, nn::Mode::train, &cache, exec);
            std::vector<RVec> grads(nb);
            std::vector<double> losses(nb);
            for_each_index(exec, nb, [&](std::size_t b) {
                RVec g;
                const double value = train_obj[perm[start + b]].value_and_gradient(outs[b].sigma_pred.values, alpha, g);
                losses[b] = -value;
                grads[b] = -g / static_cast<double>(nb);
            });
            for (double l : losses) {
                loss_sum += l;
            }
            const std::vector<double> pgrad = backward(run.current, cache, outs, grads, exec);
            nn::apply_running_stats(run.current, cache);
            adam_step(run.current, run.adam, pgrad, run.lr, cfg);
        }

        if (cfg.bn_stats == BnStats::population) {
            // The momentum average trails the weights by about ten steps.
            // Features that are nearly constant across samples (the raw
            // channel entries sit far below the BN epsilon) then normalize
            // with a stale mean, which the 1/sqrt(eps) gain turns into an
            // O(1) error at inference. Recompute at the current weights.
            nn::ForwardCache full;
            nn::forward_heads(run.current, all_features, nn::Mode::train, &full, exec);
            nn::apply_running_stats(run.current, full, 0.0);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(n_train);
        rec.val_loss = mean_loss(run.current, split.val, val_obj, alpha, exec);
        rec.lr = run.lr;
        if (!std::isfinite(rec.train_loss) || !std::isfinite(rec.val_loss)) {
            std::ostringstream msg;
            msg << "training diverged at epoch " << epoch << " (train loss " << rec.train_loss << ", val loss "
                << rec.val_loss << ", lr " << run.lr << ")";
            throw TrainingDiverged(msg.str());
        }
        if (rec.val_loss < run.best_val - cfg.min_delta) {
            run.best_val = rec.val_loss;
            run.best_epoch = epoch;
            run.best = run.current;
            run.wait = 0;
            run.plateau_wait = 0;
        } else {
            run.wait += 1;
            run.plateau_wait += 1;
            if (run.plateau_wait >= cfg.plateau_patience) {
                run.lr *= cfg.plateau_factor;
                run.plateau_wait = 0;
            }
        }
        rec.best_val = run.best_val;
        run.history.push_back(rec);
        run.epoch = epoch;
        if (run.wait >= cfg.early_stop_patience) {
            run.finished = true;
            run.stop_reason = "early_stopping";
        }
        if (on_epoch) {
            on_epoch(rec);
        }
    }
    if (!run.finished) {
        run.stop_reason = "max_epochs";
    }
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, nn::ArchKind arch, double alpha,
                  const EpochCallback& on_epoch, Exec exec)
{
    if (data.samples.empty()) {
        throw std::invalid_argument("training: empty dataset");
    }
    const Scene& first = data.samples.front();
    TrainResult result;
    result.run = start_run(make_architecture(arch, static_cast<int>(build_features(first).size()), first.n_tx()), cfg);
    continue_training(result.run, data, cfg, alpha, on_epoch, exec);
    result.params = result.run.best;
    return result;
}

std::string history_csv(const std::vector<EpochRecord>& history)
{
    std::ostringstream out;
    out.precision(17);
    out << "epoch,train_loss,val_loss,lr,best_val_loss\n";
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',' << r.val_loss << ',' << r.lr << ',' << r.best_val << '\n';
    }
    return out.str();
}

Prediction predict(const nn::NetworkParams& params, const Scene& scene, double alpha)
{
    if (scene.n_tx() != params.arch.n_tx) {
        throw DimensionError("predict: scene n_tx does not match the network");
    }
    const auto outs = forward(params, std::vector<const Scene*>{&scene}, nn::Mode::infer, nullptr, Exec::serial);
    Prediction p;
    p.spectrum = outs.front().sigma_pred;
    p.waveform = recover_waveform(p.spectrum.values, scene.tcm_eigvecs, scene.wave_len);
    p.beams = recover_beams(p.spectrum.values, scene);
    p.rates = wsnr(p.spectrum.values, scene, alpha);
    return p;
}

std::vector<PowerSpectrum> predict_spectra(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                                           Exec exec)
{
    std::vector<PowerSpectrum> out;
    out.reserve(scenes.size());
    for (std::size_t start = 0; start < scenes.size(); start += kEvalChunk) {
        const std::size_t stop = std::min(scenes.size(), start + kEvalChunk);
        const std::vector<const Scene*> chunk(scenes.begin() + start, scenes.begin() + stop);
        for (auto& o : forward(params, chunk, nn::Mode::infer, nullptr, exec)) {
            out.push_back(std::move(o.sigma_pred));
        }
    }
    return out;
}

} // namespace isaclab
