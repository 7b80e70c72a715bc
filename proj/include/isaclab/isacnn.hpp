#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "isaclab/metrics.hpp"
#include "isaclab/nn.hpp"
#include "isaclab/scene.hpp"
#include "isaclab/solvers.hpp"

namespace isaclab {

/// Output of the constraint layer for one sample.
struct LambdaOutput {
    RVec theta;               ///< raw head output, entries in (0, 1)
    double eta = 0.0;         ///< raw power fraction in (0, 1)
    PowerSpectrum sigma_pred; ///< sort_desc(theta / |theta|_1) * eta * budget
    std::vector<int> order;   ///< order[i] = index of theta feeding sigma_pred[i]
    double theta_sum = 0.0;
};

/// Normalizes theta to unit l1 norm, sorts it descending (stable) and scales
/// by eta * budget. The result never exceeds the budget, even in rounding.
LambdaOutput lambda_forward(const RVec& theta, double eta, double budget);

/// Pulls a gradient on sigma_pred back to theta and eta.
void lambda_backward(const LambdaOutput& out, const RVec& grad_sigma, RVec& grad_theta, double& grad_eta);

/// Batch mean of -wsnr.
double loss(const std::vector<PowerSpectrum>& sigma, const std::vector<const Scene*>& scenes, double alpha);

/// Gradient of the single-sample loss -wsnr w.r.t. sigma.
RVec loss_grad_sigma(const RVec& sigma, const Scene& scene, double alpha);

nn::Batch feature_batch(const std::vector<const Scene*>& scenes);

nn::Architecture make_architecture(nn::ArchKind kind, int input_len, int n_tx);

/// Network plus constraint layer on a batch of scenes.
std::vector<LambdaOutput> forward(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                                  nn::Mode mode, nn::ForwardCache* cache = nullptr, Exec exec = Exec::parallel);

/// Same, on raw features with explicit per-sample budgets.
std::vector<LambdaOutput> forward(const nn::NetworkParams& params, const nn::Batch& features,
                                  const std::vector<double>& budgets, nn::Mode mode, nn::ForwardCache* cache = nullptr,
                                  Exec exec = Exec::parallel);

/// Parameter gradient given per-sample gradients on sigma_pred.
std::vector<double> backward(const nn::NetworkParams& params, const nn::ForwardCache& cache,
                             const std::vector<LambdaOutput>& outputs, const std::vector<RVec>& grad_sigma,
                             Exec exec = Exec::parallel);

enum class BnStats : std::uint32_t { ema = 0, population = 1 };
std::string to_string(BnStats s);

struct TrainConfig {
    double lr_init = 1e-3;
    int max_epochs = 500;
    int batch_size = 256;
    int early_stop_patience = 20;
    int plateau_patience = 10;
    double plateau_factor = 0.33;
    double val_split = 0.2;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double min_delta = 1e-5; ///< absolute improvement on validation loss
    /// Inference statistics for batch norm. `ema` keeps only the momentum
    /// average of mini-batch statistics; `population` additionally recomputes
    /// them over the whole training split at the end of every epoch.
    BnStats bn_stats = BnStats::population;
    std::uint64_t seed = 1; ///< weight init and shuffling

    void validate() const;
};

/// Applies `key = value` pairs (keys as the field names above).
void apply_train_key(TrainConfig& cfg, const std::string& key, const std::string& value);
TrainConfig load_train_config(const std::string& path);

struct EpochRecord {
    int epoch = 0; ///< 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;       ///< rate used during the epoch
    double best_val = 0.0; ///< running minimum of val_loss
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t step = 0;
};

/// Complete optimizer state; enough to resume bit-exactly.
struct TrainRun {
    nn::NetworkParams current;
    nn::NetworkParams best;
    AdamState adam;
    double lr = 0.0;
    int epoch = 0; ///< completed epochs
    double best_val = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int wait = 0;         ///< epochs since last improvement
    int plateau_wait = 0; ///< same, reset on every LR cut
    bool finished = false;
    std::string stop_reason;
    std::vector<EpochRecord> history;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TrainRun start_run(const nn::Architecture& arch, const TrainConfig& cfg);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains until early stopping or cfg.max_epochs completed epochs.
void continue_training(TrainRun& run, const Dataset& data, const TrainConfig& cfg, double alpha,
                       const EpochCallback& on_epoch = {}, Exec exec = Exec::parallel);

struct TrainResult {
    nn::NetworkParams params; ///< best-validation parameters
    TrainRun run;
};

TrainResult train(const Dataset& data, const TrainConfig& cfg, nn::ArchKind arch, double alpha,
                  const EpochCallback& on_epoch = {}, Exec exec = Exec::parallel);

/// Validation loss of a parameter set (BN in inference mode).
double evaluate_loss(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes, double alpha,
                     Exec exec = Exec::parallel);

struct Checkpoint {
    TrainConfig config;
    double alpha = 0.0;
    TrainRun run;
};

std::vector<std::uint8_t> serialize_params(const nn::NetworkParams& params);
nn::NetworkParams deserialize_params(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint read_checkpoint(const std::string& path);

std::string history_csv(const std::vector<EpochRecord>& history);

struct Prediction {
    PowerSpectrum spectrum;
    Waveform waveform;
    BeamformerSet beams;
    RatePair rates;
};

/// Features, inference pass, waveform and beam recovery, rates.
Prediction predict(const nn::NetworkParams& params, const Scene& scene, double alpha);

/// Inference-mode spectra for many scenes in one batch.
std::vector<PowerSpectrum> predict_spectra(const nn::NetworkParams& params, const std::vector<const Scene*>& scenes,
                                           Exec exec = Exec::parallel);

} // namespace isaclab
