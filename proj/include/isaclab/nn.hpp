#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "isaclab/parallel.hpp"

namespace isaclab::nn {

enum class LayerKind : std::uint32_t {
    batch_norm = 0,
    conv1d = 1,
    relu = 2,
    flatten = 3,
    fully_connected = 4,
    sigmoid = 5
};

std::string to_string(LayerKind kind);

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    int size = 0;   ///< filters (conv1d) or width (fully_connected)
    int kernel = 0; ///< conv1d only

    bool operator==(const LayerSpec&) const = default;
};

struct Shape {
    int channels = 1;
    int length = 1;

    int size() const { return channels * length; }
    bool operator==(const Shape&) const = default;
};

enum class ArchKind : std::uint32_t { isacnn = 0, fcnn = 1 };

std::string to_string(ArchKind kind);
ArchKind arch_kind_from(const std::string& name);

/// A shared trunk feeding two sigmoid heads: theta (n_tx wide) and eta (1).
struct Architecture {
    ArchKind kind = ArchKind::isacnn;
    int input_len = 0;
    int n_tx = 0;
    std::vector<LayerSpec> trunk;
    std::vector<LayerSpec> theta_head;
    std::vector<LayerSpec> eta_head;

    /// BN, Conv(2,5), ReLU, BN, Conv(4,3), ReLU, BN, Conv(8,3), ReLU, Flatten,
    /// then BN, FC, Sigmoid on each head.
    static Architecture isacnn(int input_len, int n_tx);
    /// BN+FC(8 n_tx)+ReLU, BN+FC(4 n_tx)+ReLU, BN+FC(2 n_tx)+ReLU, then the
    /// same two heads.
    static Architecture fcnn(int input_len, int n_tx);

    void validate() const;
    bool operator==(const Architecture&) const = default;
};

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

/// Where one layer's trainable weights and BN running statistics live in
/// the flat parameter arrays.
struct LayerSlot {
    LayerSpec spec;
    Shape in;
    Shape out;
    std::size_t param_offset = 0;
    std::size_t param_count = 0;
    std::size_t state_offset = 0;
    std::size_t state_count = 0;
};

struct Layout {
    std::vector<LayerSlot> trunk;
    std::vector<LayerSlot> theta_head;
    std::vector<LayerSlot> eta_head;
    std::size_t param_count = 0;
    std::size_t state_count = 0;
};

Layout compute_layout(const Architecture& arch);

struct NetworkParams {
    Architecture arch;
    std::vector<double> weights;  ///< trainable
    std::vector<double> bn_state; ///< running mean / variance per BN layer
};

/// Fan-in scaled uniform weights, zero biases, BN scale 1 and shift 0.
NetworkParams init_params(const Architecture& arch, std::uint64_t seed);

/// Row-major [sample][channel][position].
struct Batch {
    int n = 0;
    Shape shape;
    std::vector<double> data;

    Batch() = default;
    Batch(int n_, Shape s) : n(n_), shape(s), data(static_cast<std::size_t>(n_) * s.size(), 0.0) {}

    double* row(int i) { return data.data() + static_cast<std::size_t>(i) * shape.size(); }
    const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * shape.size(); }
};

enum class Mode { train, infer };

struct LayerCache {
    Batch input;
    std::vector<double> xhat;    ///< BN normalized input
    std::vector<double> inv_std; ///< BN per-feature 1/sqrt(var + eps)
    std::vector<double> batch_mean;
    std::vector<double> batch_var;
    Batch output; ///< sigmoid output
};

struct ForwardCache {
    std::vector<LayerCache> trunk;
    std::vector<LayerCache> theta_head;
    std::vector<LayerCache> eta_head;
    Batch trunk_out;
    Mode mode = Mode::infer;
    const NetworkParams* params = nullptr;
    std::vector<double> weights_at_forward; ///< backward refuses a cache from other weights
};

class StaleCacheError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct HeadOutputs {
    Batch theta; ///< n x n_tx, in (0, 1)
    Batch eta;   ///< n x 1, in (0, 1)
};

/// Runs trunk and heads. Train mode normalizes with batch statistics and,
/// given a cache, records what backward needs; params are never modified.
HeadOutputs forward_heads(const NetworkParams& params, const Batch& input, Mode mode, ForwardCache* cache,
                          Exec exec = Exec::parallel);

/// Gradient of the loss w.r.t. the flat weights, given upstream gradients on
/// both head outputs.
std::vector<double> backward_heads(const NetworkParams& params, const ForwardCache& cache, const Batch& grad_theta,
                                   const Batch& grad_eta, Exec exec = Exec::parallel);

/// Blends the batch statistics of a train-mode pass into the running ones:
/// running = momentum * running + (1 - momentum) * batch. Momentum 0 copies
/// the batch statistics.
void apply_running_stats(NetworkParams& params, const ForwardCache& cache, double momentum = kBnMomentum);

namespace kernels {

void bn_forward_train(const Batch& x, std::span<const double> gamma, std::span<const double> beta, Batch& y,
                      LayerCache& cache, Exec exec);
void bn_forward_infer(const Batch& x, std::span<const double> gamma, std::span<const double> beta,
                      std::span<const double> run_mean, std::span<const double> run_var, Batch& y, Exec exec);
void bn_backward(const Batch& dy, const LayerCache& cache, std::span<const double> gamma, Batch& dx,
                 std::span<double> dgamma, std::span<double> dbeta, Exec exec);

/// Stride-1, zero "same" padding cross-correlation.
/// Weights are [c_out][c_in][kernel] followed by c_out biases.
void conv_forward(const Batch& x, std::span<const double> w, int c_out, int kernel, Batch& y, Exec exec);
void conv_backward(const Batch& x, const Batch& dy, std::span<const double> w, int kernel, Batch& dx,
                   std::span<double> dw, Exec exec);

/// Weights are [out][in] followed by out biases.
void fc_forward(const Batch& x, std::span<const double> w, int out, Batch& y, Exec exec);
void fc_backward(const Batch& x, const Batch& dy, std::span<const double> w, Batch& dx, std::span<double> dw,
                 Exec exec);

} // namespace kernels

} // namespace isaclab::nn
