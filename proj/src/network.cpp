#include <cmath>

#include "isaclab/nn.hpp"
#include "isaclab/rng.hpp"

namespace isaclab::nn {

std::string to_string(LayerKind kind)
{
    switch (kind) {
    case LayerKind::batch_norm:
        return "batch_norm";
    case LayerKind::conv1d:
        return "conv1d";
    case LayerKind::relu:
        return "relu";
    case LayerKind::flatten:
        return "flatten";
    case LayerKind::fully_connected:
        return "fully_connected";
    case LayerKind::sigmoid:
        return "sigmoid";
    }
    return "unknown";
}

std::string to_string(ArchKind kind)
{
    return kind == ArchKind::isacnn ? "isacnn" : "fcnn";
}

ArchKind arch_kind_from(const std::string& name)
{
    if (name == "isacnn") {
        return ArchKind::isacnn;
    }
    if (name == "fcnn") {
        return ArchKind::fcnn;
    }
    throw std::invalid_argument("unknown architecture '" + name + "' (expected isacnn or fcnn)");
}

namespace {

LayerSpec bn()
{
    return {LayerKind::batch_norm, 0, 0};
}
LayerSpec conv(int filters, int kernel)
{
    return {LayerKind::conv1d, filters, kernel};
}
LayerSpec relu()
{
    return {LayerKind::relu, 0, 0};
}
LayerSpec fc(int width)
{
    return {LayerKind::fully_connected, width, 0};
}
LayerSpec sigmoid()
{
    return {LayerKind::sigmoid, 0, 0};
}

void attach_heads(Architecture& a)
{
    a.theta_head = {bn(), fc(a.n_tx), sigmoid()};
    a.eta_head = {bn(), fc(1), sigmoid()};
}

Shape out_shape(const LayerSpec& spec, Shape in)
{
    switch (spec.kind) {
    case LayerKind::conv1d:
        return {spec.size, in.length};
    case LayerKind::flatten:
        return {in.size(), 1};
    case LayerKind::fully_connected:
        return {spec.size, 1};
    default:
        return in;
    }
}

std::size_t param_count(const LayerSpec& spec, Shape in)
{
    switch (spec.kind) {
    case LayerKind::batch_norm:
        return 2 * static_cast<std::size_t>(in.size());
    case LayerKind::conv1d:
        return static_cast<std::size_t>(spec.size) * in.channels * spec.kernel + spec.size;
    case LayerKind::fully_connected:
        return static_cast<std::size_t>(spec.size) * in.size() + spec.size;
    default:
        return 0;
    }
}

std::vector<LayerSlot> lay_out(const std::vector<LayerSpec>& specs, Shape in, std::size_t& p_off, std::size_t& s_off)
{
    std::vector<LayerSlot> slots;
    for (const auto& spec : specs) {
        LayerSlot slot;
        slot.spec = spec;
        slot.in = in;
        slot.out = out_shape(spec, in);
        slot.param_offset = p_off;
        slot.param_count = param_count(spec, in);
        slot.state_offset = s_off;
        slot.state_count = spec.kind == LayerKind::batch_norm ? 2 * static_cast<std::size_t>(in.size()) : 0;
        p_off += slot.param_count;
        s_off += slot.state_count;
        in = slot.out;
        slots.push_back(slot);
    }
    return slots;
}

} // namespace

Architecture Architecture::isacnn(int input_len, int n_tx)
{
    Architecture a;
    a.kind = ArchKind::isacnn;
    a.input_len = input_len;
    a.n_tx = n_tx;
    a.trunk = {bn(),   conv(2, 5), relu(),     bn(),   conv(4, 3),
               relu(), bn(),       conv(8, 3), relu(), {LayerKind::flatten, 0, 0}};
    attach_heads(a);
    a.validate();
    return a;
}

Architecture Architecture::fcnn(int input_len, int n_tx)
{
    Architecture a;
    a.kind = ArchKind::fcnn;
    a.input_len = input_len;
    a.n_tx = n_tx;
    a.trunk = {bn(), fc(8 * n_tx), relu(), bn(), fc(4 * n_tx), relu(), bn(), fc(2 * n_tx), relu()};
    attach_heads(a);
    a.validate();
    return a;
}

void Architecture::validate() const
{
    if (input_len < 1 || n_tx < 1) {
        throw std::invalid_argument("architecture: input length and n_tx must be >= 1");
    }
    for (const auto* stack : {&trunk, &theta_head, &eta_head}) {
        for (const auto& l : *stack) {
            if (l.kind == LayerKind::conv1d && (l.size < 1 || l.kernel < 1 || l.kernel % 2 == 0)) {
                throw std::invalid_argument("architecture: conv needs >= 1 filter and an odd kernel");
            }
            if (l.kind == LayerKind::fully_connected && l.size < 1) {
                throw std::invalid_argument("architecture: fully connected width must be >= 1");
            }
        }
    }
    auto head_ok = [](const std::vector<LayerSpec>& head, int width) {
        if (head.empty() || head.back().kind != LayerKind::sigmoid) {
            return false;
        }
        for (auto it = head.rbegin(); it != head.rend(); ++it) {
            if (it->kind == LayerKind::fully_connected || it->kind == LayerKind::conv1d) {
                return it->kind == LayerKind::fully_connected && it->size == width;
            }
        }
        return false;
    };
    if (!head_ok(theta_head, n_tx)) {
        throw std::invalid_argument("architecture: theta head must end FC(n_tx) + sigmoid");
    }
    if (!head_ok(eta_head, 1)) {
        throw std::invalid_argument("architecture: eta head must end FC(1) + sigmoid");
    }
}

Layout compute_layout(const Architecture& arch)
{
    Layout l;
    std::size_t p = 0, s = 0;
    l.trunk = lay_out(arch.trunk, Shape{1, arch.input_len}, p, s);
    const Shape trunk_out = l.trunk.empty() ? Shape{1, arch.input_len} : l.trunk.back().out;
    l.theta_head = lay_out(arch.theta_head, trunk_out, p, s);
    l.eta_head = lay_out(arch.eta_head, trunk_out, p, s);
    l.param_count = p;
    l.state_count = s;
    return l;
}

NetworkParams init_params(const Architecture& arch, std::uint64_t seed)
{
    arch.validate();
    const Layout layout = compute_layout(arch);
    NetworkParams params;
    params.arch = arch;
    params.weights.assign(layout.param_count, 0.0);
    params.bn_state.assign(layout.state_count, 0.0);
    Rng rng(derive_seed(seed, Stream::init, 0));
    for (const auto* stack : {&layout.trunk, &layout.theta_head, &layout.eta_head}) {
        for (const auto& slot : *stack) {
            double* w = params.weights.data() + slot.param_offset;
            switch (slot.spec.kind) {
            case LayerKind::batch_norm: {
                const int f = slot.in.size();
                for (int i = 0; i < f; ++i) {
                    w[i] = 1.0;
                }
                double* st = params.bn_state.data() + slot.state_offset;
                for (int i = 0; i < f; ++i) {
                    st[f + i] = 1.0; // running variance
                }
                break;
            }
            case LayerKind::conv1d:
            case LayerKind::fully_connected: {
                const int out = slot.spec.size;
                const std::size_t fan_in = slot.spec.kind == LayerKind::conv1d
                                               ? static_cast<std::size_t>(slot.in.channels) * slot.spec.kernel
                                               : static_cast<std::size_t>(slot.in.size());
                const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
                const std::size_t n_w = slot.param_count - out;
                for (std::size_t i = 0; i < n_w; ++i) {
                    w[i] = rng.uniform(-bound, bound);
                }
                break;
            }
            default:
                break;
            }
        }
    }
    return params;
}

namespace {

std::span<const double> slice(const std::vector<double>& v, std::size_t off, std::size_t n)
{
    return std::span<const double>(v.data() + off, n);
}

Batch run_stack(const NetworkParams& params, const std::vector<LayerSlot>& slots, Batch x, Mode mode,
                std::vector<LayerCache>* caches, Exec exec)
{
    if (caches) {
        caches->assign(slots.size(), LayerCache{});
    }
    for (std::size_t li = 0; li < slots.size(); ++li) {
        const LayerSlot& slot = slots[li];
        LayerCache local;
        LayerCache& c = caches ? (*caches)[li] : local;
        Batch y;
        const auto w = slice(params.weights, slot.param_offset, slot.param_count);
        switch (slot.spec.kind) {
        case LayerKind::batch_norm: {
            const std::size_t f = slot.in.size();
            if (mode == Mode::train) {
                kernels::bn_forward_train(x, w.subspan(0, f), w.subspan(f, f), y, c, exec);
            } else {
                const auto st = slice(params.bn_state, slot.state_offset, slot.state_count);
                kernels::bn_forward_infer(x, w.subspan(0, f), w.subspan(f, f), st.subspan(0, f), st.subspan(f, f), y,
                                          exec);
            }
            break;
        }
        case LayerKind::conv1d:
            kernels::conv_forward(x, w, slot.spec.size, slot.spec.kernel, y, exec);
            break;
        case LayerKind::fully_connected:
            kernels::fc_forward(x, w, slot.spec.size, y, exec);
            break;
        case LayerKind::relu:
            y = x;
            for (double& v : y.data) {
                v = v > 0.0 ? v : 0.0;
            }
            break;
        case LayerKind::flatten:
            y = x;
            y.shape = slot.out;
            break;
        case LayerKind::sigmoid:
            y = x;
            for (double& v : y.data) {
                v = 1.0 / (1.0 + std::exp(-v));
            }
            if (caches) {
                c.output = y;
            }
            break;
        }
        if (caches) {
            c.input = std::move(x);
        }
        x = std::move(y);
    }
    return x;
}

Batch back_stack(const NetworkParams& params, const std::vector<LayerSlot>& slots,
                 const std::vector<LayerCache>& caches, Batch dy, std::vector<double>& grad, Exec exec)
{
    for (std::size_t li = slots.size(); li-- > 0;) {
        const LayerSlot& slot = slots[li];
        const LayerCache& c = caches[li];
        const auto w = slice(params.weights, slot.param_offset, slot.param_count);
        std::span<double> g(grad.data() + slot.param_offset, slot.param_count);
        Batch dx;
        switch (slot.spec.kind) {
        case LayerKind::batch_norm: {
            const std::size_t f = slot.in.size();
            kernels::bn_backward(dy, c, w.subspan(0, f), dx, g.subspan(0, f), g.subspan(f, f), exec);
            break;
        }
        case LayerKind::conv1d:
            kernels::conv_backward(c.input, dy, w, slot.spec.kernel, dx, g, exec);
            break;
        case LayerKind::fully_connected:
            kernels::fc_backward(c.input, dy, w, dx, g, exec);
            break;
        case LayerKind::relu:
            dx = std::move(dy);
            for (std::size_t i = 0; i < dx.data.size(); ++i) {
                if (!(c.input.data[i] > 0.0)) {
                    dx.data[i] = 0.0;
                }
            }
            break;
        case LayerKind::flatten:
            dx = std::move(dy);
            dx.shape = slot.in;
            break;
        case LayerKind::sigmoid:
            dx = std::move(dy);
            for (std::size_t i = 0; i < dx.data.size(); ++i) {
                const double s = c.output.data[i];
                dx.data[i] *= s * (1.0 - s);
            }
            break;
        }
        dy = std::move(dx);
    }
    return dy;
}

} // namespace

HeadOutputs forward_heads(const NetworkParams& params, const Batch& input, Mode mode, ForwardCache* cache, Exec exec)
{
    const Architecture& arch = params.arch;
    if (input.shape.size() != arch.input_len) {
        throw std::invalid_argument("network: feature length " + std::to_string(input.shape.size()) +
                                    " does not match architecture input " + std::to_string(arch.input_len));
    }
    if (input.n < 1) {
        throw std::invalid_argument("network: empty batch");
    }
    const Layout layout = compute_layout(arch);
    if (params.weights.size() != layout.param_count || params.bn_state.size() != layout.state_count) {
        throw std::invalid_argument("network: parameter array size does not match architecture");
    }
    Batch x = input;
    x.shape = Shape{1, arch.input_len};
    HeadOutputs out;
    if (cache) {
        cache->mode = mode;
        cache->params = &params;
        cache->weights_at_forward = params.weights;
        Batch trunk_out = run_stack(params, layout.trunk, std::move(x), mode, &cache->trunk, exec);
        cache->trunk_out = trunk_out;
        out.theta = run_stack(params, layout.theta_head, trunk_out, mode, &cache->theta_head, exec);
        out.eta = run_stack(params, layout.eta_head, std::move(trunk_out), mode, &cache->eta_head, exec);
    } else {
        Batch trunk_out = run_stack(params, layout.trunk, std::move(x), mode, nullptr, exec);
        out.theta = run_stack(params, layout.theta_head, trunk_out, mode, nullptr, exec);
        out.eta = run_stack(params, layout.eta_head, std::move(trunk_out), mode, nullptr, exec);
    }
    return out;
}

std::vector<double> backward_heads(const NetworkParams& params, const ForwardCache& cache, const Batch& grad_theta,
                                   const Batch& grad_eta, Exec exec)
{
    if (cache.params != &params || cache.weights_at_forward != params.weights) {
        throw StaleCacheError("network backward: cache was recorded with different parameters");
    }
    if (cache.mode != Mode::train) {
        throw StaleCacheError("network backward: forward did not run in train mode");
    }
    const Layout layout = compute_layout(params.arch);
    const int n = cache.trunk_out.n;
    if (grad_theta.n != n || grad_eta.n != n || grad_theta.shape.size() != params.arch.n_tx ||
        grad_eta.shape.size() != 1) {
        throw std::invalid_argument("network backward: upstream gradient shape mismatch");
    }
    std::vector<double> grad(layout.param_count, 0.0);
    Batch d_theta = back_stack(params, layout.theta_head, cache.theta_head, grad_theta, grad, exec);
    Batch d_eta = back_stack(params, layout.eta_head, cache.eta_head, grad_eta, grad, exec);
    for (std::size_t i = 0; i < d_theta.data.size(); ++i) {
        d_theta.data[i] += d_eta.data[i];
    }
    back_stack(params, layout.trunk, cache.trunk, std::move(d_theta), grad, exec);
    return grad;
}

void apply_running_stats(NetworkParams& params, const ForwardCache& cache, double momentum)
{
    if (cache.mode != Mode::train) {
        return;
    }
    const Layout layout = compute_layout(params.arch);
    auto blend = [&](const std::vector<LayerSlot>& slots, const std::vector<LayerCache>& caches) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i].spec.kind != LayerKind::batch_norm) {
                continue;
            }
            const std::size_t f = slots[i].in.size();
            double* st = params.bn_state.data() + slots[i].state_offset;
            for (std::size_t j = 0; j < f; ++j) {
                st[j] = momentum * st[j] + (1.0 - momentum) * caches[i].batch_mean[j];
                st[f + j] = momentum * st[f + j] + (1.0 - momentum) * caches[i].batch_var[j];
            }
        }
    };
    blend(layout.trunk, cache.trunk);
    blend(layout.theta_head, cache.theta_head);
    blend(layout.eta_head, cache.eta_head);
}

} // namespace isaclab::nn
