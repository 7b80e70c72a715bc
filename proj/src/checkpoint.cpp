#include "isaclab/bytes.hpp"
#include "isaclab/isacnn.hpp"

namespace isaclab {

namespace {

constexpr char kParamsMagic[8] = {'I', 'S', 'A', 'C', 'P', 'A', 'R', 'M'};
constexpr char kCheckpointMagic[8] = {'I', 'S', 'A', 'C', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_stack(ByteWriter& w, const std::vector<nn::LayerSpec>& stack)
{
    w.put_u32(static_cast<std::uint32_t>(stack.size()));
    for (const auto& l : stack) {
        w.put_u32(static_cast<std::uint32_t>(l.kind));
        w.put_u32(static_cast<std::uint32_t>(l.size));
        w.put_u32(static_cast<std::uint32_t>(l.kernel));
    }
}

std::vector<nn::LayerSpec> get_stack(ByteReader& r)
{
    const std::uint32_t n = r.get_u32();
    if (n > 1024) {
        throw FormatError("implausible layer count");
    }
    std::vector<nn::LayerSpec> stack(n);
    for (auto& l : stack) {
        const std::uint32_t kind = r.get_u32();
        if (kind > static_cast<std::uint32_t>(nn::LayerKind::sigmoid)) {
            throw FormatError("unknown layer kind");
        }
        l.kind = static_cast<nn::LayerKind>(kind);
        l.size = static_cast<int>(r.get_u32());
        l.kernel = static_cast<int>(r.get_u32());
    }
    return stack;
}

void put_doubles(ByteWriter& w, const std::vector<double>& v)
{
    w.put_u64(v.size());
    w.put_f64s(v);
}

std::vector<double> get_doubles(ByteReader& r, std::size_t expected, const char* what)
{
    const std::uint64_t n = r.get_u64();
    if (n != expected) {
        throw FormatError(std::string(what) + ": stored length does not match the architecture");
    }
    std::vector<double> v(n);
    for (auto& x : v) {
        x = r.get_f64();
    }
    return v;
}

void put_params(ByteWriter& w, const nn::NetworkParams& p)
{
    w.put_bytes(kParamsMagic, sizeof kParamsMagic);
    w.put_u32(kVersion);
    w.put_u32(static_cast<std::uint32_t>(p.arch.kind));
    w.put_u32(static_cast<std::uint32_t>(p.arch.input_len));
    w.put_u32(static_cast<std::uint32_t>(p.arch.n_tx));
    put_stack(w, p.arch.trunk);
    put_stack(w, p.arch.theta_head);
    put_stack(w, p.arch.eta_head);
    put_doubles(w, p.weights);
    put_doubles(w, p.bn_state);
}

nn::NetworkParams get_params(ByteReader& r)
{
    r.expect_bytes(kParamsMagic, sizeof kParamsMagic, "parameter magic");
    if (r.get_u32() != kVersion) {
        throw FormatError("unsupported parameter format version");
    }
    nn::NetworkParams p;
    const std::uint32_t kind = r.get_u32();
    if (kind > static_cast<std::uint32_t>(nn::ArchKind::fcnn)) {
        throw FormatError("unknown architecture kind");
    }
    p.arch.kind = static_cast<nn::ArchKind>(kind);
    p.arch.input_len = static_cast<int>(r.get_u32());
    p.arch.n_tx = static_cast<int>(r.get_u32());
    p.arch.trunk = get_stack(r);
    p.arch.theta_head = get_stack(r);
    p.arch.eta_head = get_stack(r);
    try {
        p.arch.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(std::string("stored architecture is invalid: ") + e.what());
    }
    const nn::Layout layout = nn::compute_layout(p.arch);
    p.weights = get_doubles(r, layout.param_count, "weights");
    p.bn_state = get_doubles(r, layout.state_count, "batch norm state");
    return p;
}

void put_string(ByteWriter& w, const std::string& s)
{
    w.put_u32(static_cast<std::uint32_t>(s.size()));
    w.put_bytes(s.data(), s.size());
}

std::string get_string(ByteReader& r)
{
    const std::uint32_t n = r.get_u32();
    const auto bytes = r.get_bytes(n);
    return {bytes.begin(), bytes.end()};
}

} // namespace

std::vector<std::uint8_t> serialize_params(const nn::NetworkParams& params)
{
    ByteWriter w;
    put_params(w, params);
    return w.take();
}

nn::NetworkParams deserialize_params(const std::vector<std::uint8_t>& bytes)
{
    ByteReader r(bytes);
    nn::NetworkParams p = get_params(r);
    if (!r.at_end()) {
        throw FormatError("trailing bytes after parameters");
    }
    return p;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck)
{
    ByteWriter w;
    w.put_bytes(kCheckpointMagic, sizeof kCheckpointMagic);
    w.put_u32(kVersion);
    const TrainConfig& c = ck.config;
    w.put_f64(c.lr_init);
    w.put_u64(static_cast<std::uint64_t>(c.max_epochs));
    w.put_u64(static_cast<std::uint64_t>(c.batch_size));
    w.put_u64(static_cast<std::uint64_t>(c.early_stop_patience));
    w.put_u64(static_cast<std::uint64_t>(c.plateau_patience));
    w.put_f64(c.plateau_factor);
    w.put_f64(c.val_split);
    w.put_f64(c.adam_beta1);
    w.put_f64(c.adam_beta2);
    w.put_f64(c.adam_eps);
    w.put_f64(c.min_delta);
    w.put_u64(c.seed);
    w.put_u32(static_cast<std::uint32_t>(c.bn_stats));
    w.put_f64(ck.alpha);

    const TrainRun& run = ck.run;
    w.put_f64(run.lr);
    w.put_u64(static_cast<std::uint64_t>(run.epoch));
    w.put_f64(run.best_val);
    w.put_u64(static_cast<std::uint64_t>(run.best_epoch));
    w.put_u64(static_cast<std::uint64_t>(run.wait));
    w.put_u64(static_cast<std::uint64_t>(run.plateau_wait));
    w.put_u32(run.finished ? 1 : 0);
    put_string(w, run.stop_reason);
    w.put_u64(run.history.size());
    for (const auto& h : run.history) {
        w.put_u64(static_cast<std::uint64_t>(h.epoch));
        w.put_f64(h.train_loss);
        w.put_f64(h.val_loss);
        w.put_f64(h.lr);
        w.put_f64(h.best_val);
    }
    put_params(w, run.current);
    put_params(w, run.best);
    put_doubles(w, run.adam.m);
    put_doubles(w, run.adam.v);
    w.put_u64(run.adam.step);
    return w.take();
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    ByteReader r(bytes);
    r.expect_bytes(kCheckpointMagic, sizeof kCheckpointMagic, "checkpoint magic");
    if (r.get_u32() != kVersion) {
        throw FormatError("unsupported checkpoint version");
    }
    Checkpoint ck;
    TrainConfig& c = ck.config;
    c.lr_init = r.get_f64();
    c.max_epochs = static_cast<int>(r.get_u64());
    c.batch_size = static_cast<int>(r.get_u64());
    c.early_stop_patience = static_cast<int>(r.get_u64());
    c.plateau_patience = static_cast<int>(r.get_u64());
    c.plateau_factor = r.get_f64();
    c.val_split = r.get_f64();
    c.adam_beta1 = r.get_f64();
    c.adam_beta2 = r.get_f64();
    c.adam_eps = r.get_f64();
    c.min_delta = r.get_f64();
    c.seed = r.get_u64();
    const std::uint32_t bn = r.get_u32();
    if (bn > 1) {
        throw FormatError("unknown batch-norm statistics mode");
    }
    c.bn_stats = static_cast<BnStats>(bn);
    ck.alpha = r.get_f64();

    TrainRun& run = ck.run;
    run.lr = r.get_f64();
    run.epoch = static_cast<int>(r.get_u64());
    run.best_val = r.get_f64();
    run.best_epoch = static_cast<int>(r.get_u64());
    run.wait = static_cast<int>(r.get_u64());
    run.plateau_wait = static_cast<int>(r.get_u64());
    run.finished = r.get_u32() != 0;
    run.stop_reason = get_string(r);
    const std::uint64_t n_hist = r.get_u64();
    if (n_hist > 10'000'000) {
        throw FormatError("implausible history length");
    }
    run.history.resize(n_hist);
    for (auto& h : run.history) {
        h.epoch = static_cast<int>(r.get_u64());
        h.train_loss = r.get_f64();
        h.val_loss = r.get_f64();
        h.lr = r.get_f64();
        h.best_val = r.get_f64();
    }
    run.current = get_params(r);
    run.best = get_params(r);
    if (!(run.best.arch == run.current.arch)) {
        throw FormatError("checkpoint holds two different architectures");
    }
    run.adam.m = get_doubles(r, run.current.weights.size(), "adam first moment");
    run.adam.v = get_doubles(r, run.current.weights.size(), "adam second moment");
    run.adam.step = r.get_u64();
    if (!r.at_end()) {
        throw FormatError("trailing bytes after checkpoint");
    }
    return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck)
{
    write_file_bytes(path, serialize_checkpoint(ck));
}

Checkpoint read_checkpoint(const std::string& path)
{
    return deserialize_checkpoint(read_file_bytes(path));
}

} // namespace isaclab
