#include "isaclab/scene.hpp"

#include <cmath>
#include <fstream>

#include "isaclab/bytes.hpp"
#include "isaclab/solvers.hpp"

namespace isaclab {

namespace {

constexpr char kMagic[8] = {'I', 'S', 'A', 'C', 'D', 'S', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_matrix(ByteWriter& w, const CMat& m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            w.put_f64(m(r, c).real());
        }
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            w.put_f64(m(r, c).imag());
        }
    }
}

CMat get_matrix(ByteReader& rd, Eigen::Index rows, Eigen::Index cols)
{
    RMat re(rows, cols);
    RMat im(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            re(r, c) = rd.get_f64();
        }
    }
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
            im(r, c) = rd.get_f64();
        }
    }
    CMat m(rows, cols);
    m.real() = re;
    m.imag() = im;
    return m;
}

RVec get_vector(ByteReader& rd, Eigen::Index n)
{
    RVec v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v[i] = rd.get_f64();
    }
    return v;
}

bool close(double a, double b, double tol)
{
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

void verify_scene(const Scene& sc, std::size_t index)
{
    const auto where = " (sample " + std::to_string(index) + ")";
    const RVec sh = interference_eigvals(sc.channel, sc.cu_power, sc.noise_power);
    for (Eigen::Index j = 0; j < sh.size(); ++j) {
        if (!close(sh[j], sc.interf_eigvals[j], 1e-10)) {
            throw FormatError("stored interference eigenvalues do not match the channel" + where);
        }
    }
    const double ms = waterfill_ms(sc.tcm_eigvals, sc.sense_power, sc.noise_power, sc.n_rx(), sc.wave_len).max_rate;
    if (!close(ms, sc.norm_sense, 1e-10)) {
        throw FormatError("stored M_s does not match water-filling" + where);
    }
    if (!close(reduced_comm_rate(RVec::Zero(sc.n_tx()), sc), sc.norm_comm, 1e-10)) {
        throw FormatError("stored M_c does not match the zero-sensing rate" + where);
    }
}

} // namespace

std::size_t Dataset::val_count() const
{
    return static_cast<std::size_t>(std::floor(val_split * static_cast<double>(samples.size())));
}

Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_samples, Stream ns, Exec exec)
{
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.samples.resize(n_samples);
    for_each_index(exec, n_samples, [&](std::size_t i) { ds.samples[i] = generate_scene(cfg, ns, i); });
    return ds;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds)
{
    const SystemConfig& c = ds.config;
    ByteWriter w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put_u32(kVersion);
    w.put_u32(static_cast<std::uint32_t>(c.n_tx));
    w.put_u32(static_cast<std::uint32_t>(c.n_rx));
    w.put_u32(static_cast<std::uint32_t>(c.n_cu));
    w.put_u32(static_cast<std::uint32_t>(c.wave_len));
    w.put_u32(static_cast<std::uint32_t>(c.feature_len()));
    w.put_u64(ds.samples.size());
    w.put_u64(c.seed);
    for (double v : {c.alpha, c.snr_s_db, c.snr_c_db, c.cell_radius_km, c.noise_power, c.csi_accuracy,
                     c.cu_range_factor, ds.val_split}) {
        w.put_f64(v);
    }
    for (const Scene& sc : ds.samples) {
        put_matrix(w, sc.channel);
        put_matrix(w, sc.channel_est);
        w.put_f64s(sc.cu_power);
        w.put_f64s(sc.tcm_eigvals);
        put_matrix(w, sc.tcm_eigvecs);
        w.put_f64s(sc.interf_eigvals);
        w.put_f64(sc.norm_sense);
        w.put_f64(sc.norm_comm);
    }
    return w.take();
}

Dataset deserialize_dataset(const std::vector<std::uint8_t>& bytes, bool verify)
{
    ByteReader rd(bytes);
    rd.expect_bytes(kMagic, sizeof(kMagic), "dataset magic");
    if (rd.get_u32() != kVersion) {
        throw FormatError("unsupported dataset version");
    }
    Dataset ds;
    SystemConfig& c = ds.config;
    c.n_tx = static_cast<int>(rd.get_u32());
    c.n_rx = static_cast<int>(rd.get_u32());
    c.n_cu = static_cast<int>(rd.get_u32());
    c.wave_len = static_cast<int>(rd.get_u32());
    const auto feature_len = static_cast<int>(rd.get_u32());
    const std::uint64_t n = rd.get_u64();
    c.seed = rd.get_u64();
    c.alpha = rd.get_f64();
    c.snr_s_db = rd.get_f64();
    c.snr_c_db = rd.get_f64();
    c.cell_radius_km = rd.get_f64();
    c.noise_power = rd.get_f64();
    c.csi_accuracy = rd.get_f64();
    c.cu_range_factor = rd.get_f64();
    ds.val_split = rd.get_f64();
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw FormatError(std::string("dataset header: ") + e.what());
    }
    if (feature_len != c.feature_len()) {
        throw FormatError("dataset header: feature length inconsistent with dimensions");
    }

    const double sense_power = sensing_power(c);
    ds.samples.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        Scene& sc = ds.samples[i];
        sc.channel = get_matrix(rd, c.n_rx, c.n_cu);
        sc.channel_est = get_matrix(rd, c.n_rx, c.n_cu);
        sc.cu_power = get_vector(rd, c.n_cu);
        sc.tcm_eigvals = get_vector(rd, c.n_tx);
        sc.tcm_eigvecs = get_matrix(rd, c.n_tx, c.n_tx);
        sc.interf_eigvals = get_vector(rd, c.n_rx);
        sc.norm_sense = rd.get_f64();
        sc.norm_comm = rd.get_f64();
        sc.sense_power = sense_power;
        sc.noise_power = c.noise_power;
        sc.wave_len = c.wave_len;
        sc.use_estimate = c.csi_accuracy < 1.0;
        if (verify) {
            verify_scene(sc, i);
        }
    }
    if (!rd.at_end()) {
        throw FormatError("trailing bytes after dataset payload");
    }
    return ds;
}

void write_dataset(const std::string& path, const Dataset& ds)
{
    write_file_bytes(path, serialize_dataset(ds));
}

Dataset read_dataset(const std::string& path, bool verify)
{
    return deserialize_dataset(read_file_bytes(path), verify);
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw std::runtime_error("write to '" + path + "' failed");
    }
}

} // namespace isaclab
