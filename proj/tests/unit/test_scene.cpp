#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "isaclab/metrics.hpp"
#include "isaclab/solvers.hpp"

using namespace isaclab;
using testutil::small_config;

TEST_SUITE("scene")
{

TEST_CASE("pathloss at reference distances")
{
    CHECK(pathloss_coeff(1.0) == doctest::Approx(std::pow(10.0, -12.81)).epsilon(1e-14));
    // 128.1 + 37.6 log10(0.2) dB
    const double pl_db = 128.1 + 37.6 * std::log10(0.2);
    CHECK(pl_db == doctest::Approx(101.82).epsilon(1e-4));
    CHECK(pathloss_coeff(0.2) == doctest::Approx(std::pow(10.0, -pl_db / 10.0)).epsilon(1e-12));
    CHECK(pathloss_coeff(0.2) == doctest::Approx(6.57e-11).epsilon(2e-3));
    CHECK(pathloss_coeff(0.2) / pathloss_coeff(0.4) == doctest::Approx(std::pow(2.0, 3.76)).epsilon(1e-12));
    CHECK_THROWS_AS(pathloss_coeff(0.0), std::domain_error);
    CHECK_THROWS_AS(pathloss_coeff(-1.0), std::domain_error);
}

TEST_CASE("snr_to_power inverts the SNR definition")
{
    CHECK(snr_to_power(0.0, 1.0, 1.0) == 1.0);
    CHECK(snr_to_power(10.0, 1.0, 1.0) == doctest::Approx(10.0).epsilon(1e-14));
    const double xi = pathloss_coeff(0.2);
    const double p = snr_to_power(10.0, xi, 1.0);
    CHECK(p == doctest::Approx(1.52e11).epsilon(5e-3));
    CHECK(10.0 * std::log10(p * xi / 1.0) == doctest::Approx(10.0).epsilon(1e-12));
    CHECK_THROWS(snr_to_power(0.0, 0.0, 1.0));
}

TEST_CASE("config validation")
{
    SystemConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    cfg.wave_len = cfg.n_tx;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.alpha = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config();
    cfg.n_cu = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config parsing rejects unknown keys and keeps typed values")
{
    std::istringstream in("n_tx = 3\nwave_len = 5  # comment\nsnr_s_db = 7.5\n");
    const SystemConfig cfg = system_config_from(parse_key_values(in));
    CHECK(cfg.n_tx == 3);
    CHECK(cfg.wave_len == 5);
    CHECK(cfg.snr_s_db == 7.5);

    std::istringstream bad("n_tx = 3\nbogus = 1\n");
    CHECK_THROWS_AS(system_config_from(parse_key_values(bad)), ConfigError);
    std::istringstream bad_value("n_tx = three\n");
    CHECK_THROWS(system_config_from(parse_key_values(bad_value)));

    std::ostringstream out;
    write_system_config(out, cfg);
    std::istringstream back(out.str());
    const SystemConfig again = system_config_from(parse_key_values(back));
    CHECK(again.n_tx == cfg.n_tx);
    CHECK(again.snr_s_db == cfg.snr_s_db);
    CHECK(again.seed == cfg.seed);
}

TEST_CASE("seed precedence: flag, then environment, then file")
{
    CHECK(resolve_seed(std::uint64_t{5}, 9) == 5);
    ::setenv("ISACLAB_SEED", "42", 1);
    CHECK(resolve_seed(std::nullopt, 9) == 42);
    CHECK(resolve_seed(std::uint64_t{5}, 9) == 5);
    ::unsetenv("ISACLAB_SEED");
    CHECK(resolve_seed(std::nullopt, 9) == 9);
}

TEST_CASE("perfect CSI gives an identical estimate")
{
    SystemConfig cfg = small_config();
    cfg.csi_accuracy = 1.0;
    Rng rng(3);
    const ChannelDraw d = gen_channel(cfg, rng);
    CHECK((d.channel_est - d.channel).norm() == 0.0);
}

TEST_CASE("imperfect CSI satisfies the mixing model")
{
    SystemConfig cfg = small_config();
    cfg.csi_accuracy = 0.7;
    Rng rng(4);
    const ChannelDraw d = gen_channel(cfg, rng);
    const CMat recon = std::sqrt(0.7) * d.channel_est + d.error;
    CHECK((recon - d.channel).norm() <= 1e-12 * d.channel.norm());
    cfg.csi_accuracy = 0.0;
    CHECK_THROWS(gen_channel(cfg, rng));
}

TEST_CASE("user distances and powers")
{
    SystemConfig cfg = small_config(4, 4, 5);
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        const ChannelDraw d = gen_channel(cfg, rng);
        for (int k = 0; k < cfg.n_cu; ++k) {
            const double dist = d.cu_distance_km[k];
            CHECK(dist >= cfg.cell_radius_km);
            CHECK(dist <= cfg.cu_range_factor * cfg.cell_radius_km);
            const double xi = pathloss_coeff(dist);
            // every user sees the same received SNR
            CHECK(10.0 * std::log10(d.cu_power[k] * xi / cfg.noise_power) == doctest::Approx(cfg.snr_c_db));
        }
    }
}

TEST_CASE("standard complex Gaussian has unit per-entry variance")
{
    Rng rng(6);
    const int n = 100000;
    double power = 0.0;
    double re2 = 0.0;
    cplx mean{0.0, 0.0};
    for (int i = 0; i < n; ++i) {
        const cplx z = rng.complex_normal();
        power += std::norm(z);
        re2 += z.real() * z.real();
        mean += z;
    }
    CHECK(power / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(re2 / n == doctest::Approx(0.5).epsilon(0.03));
    CHECK(std::abs(mean / double(n)) < 0.01);
}

TEST_CASE("regeneration is bit-identical")
{
    SystemConfig cfg = small_config(3, 2, 1);
    const Scene a = generate_scene(cfg, Stream::train, 17);
    const Scene b = generate_scene(cfg, Stream::train, 17);
    CHECK((a.channel - b.channel).norm() == 0.0);
    CHECK((a.tcm_eigvecs - b.tcm_eigvecs).norm() == 0.0);
    CHECK(a.norm_sense == b.norm_sense);
    CHECK(scene_hash(a) == scene_hash(b));
    const Scene c = generate_scene(cfg, Stream::eval, 17);
    CHECK(scene_hash(a) != scene_hash(c));
}

TEST_CASE("target covariance: unitary, trace n_tx, descending")
{
    for (int n : {1, 2, 4, 7}) {
        SystemConfig cfg = small_config(n, 2, 1, n + 2);
        Rng rng(100 + n);
        for (int t = 0; t < 20; ++t) {
            const TargetCovariance tc = gen_tcm(cfg, rng);
            const CMat gram = tc.eigvecs.adjoint() * tc.eigvecs - CMat::Identity(n, n);
            CHECK(gram.cwiseAbs().maxCoeff() < 1e-10);
            CHECK(tc.eigvals.sum() == doctest::Approx(n).epsilon(1e-12));
            CHECK(is_descending(tc.eigvals));
            CHECK(tc.eigvals.minCoeff() > 0.0);
        }
    }
}

TEST_CASE("interference eigenvalues lie in (0, 1/noise]")
{
    SystemConfig cfg = small_config(2, 5, 3);
    cfg.noise_power = 2.0;
    Rng rng(7);
    const ChannelDraw d = gen_channel(cfg, rng);
    const RVec ev = interference_eigvals(d.channel, d.cu_power, cfg.noise_power);
    CHECK(ev.size() == 5);
    CHECK(is_descending(ev));
    CHECK(ev.minCoeff() > 0.0);
    CHECK(ev.maxCoeff() <= 1.0 / cfg.noise_power * (1.0 + 1e-12));
    // n_rx > n_cu leaves an interference-free subspace
    CHECK(ev[0] == doctest::Approx(0.5).epsilon(1e-10));

    // one user: the smallest eigenvalue is 1 / (p |h|^2 + noise)
    const CMat h = d.channel.leftCols(1);
    const RVec p = d.cu_power.head(1);
    const RVec ev1 = interference_eigvals(h, p, cfg.noise_power);
    CHECK(ev1[4] == doctest::Approx(1.0 / (p[0] * h.squaredNorm() + cfg.noise_power)).epsilon(1e-10));
}

TEST_CASE("features follow the documented layout")
{
    SystemConfig cfg = small_config(3, 2, 2, 5);
    const Scene sc = generate_scene(cfg, Stream::train, 0);
    const RVec f = build_features(sc);
    REQUIRE(f.size() == cfg.feature_len());
    CHECK(f[0] == sc.channel(0, 0).real());
    CHECK(f[1] == sc.channel(1, 0).real());
    CHECK(f[2] == sc.channel(0, 1).real());
    CHECK(f[4] == sc.channel(0, 0).imag());
    CHECK(f[8] == sc.tcm_eigvals[0]);
    SystemConfig full;
    CHECK(full.feature_len() == 176);
}

TEST_CASE("normalizers match their definitions")
{
    SystemConfig cfg = small_config();
    const Scene sc = generate_scene(cfg, Stream::train, 3);
    CHECK(sc.norm_comm == reduced_comm_rate(RVec::Zero(4), sc));
    const auto wf = waterfill_ms(sc.tcm_eigvals, sc.sense_power, sc.noise_power, sc.n_rx(), sc.wave_len);
    CHECK(sc.norm_sense == wf.max_rate);
    CHECK(sc.sense_power == doctest::Approx(10.0).epsilon(1e-14));
}

TEST_CASE("dataset round-trip and stored normalizers")
{
    SystemConfig cfg = small_config(3, 3, 2, 5);
    const Dataset ds = generate_dataset(cfg, 25);
    CHECK(ds.val_count() == 5);
    CHECK(ds.train_count() == 20);
    const auto bytes = serialize_dataset(ds);
    const Dataset back = deserialize_dataset(bytes, true);
    REQUIRE(back.samples.size() == 25);
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK((back.samples[i].channel - ds.samples[i].channel).norm() == 0.0);
        CHECK(back.samples[i].norm_comm == ds.samples[i].norm_comm);
        CHECK(back.samples[i].norm_comm ==
              doctest::Approx(reduced_comm_rate(RVec::Zero(3), back.samples[i])).epsilon(1e-12));
    }
    CHECK(serialize_dataset(back) == bytes);

    auto corrupt = bytes;
    corrupt[0] ^= 0xff;
    CHECK_THROWS(deserialize_dataset(corrupt));
    auto truncated = bytes;
    truncated.resize(bytes.size() - 8);
    CHECK_THROWS(deserialize_dataset(truncated));
}

TEST_CASE("train and eval streams do not collide")
{
    SystemConfig cfg = small_config(2, 4, 2, 4);
    const Dataset tr = generate_dataset(cfg, 300, Stream::train);
    const Dataset ev = generate_dataset(cfg, 300, Stream::eval);
    std::set<std::uint64_t> seen;
    for (const auto& s : tr.samples) {
        seen.insert(scene_hash(s));
    }
    for (const auto& s : ev.samples) {
        CHECK(seen.count(scene_hash(s)) == 0);
    }
}

} // TEST_SUITE
