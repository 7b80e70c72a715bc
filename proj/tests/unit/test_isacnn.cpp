#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "isaclab/isacnn.hpp"
#include "isaclab/oracles.hpp"

using namespace isaclab;
using testutil::small_config;

namespace {

RVec vec_of(std::initializer_list<double> xs)
{
    RVec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        v[i++] = x;
    }
    return v;
}

std::vector<const Scene*> pointers(const std::vector<Scene>& scenes, std::size_t from = 0, std::size_t count = 0)
{
    std::vector<const Scene*> out;
    const std::size_t end = count ? from + count : scenes.size();
    for (std::size_t i = from; i < end; ++i) {
        out.push_back(&scenes[i]);
    }
    return out;
}

TrainConfig quick_config(int epochs)
{
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.batch_size = 32;
    cfg.seed = 7;
    return cfg;
}

} // namespace

TEST_SUITE("isacnn")
{

TEST_CASE("Lambda worked example")
{
    const LambdaOutput out = lambda_forward(vec_of({0.2, 0.5, 0.3}), 0.5, 10.0);
    CHECK(out.sigma_pred.values[0] == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(out.sigma_pred.values[1] == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(out.sigma_pred.values[2] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(out.order == std::vector<int>{1, 2, 0});
    CHECK(out.sigma_pred.values.sum() <= 5.0);
}

TEST_CASE("Lambda keeps ties in index order")
{
    const LambdaOutput out = lambda_forward(vec_of({0.4, 0.4, 0.2}), 1.0, 1.0);
    CHECK(out.order == std::vector<int>{0, 1, 2});
}

TEST_CASE("Lambda never exceeds the budget")
{
    Rng rng(1);
    for (int t = 0; t < 20000; ++t) {
        const int n = 1 + t % 8;
        RVec theta(n);
        for (int i = 0; i < n; ++i) {
            theta[i] = rng.uniform_pos();
        }
        const double eta = t % 3 == 0 ? 1.0 : rng.uniform_pos();
        const double budget = std::pow(10.0, rng.uniform(-3.0, 3.0));
        const LambdaOutput out = lambda_forward(theta, eta, budget);
        CHECK(out.sigma_pred.values.sum() <= budget);
        CHECK(is_descending(out.sigma_pred.values));
        CHECK(out.sigma_pred.values.minCoeff() >= 0.0);
    }
}

TEST_CASE("Lambda backward against finite differences")
{
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const int n = 2 + t % 4;
        RVec theta(n);
        for (int i = 0; i < n; ++i) {
            theta[i] = rng.uniform(0.05, 0.95);
        }
        const double eta = rng.uniform(0.1, 0.9);
        const RVec up = RVec::NullaryExpr(n, [&] { return rng.normal(); });
        auto f = [&](const RVec& th, double e) { return lambda_forward(th, e, 7.0).sigma_pred.values.dot(up); };
        const LambdaOutput out = lambda_forward(theta, eta, 7.0);
        RVec g_theta;
        double g_eta = 0.0;
        lambda_backward(out, up, g_theta, g_eta);
        const double h = 1e-7;
        for (int i = 0; i < n; ++i) {
            RVec a = theta, b = theta;
            a[i] += h;
            b[i] -= h;
            CHECK(g_theta[i] == doctest::Approx((f(a, eta) - f(b, eta)) / (2 * h)).epsilon(1e-6));
        }
        CHECK(g_eta == doctest::Approx((f(theta, eta + h) - f(theta, eta - h)) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("loss at the extremes and against the metrics module")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 5, Stream::test);
    const auto ptrs = pointers(ds.samples);
    std::vector<PowerSpectrum> zero(5, PowerSpectrum{RVec::Zero(4), ds.samples[0].sense_power});
    CHECK(loss(zero, ptrs, 0.0) == doctest::Approx(-1.0).epsilon(1e-15));
    CHECK(loss(zero, ptrs, 1.0) == 0.0);

    const RVec sigma = vec_of({4.0, 3.0, 2.0, 0.5});
    std::vector<PowerSpectrum> one{PowerSpectrum{sigma, ds.samples[0].sense_power}};
    CHECK(loss(one, {ptrs[0]}, 0.4) == -wsnr(sigma, ds.samples[0], 0.4).wsnr);
    const RVec g = loss_grad_sigma(sigma, ds.samples[0], 0.4);
    CHECK((g + wsnr_gradient(sigma, ds.samples[0], 0.4)).norm() == 0.0);
}

TEST_CASE("parameter gradients of a tiny network match finite differences")
{
    const SystemConfig cfg = small_config(2, 3, 1, 4);
    REQUIRE(cfg.feature_len() == 8);
    const Dataset ds = generate_dataset(cfg, 4, Stream::test);
    for (auto kind : {nn::ArchKind::isacnn, nn::ArchKind::fcnn}) {
        const nn::NetworkParams p = nn::init_params(make_architecture(kind, 8, 2), 9);
        const auto check = oracle::check_network_gradient(p, pointers(ds.samples), 0.5);
        CHECK(check.checked == p.weights.size());
        CHECK(check.max_rel_error < 1e-4);
    }
}

TEST_CASE("forward output is feasible for random parameters")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 16, Stream::test);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        nn::NetworkParams p = nn::init_params(make_architecture(nn::ArchKind::isacnn, cfg.feature_len(), 4), seed);
        Rng rng(seed);
        for (double& w : p.weights) {
            w += 3.0 * rng.normal();
        }
        for (auto mode : {nn::Mode::train, nn::Mode::infer}) {
            for (const auto& out : forward(p, pointers(ds.samples), mode)) {
                CHECK(out.sigma_pred.feasible(0.0));
            }
        }
    }
}

TEST_CASE("train config")
{
    TrainConfig cfg;
    CHECK(cfg.lr_init == 1e-3);
    CHECK(cfg.max_epochs == 500);
    CHECK(cfg.batch_size == 256);
    CHECK(cfg.early_stop_patience == 20);
    CHECK(cfg.plateau_patience == 10);
    CHECK(cfg.plateau_factor == 0.33);
    apply_train_key(cfg, "batch_size", "64");
    CHECK(cfg.batch_size == 64);
    CHECK_THROWS(apply_train_key(cfg, "momentum", "0.5"));
    CHECK(cfg.bn_stats == BnStats::population);
    apply_train_key(cfg, "bn_stats", "ema");
    CHECK(cfg.bn_stats == BnStats::ema);
    CHECK_THROWS(apply_train_key(cfg, "bn_stats", "batch"));
    cfg.batch_size = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("training: history, best parameters, early stop")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 200, Stream::train);
    TrainConfig tc = quick_config(12);
    const TrainResult r = train(ds, tc, nn::ArchKind::isacnn, 0.5);
    REQUIRE(r.run.history.size() == 12);
    double running = std::numeric_limits<double>::infinity();
    for (const auto& e : r.run.history) {
        running = std::min(running, e.val_loss);
        CHECK(e.best_val == running);
        CHECK(std::isfinite(e.train_loss));
    }
    CHECK(r.run.best_val == running);
    const auto val = pointers(ds.samples, ds.train_count(), ds.val_count());
    CHECK(evaluate_loss(r.params, val, 0.5) == r.run.best_val);
    CHECK(r.run.history.front().lr == tc.lr_init);

    // patience 1 with an impossible improvement threshold stops after two epochs
    tc.early_stop_patience = 1;
    tc.min_delta = 1e9;
    const TrainResult stopped = train(ds, tc, nn::ArchKind::isacnn, 0.5);
    CHECK(stopped.run.history.size() == 2);
    CHECK(stopped.run.finished);
}

TEST_CASE("population batch-norm statistics match the training split")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 120, Stream::train);
    const nn::Batch x = feature_batch(pointers(ds.samples, 0, ds.train_count()));
    double gap[2] = {0.0, 0.0};
    for (BnStats mode : {BnStats::population, BnStats::ema}) {
        TrainConfig tc = quick_config(3);
        tc.bn_stats = mode;
        TrainRun run = start_run(make_architecture(nn::ArchKind::isacnn, cfg.feature_len(), 4), tc);
        continue_training(run, ds, tc, 0.5);
        nn::ForwardCache c;
        const auto batch = nn::forward_heads(run.current, x, nn::Mode::train, &c);
        const auto infer = nn::forward_heads(run.current, x, nn::Mode::infer, nullptr);
        double& g = gap[mode == BnStats::ema];
        for (std::size_t i = 0; i < batch.theta.data.size(); ++i) {
            g = std::max(g, std::abs(batch.theta.data[i] - infer.theta.data[i]));
        }
        for (std::size_t i = 0; i < batch.eta.data.size(); ++i) {
            g = std::max(g, std::abs(batch.eta.data[i] - infer.eta.data[i]));
        }
    }
    CHECK(gap[0] < 1e-9);
    CHECK(gap[1] > 1e-6);
}

TEST_CASE("plateau schedule cuts the learning rate")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 100, Stream::train);
    TrainConfig tc = quick_config(7);
    tc.plateau_patience = 2;
    tc.min_delta = 1e9;
    const TrainResult r = train(ds, tc, nn::ArchKind::fcnn, 0.5);
    std::vector<double> lrs;
    for (const auto& e : r.run.history) {
        lrs.push_back(e.lr);
    }
    const double a = tc.lr_init, b = a * 0.33, c = b * 0.33;
    CHECK(lrs == std::vector<double>{a, a, a, b, b, c, c});
}

TEST_CASE("checkpoints round-trip and resume bit-exactly")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 120, Stream::train);
    const TrainConfig full_cfg = quick_config(4);
    const TrainResult full = train(ds, full_cfg, nn::ArchKind::isacnn, 0.3);

    TrainConfig part_cfg = quick_config(2);
    TrainRun run = start_run(make_architecture(nn::ArchKind::isacnn, cfg.feature_len(), 4), part_cfg);
    continue_training(run, ds, part_cfg, 0.3);
    const auto bytes = serialize_checkpoint(Checkpoint{part_cfg, 0.3, run});
    Checkpoint ck = deserialize_checkpoint(bytes);
    CHECK(serialize_checkpoint(ck) == bytes);
    CHECK(ck.run.current.weights == run.current.weights);
    CHECK(ck.run.adam.step == run.adam.step);
    continue_training(ck.run, ds, full_cfg, 0.3);

    CHECK(ck.run.current.weights == full.run.current.weights);
    CHECK(ck.run.current.bn_state == full.run.current.bn_state);
    CHECK(ck.run.best.weights == full.params.weights);
    CHECK(ck.run.adam.m == full.run.adam.m);
    CHECK(ck.run.history.size() == 4);
    CHECK(ck.run.history.back().val_loss == full.run.history.back().val_loss);

    const auto pbytes = serialize_params(full.params);
    const nn::NetworkParams back = deserialize_params(pbytes);
    CHECK(back.arch == full.params.arch);
    CHECK(back.weights == full.params.weights);
    CHECK(back.bn_state == full.params.bn_state);

    auto broken = bytes;
    broken.push_back(0);
    CHECK_THROWS(deserialize_checkpoint(broken));
    auto truncated = pbytes;
    truncated.resize(pbytes.size() / 2);
    CHECK_THROWS(deserialize_params(truncated));
}

TEST_CASE("history CSV")
{
    std::vector<EpochRecord> h{{1, -0.5, -0.6, 1e-3, -0.6}, {2, -0.7, -0.65, 1e-3, -0.65}};
    const std::string csv = history_csv(h);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,train_loss,val_loss,lr,best_val_loss");
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
}

TEST_CASE("predict runs the whole pipeline consistently")
{
    SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 6, Stream::test);
    const nn::NetworkParams p = nn::init_params(make_architecture(nn::ArchKind::isacnn, cfg.feature_len(), 4), 2);
    const auto spectra = predict_spectra(p, pointers(ds.samples));
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Scene& sc = ds.samples[i];
        const Prediction pr = predict(p, sc, 0.5);
        CHECK(pr.spectrum.feasible(0.0));
        CHECK((pr.spectrum.values - spectra[i].values).norm() == 0.0);
        CHECK(std::abs(pr.rates.wsnr - wsnr(pr.spectrum.values, sc, 0.5).wsnr) <= 1e-12);
        CHECK(pr.waveform.power() == doctest::Approx(pr.spectrum.values.sum()).epsilon(1e-12));
        CHECK(pr.beams.beams.size() == 2);
    }
    SystemConfig other = small_config(4, 3, 2, 6);
    const Scene wrong = generate_scene(other, Stream::test, 0);
    CHECK_THROWS(predict(p, wrong, 0.5));
}

} // TEST_SUITE
