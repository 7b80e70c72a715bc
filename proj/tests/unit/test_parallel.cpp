#include "doctest.h"
#include "helpers.hpp"
#include "isaclab/experiment.hpp"
#include "isaclab/isacnn.hpp"

using namespace isaclab;
using testutil::small_config;

// The OpenMP path and the plain-loop path must agree bit for bit.
TEST_SUITE("parallel")
{

TEST_CASE("dataset generation")
{
    const SystemConfig cfg = small_config();
    const auto a = serialize_dataset(generate_dataset(cfg, 64, Stream::train, Exec::serial));
    const auto b = serialize_dataset(generate_dataset(cfg, 64, Stream::train, Exec::parallel));
    CHECK(a == b);
}

TEST_CASE("network forward and backward")
{
    const SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 40, Stream::test);
    std::vector<const Scene*> ptrs;
    for (const auto& s : ds.samples) {
        ptrs.push_back(&s);
    }
    for (auto kind : {nn::ArchKind::isacnn, nn::ArchKind::fcnn}) {
        const nn::NetworkParams p = nn::init_params(make_architecture(kind, cfg.feature_len(), 4), 3);
        nn::ForwardCache cs, cp;
        const auto os = forward(p, ptrs, nn::Mode::train, &cs, Exec::serial);
        const auto op = forward(p, ptrs, nn::Mode::train, &cp, Exec::parallel);
        std::vector<RVec> grads;
        for (std::size_t i = 0; i < os.size(); ++i) {
            CHECK((os[i].sigma_pred.values - op[i].sigma_pred.values).norm() == 0.0);
            grads.push_back(loss_grad_sigma(os[i].sigma_pred.values, ds.samples[i], 0.5));
        }
        CHECK(backward(p, cs, os, grads, Exec::serial) == backward(p, cp, op, grads, Exec::parallel));
    }
}

TEST_CASE("training")
{
    const SystemConfig cfg = small_config();
    const Dataset ds = generate_dataset(cfg, 100, Stream::train);
    TrainConfig tc;
    tc.max_epochs = 3;
    tc.batch_size = 32;
    const TrainResult s = train(ds, tc, nn::ArchKind::isacnn, 0.5, {}, Exec::serial);
    const TrainResult p = train(ds, tc, nn::ArchKind::isacnn, 0.5, {}, Exec::parallel);
    CHECK(s.params.weights == p.params.weights);
    CHECK(s.run.history.back().val_loss == p.run.history.back().val_loss);
}

TEST_CASE("grid oracle and experiment rows")
{
    const Scene sc = generate_scene(small_config(3, 4, 2, 5), Stream::test, 1);
    const auto a = grid_oracle(sc, 0.5, sc.sense_power / 30, Exec::serial);
    const auto b = grid_oracle(sc, 0.5, sc.sense_power / 30, Exec::parallel);
    CHECK(a.best_wsnr == b.best_wsnr);
    CHECK((a.best_sigma_s.values - b.best_sigma_s.values).norm() == 0.0);

    ExperimentSpec spec;
    spec.base = small_config(2, 4, 2, 4);
    spec.schemes = {Scheme::average, Scheme::zf, Scheme::pgrad};
    spec.eval_samples = 10;
    EvalOptions serial;
    serial.exec = Exec::serial;
    const auto rs = run_experiment(spec, serial);
    const auto rp = run_experiment(spec, {});
    CHECK(results_csv(spec, rs) == results_csv(spec, rp));
    CHECK(samples_csv(spec, rs) == samples_csv(spec, rp));
}

} // TEST_SUITE
