#include <cmath>
#include <functional>

#include "doctest.h"
#include "helpers.hpp"
#include "isaclab/nn.hpp"
#include "isaclab/rng.hpp"

using namespace isaclab;
using namespace isaclab::nn;

namespace {

Batch random_batch(Rng& rng, int n, Shape shape, double scale = 1.0)
{
    Batch b(n, shape);
    for (double& v : b.data) {
        v = scale * rng.normal();
    }
    return b;
}

std::vector<double> random_vector(Rng& rng, std::size_t n)
{
    std::vector<double> v(n);
    for (double& x : v) {
        x = rng.normal();
    }
    return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

/// Central difference of a scalar function of one vector entry.
double fd(const std::function<double()>& f, double& slot, double h = 1e-6)
{
    const double keep = slot;
    slot = keep + h;
    const double up = f();
    slot = keep - h;
    const double down = f();
    slot = keep;
    return (up - down) / (2 * h);
}

void check_close(double analytic, double numeric, double tol)
{
    CHECK(std::abs(analytic - numeric) <= tol * std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
}

} // namespace

TEST_SUITE("nn")
{

TEST_CASE("architectures")
{
    const Architecture a = Architecture::isacnn(12, 4);
    REQUIRE(a.trunk.size() == 10);
    CHECK(a.trunk[0].kind == LayerKind::batch_norm);
    CHECK(a.trunk[1] == LayerSpec{LayerKind::conv1d, 2, 5});
    CHECK(a.trunk[4] == LayerSpec{LayerKind::conv1d, 4, 3});
    CHECK(a.trunk[7] == LayerSpec{LayerKind::conv1d, 8, 3});
    CHECK(a.trunk[9].kind == LayerKind::flatten);
    CHECK(a.theta_head == std::vector<LayerSpec>{{LayerKind::batch_norm, 0, 0}, {LayerKind::fully_connected, 4, 0},
                                                 {LayerKind::sigmoid, 0, 0}});
    CHECK(a.eta_head[1] == LayerSpec{LayerKind::fully_connected, 1, 0});

    const Layout lay = compute_layout(a);
    const int len = 12;
    const std::size_t expect = 2 * len + (2 * 5 + 2) + 2 * 2 * len + (4 * 2 * 3 + 4) + 2 * 4 * len + (8 * 4 * 3 + 8) +
                               2 * 8 * len + (4 * 8 * len + 4) + 2 * 8 * len + (8 * len + 1);
    CHECK(lay.param_count == expect);
    CHECK(init_params(a, 1).weights.size() == expect);

    const Architecture f = Architecture::fcnn(12, 3);
    CHECK(f.trunk[1] == LayerSpec{LayerKind::fully_connected, 24, 0});
    CHECK(f.trunk[4] == LayerSpec{LayerKind::fully_connected, 12, 0});
    CHECK(f.trunk[7] == LayerSpec{LayerKind::fully_connected, 6, 0});

    Architecture bad = a;
    bad.trunk[1].kernel = 4;
    CHECK_THROWS(bad.validate());
    CHECK(arch_kind_from("fcnn") == ArchKind::fcnn);
    CHECK_THROWS(arch_kind_from("mlp"));
}

TEST_CASE("initialization")
{
    const Architecture a = Architecture::isacnn(12, 4);
    const NetworkParams p = init_params(a, 3);
    const NetworkParams q = init_params(a, 3);
    CHECK(p.weights == q.weights);
    CHECK(init_params(a, 4).weights != p.weights);
    const Layout lay = compute_layout(a);
    const LayerSlot& conv = lay.trunk[1];
    const double bound = 1.0 / std::sqrt(5.0);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(std::abs(p.weights[conv.param_offset + i]) <= bound);
    }
    CHECK(p.weights[conv.param_offset + 10] == 0.0);
    const LayerSlot& bn = lay.trunk[0];
    CHECK(p.weights[bn.param_offset] == 1.0);
    CHECK(p.weights[bn.param_offset + 12] == 0.0);
    CHECK(p.bn_state[bn.state_offset] == 0.0);
    CHECK(p.bn_state[bn.state_offset + 12] == 1.0);
}

TEST_CASE("convolution matches the direct sum")
{
    Rng rng(1);
    const Shape s{3, 7};
    const Batch x = random_batch(rng, 4, s);
    const int c_out = 2, k = 5;
    const auto w = random_vector(rng, static_cast<std::size_t>(c_out * 3 * k + c_out));
    Batch y;
    kernels::conv_forward(x, w, c_out, k, y, Exec::serial);
    REQUIRE(y.shape == Shape{2, 7});
    for (int n = 0; n < 4; ++n) {
        for (int o = 0; o < c_out; ++o) {
            for (int p = 0; p < 7; ++p) {
                double acc = w[c_out * 3 * k + o];
                for (int c = 0; c < 3; ++c) {
                    for (int j = 0; j < k; ++j) {
                        const int q = p + j - 2;
                        if (q >= 0 && q < 7) {
                            acc += w[(o * 3 + c) * k + j] * x.row(n)[c * 7 + q];
                        }
                    }
                }
                CHECK(y.row(n)[o * 7 + p] == doctest::Approx(acc).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("fully connected gradient is input times upstream")
{
    Batch x(1, Shape{1, 3});
    x.data = {1.0, -2.0, 0.5};
    std::vector<double> w(2 * 3 + 2, 0.0);
    Batch dy(1, Shape{1, 2});
    dy.data = {3.0, -1.0};
    Batch dx;
    std::vector<double> dw(w.size());
    kernels::fc_backward(x, dy, w, dx, dw, Exec::serial);
    const std::vector<double> expect{3.0, -6.0, 1.5, -1.0, 2.0, -0.5, 3.0, -1.0};
    CHECK(dw == expect);
}

TEST_CASE("layer gradients against finite differences")
{
    Rng rng(2);
    const Shape s{2, 5};
    Batch x = random_batch(rng, 3, s);

    SUBCASE("conv")
    {
        auto w = random_vector(rng, 3 * 2 * 3 + 3);
        Batch y;
        kernels::conv_forward(x, w, 3, 3, y, Exec::serial);
        const Batch up = random_batch(rng, 3, y.shape);
        auto objective = [&] {
            Batch out;
            kernels::conv_forward(x, w, 3, 3, out, Exec::serial);
            return dot(out.data, up.data);
        };
        Batch dx;
        std::vector<double> dw(w.size());
        kernels::conv_backward(x, up, w, 3, dx, dw, Exec::serial);
        for (std::size_t i = 0; i < w.size(); ++i) {
            check_close(dw[i], fd(objective, w[i]), 1e-7);
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            check_close(dx.data[i], fd(objective, x.data[i]), 1e-7);
        }
    }
    SUBCASE("batch norm")
    {
        auto gb = random_vector(rng, 2 * 10);
        std::span<const double> gamma(gb.data(), 10), beta(gb.data() + 10, 10);
        const Batch up = random_batch(rng, 3, s);
        auto objective = [&] {
            Batch out;
            LayerCache c;
            kernels::bn_forward_train(x, gamma, beta, out, c, Exec::serial);
            return dot(out.data, up.data);
        };
        Batch y;
        LayerCache cache;
        kernels::bn_forward_train(x, gamma, beta, y, cache, Exec::serial);
        Batch dx;
        std::vector<double> dg(10), dbeta(10);
        kernels::bn_backward(up, cache, gamma, dx, dg, dbeta, Exec::serial);
        for (std::size_t i = 0; i < 10; ++i) {
            check_close(dg[i], fd(objective, gb[i]), 1e-6);
            check_close(dbeta[i], fd(objective, gb[10 + i]), 1e-6);
        }
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            check_close(dx.data[i], fd(objective, x.data[i]), 1e-5);
        }
    }
}

TEST_CASE("batch norm normalizes per feature in train mode")
{
    Rng rng(3);
    const Batch x = random_batch(rng, 64, Shape{2, 3}, 5.0);
    const std::vector<double> gamma(6, 1.0), beta(6, 0.0);
    Batch y;
    LayerCache cache;
    kernels::bn_forward_train(x, gamma, beta, y, cache, Exec::serial);
    for (int f = 0; f < 6; ++f) {
        double m = 0.0, v = 0.0;
        for (int n = 0; n < 64; ++n) {
            m += y.row(n)[f];
        }
        m /= 64;
        for (int n = 0; n < 64; ++n) {
            v += (y.row(n)[f] - m) * (y.row(n)[f] - m);
        }
        v /= 64;
        CHECK(std::abs(m) < 1e-12);
        CHECK(v == doctest::Approx(cache.batch_var[f] / (cache.batch_var[f] + kBnEps)).epsilon(1e-10));
    }
}

TEST_CASE("network: zero upstream, inference determinism, stale caches")
{
    const Architecture a = Architecture::isacnn(8, 2);
    NetworkParams p = init_params(a, 5);
    Rng rng(4);
    const Batch x = random_batch(rng, 6, Shape{1, 8});
    ForwardCache cache;
    const HeadOutputs out = forward_heads(p, x, Mode::train, &cache, Exec::serial);
    for (double v : out.theta.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    Batch zt(6, out.theta.shape), ze(6, out.eta.shape);
    const auto g = backward_heads(p, cache, zt, ze, Exec::serial);
    for (double v : g) {
        CHECK(v == 0.0);
    }

    const HeadOutputs i1 = forward_heads(p, x, Mode::infer, nullptr, Exec::serial);
    const HeadOutputs i2 = forward_heads(p, x, Mode::infer, nullptr, Exec::serial);
    CHECK(i1.theta.data == i2.theta.data);
    CHECK(i1.eta.data == i2.eta.data);

    // running statistics move only when asked
    const auto state = p.bn_state;
    apply_running_stats(p, cache);
    CHECK(p.bn_state != state);
    const LayerSlot& bn0 = compute_layout(a).trunk[0];
    const double expect = kBnMomentum * state[bn0.state_offset] + (1 - kBnMomentum) * cache.trunk[0].batch_mean[0];
    CHECK(p.bn_state[bn0.state_offset] == doctest::Approx(expect).epsilon(1e-15));

    p.weights[0] += 1.0;
    CHECK_THROWS_AS(backward_heads(p, cache, zt, ze, Exec::serial), StaleCacheError);
    ForwardCache infer_cache;
    forward_heads(p, x, Mode::infer, &infer_cache, Exec::serial);
    CHECK_THROWS_AS(backward_heads(p, infer_cache, zt, ze, Exec::serial), StaleCacheError);

    Batch wrong = random_batch(rng, 2, Shape{1, 9});
    CHECK_THROWS(forward_heads(p, wrong, Mode::infer, nullptr));
}

} // TEST_SUITE
