#include <cmath>

#include "isaclab/nn.hpp"

namespace isaclab::nn::kernels {

// Batch norm keeps one statistic per feature (channel x position), so every
// feature gets its own scale and shift. Work is split across features.

void bn_forward_train(const Batch& x, std::span<const double> gamma, std::span<const double> beta, Batch& y,
                      LayerCache& cache, Exec exec)
{
    const int f_count = x.shape.size();
    const int n = x.n;
    if (n < 1) {
        throw std::invalid_argument("batch norm: empty batch");
    }
    y = Batch(n, x.shape);
    cache.xhat.assign(x.data.size(), 0.0);
    cache.inv_std.assign(f_count, 0.0);
    cache.batch_mean.assign(f_count, 0.0);
    cache.batch_var.assign(f_count, 0.0);
    for_each_index(exec, f_count, [&](std::size_t fi) {
        const int f = static_cast<int>(fi);
        double mean = 0.0;
        for (int s = 0; s < n; ++s) {
            mean += x.row(s)[f];
        }
        mean /= n;
        double var = 0.0;
        for (int s = 0; s < n; ++s) {
            const double d = x.row(s)[f] - mean;
            var += d * d;
        }
        var /= n;
        const double inv_std = 1.0 / std::sqrt(var + kBnEps);
        cache.batch_mean[f] = mean;
        cache.batch_var[f] = var;
        cache.inv_std[f] = inv_std;
        for (int s = 0; s < n; ++s) {
            const std::size_t idx = static_cast<std::size_t>(s) * f_count + f;
            const double xh = (x.data[idx] - mean) * inv_std;
            cache.xhat[idx] = xh;
            y.data[idx] = gamma[f] * xh + beta[f];
        }
    });
}

void bn_forward_infer(const Batch& x, std::span<const double> gamma, std::span<const double> beta,
                      std::span<const double> run_mean, std::span<const double> run_var, Batch& y, Exec exec)
{
    const int f_count = x.shape.size();
    y = Batch(x.n, x.shape);
    for_each_index(exec, x.n, [&](std::size_t s) {
        const double* in = x.row(static_cast<int>(s));
        double* out = y.row(static_cast<int>(s));
        for (int f = 0; f < f_count; ++f) {
            out[f] = gamma[f] * (in[f] - run_mean[f]) / std::sqrt(run_var[f] + kBnEps) + beta[f];
        }
    });
}

void bn_backward(const Batch& dy, const LayerCache& cache, std::span<const double> gamma, Batch& dx,
                 std::span<double> dgamma, std::span<double> dbeta, Exec exec)
{
    const int f_count = dy.shape.size();
    const int n = dy.n;
    if (cache.xhat.size() != dy.data.size()) {
        throw std::invalid_argument("batch norm backward: cache mismatch");
    }
    dx = Batch(n, dy.shape);
    for_each_index(exec, f_count, [&](std::size_t fi) {
        const int f = static_cast<int>(fi);
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (int s = 0; s < n; ++s) {
            const std::size_t idx = static_cast<std::size_t>(s) * f_count + f;
            sum_dy += dy.data[idx];
            sum_dy_xhat += dy.data[idx] * cache.xhat[idx];
        }
        dgamma[f] = sum_dy_xhat;
        dbeta[f] = sum_dy;
        const double scale = gamma[f] * cache.inv_std[f] / n;
        for (int s = 0; s < n; ++s) {
            const std::size_t idx = static_cast<std::size_t>(s) * f_count + f;
            dx.data[idx] = scale * (n * dy.data[idx] - sum_dy - cache.xhat[idx] * sum_dy_xhat);
        }
    });
}

void conv_forward(const Batch& x, std::span<const double> w, int c_out, int kernel, Batch& y, Exec exec)
{
    const int c_in = x.shape.channels;
    const int len = x.shape.length;
    const int pad = (kernel - 1) / 2;
    const std::size_t n_w = static_cast<std::size_t>(c_out) * c_in * kernel;
    if (w.size() != n_w + c_out) {
        throw std::invalid_argument("conv: weight count mismatch");
    }
    y = Batch(x.n, Shape{c_out, len});
    for_each_index(exec, x.n, [&](std::size_t s) {
        const double* in = x.row(static_cast<int>(s));
        double* out = y.row(static_cast<int>(s));
        for (int o = 0; o < c_out; ++o) {
            for (int p = 0; p < len; ++p) {
                double acc = w[n_w + o];
                for (int c = 0; c < c_in; ++c) {
                    const double* wk = w.data() + (static_cast<std::size_t>(o) * c_in + c) * kernel;
                    for (int j = 0; j < kernel; ++j) {
                        const int q = p + j - pad;
                        if (q >= 0 && q < len) {
                            acc += wk[j] * in[c * len + q];
                        }
                    }
                }
                out[o * len + p] = acc;
            }
        }
    });
}

void conv_backward(const Batch& x, const Batch& dy, std::span<const double> w, int kernel, Batch& dx,
                   std::span<double> dw, Exec exec)
{
    const int c_in = x.shape.channels;
    const int len = x.shape.length;
    const int c_out = dy.shape.channels;
    const int pad = (kernel - 1) / 2;
    const std::size_t n_w = static_cast<std::size_t>(c_out) * c_in * kernel;
    if (dy.n != x.n || dy.shape.length != len) {
        throw std::invalid_argument("conv backward: shape mismatch");
    }
    dx = Batch(x.n, x.shape);
    for_each_index(exec, x.n, [&](std::size_t s) {
        const double* g = dy.row(static_cast<int>(s));
        double* out = dx.row(static_cast<int>(s));
        for (int c = 0; c < c_in; ++c) {
            for (int q = 0; q < len; ++q) {
                double acc = 0.0;
                for (int o = 0; o < c_out; ++o) {
                    const double* wk = w.data() + (static_cast<std::size_t>(o) * c_in + c) * kernel;
                    for (int j = 0; j < kernel; ++j) {
                        const int p = q - j + pad;
                        if (p >= 0 && p < len) {
                            acc += wk[j] * g[o * len + p];
                        }
                    }
                }
                out[c * len + q] = acc;
            }
        }
    });
    // Weight gradients are split by output channel; each sums over samples
    // in order, so the result does not depend on the thread count.
    for_each_index(exec, c_out, [&](std::size_t oi) {
        const int o = static_cast<int>(oi);
        double db = 0.0;
        for (int c = 0; c < c_in; ++c) {
            for (int j = 0; j < kernel; ++j) {
                dw[(static_cast<std::size_t>(o) * c_in + c) * kernel + j] = 0.0;
            }
        }
        for (int s = 0; s < x.n; ++s) {
            const double* in = x.row(s);
            const double* g = dy.row(s) + o * len;
            for (int p = 0; p < len; ++p) {
                db += g[p];
            }
            for (int c = 0; c < c_in; ++c) {
                for (int j = 0; j < kernel; ++j) {
                    double acc = 0.0;
                    for (int p = 0; p < len; ++p) {
                        const int q = p + j - pad;
                        if (q >= 0 && q < len) {
                            acc += g[p] * in[c * len + q];
                        }
                    }
                    dw[(static_cast<std::size_t>(o) * c_in + c) * kernel + j] += acc;
                }
            }
        }
        dw[n_w + o] = db;
    });
}

void fc_forward(const Batch& x, std::span<const double> w, int out, Batch& y, Exec exec)
{
    const int in = x.shape.size();
    const std::size_t n_w = static_cast<std::size_t>(out) * in;
    if (w.size() != n_w + out) {
        throw std::invalid_argument("fully connected: weight count mismatch");
    }
    y = Batch(x.n, Shape{out, 1});
    for_each_index(exec, x.n, [&](std::size_t s) {
        const double* xi = x.row(static_cast<int>(s));
        double* yo = y.row(static_cast<int>(s));
        for (int o = 0; o < out; ++o) {
            const double* wo = w.data() + static_cast<std::size_t>(o) * in;
            double acc = w[n_w + o];
            for (int i = 0; i < in; ++i) {
                acc += wo[i] * xi[i];
            }
            yo[o] = acc;
        }
    });
}

void fc_backward(const Batch& x, const Batch& dy, std::span<const double> w, Batch& dx, std::span<double> dw, Exec exec)
{
    const int in = x.shape.size();
    const int out = dy.shape.size();
    const std::size_t n_w = static_cast<std::size_t>(out) * in;
    if (dy.n != x.n) {
        throw std::invalid_argument("fully connected backward: batch mismatch");
    }
    dx = Batch(x.n, x.shape);
    for_each_index(exec, x.n, [&](std::size_t s) {
        const double* g = dy.row(static_cast<int>(s));
        double* d = dx.row(static_cast<int>(s));
        for (int o = 0; o < out; ++o) {
            const double* wo = w.data() + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) {
                d[i] += wo[i] * g[o];
            }
        }
    });
    for_each_index(exec, out, [&](std::size_t oi) {
        const int o = static_cast<int>(oi);
        double* dwo = dw.data() + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
            dwo[i] = 0.0;
        }
        double db = 0.0;
        for (int s = 0; s < x.n; ++s) {
            const double g = dy.row(s)[o];
            const double* xi = x.row(s);
            db += g;
            for (int i = 0; i < in; ++i) {
                dwo[i] += g * xi[i];
            }
        }
        dw[n_w + o] = db;
    });
}

} // namespace isaclab::nn::kernels
