#pragma once

#include <cstdint>
#include <random>

#include "isaclab/linalg.hpp"

namespace isaclab {

/// Seed namespaces; training and evaluation scenes never share a stream.
enum class Stream : std::uint64_t {
    train = 0x7472'6169'6e00'0001ULL,
    eval = 0x6576'616c'0000'0002ULL,
    init = 0x696e'6974'0000'0003ULL,
    shuffle = 0x7368'7566'0000'0004ULL,
    test = 0x7465'7374'0000'0005ULL,
};

std::uint64_t splitmix64(std::uint64_t x);

/// Independent per-item seed for (seed, namespace, index).
std::uint64_t derive_seed(std::uint64_t seed, Stream ns, std::uint64_t index);

/// mt19937_64 with distributions written out explicitly, so draws are
/// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    /// Uniform on (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    cplx complex_normal(double variance = 1.0);
    CMat complex_gaussian(Eigen::Index rows, Eigen::Index cols, double variance = 1.0);
    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace isaclab
