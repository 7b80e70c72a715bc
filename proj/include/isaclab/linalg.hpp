#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace isaclab {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kLn2 = 0.69314718055994530942;

/// Column-stacking vectorization.
CVec vec(const CMat& m);

CMat kron(const CMat& a, const CMat& b);

/// Eigenvalues of a Hermitian matrix, sorted descending.
RVec hermitian_eigvals_desc(const CMat& m);

/// log2 det of a Hermitian positive-definite matrix via Cholesky.
double log2det_hpd(const CMat& m);

/// Largest |m - m^H| entry.
double hermitian_asymmetry(const CMat& m);

/// Left-to-right sum; the same order is used by every feasibility check.
double l1_sum(const RVec& v);

bool is_descending(const RVec& v);

inline void require(bool ok, const std::string& what)
{
    if (!ok) {
        throw DimensionError(what);
    }
}

} // namespace isaclab
