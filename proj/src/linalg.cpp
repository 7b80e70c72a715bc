#include "isaclab/linalg.hpp"

#include <cmath>

namespace isaclab {

CVec vec(const CMat& m)
{
    return m.reshaped();
}

CMat kron(const CMat& a, const CMat& b)
{
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

RVec hermitian_eigvals_desc(const CMat& m)
{
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) {
        throw NumericalError("hermitian eigensolver did not converge");
    }
    return es.eigenvalues().reverse();
}

double log2det_hpd(const CMat& m)
{
    Eigen::LLT<CMat> llt(m);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("matrix is not positive definite");
    }
    double acc = 0.0;
    const CMat& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        acc += std::log(l(i, i).real());
    }
    return 2.0 * acc / kLn2;
}

double hermitian_asymmetry(const CMat& m)
{
    if (m.size() == 0) {
        return 0.0;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double l1_sum(const RVec& v)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        s += v[i];
    }
    return s;
}

bool is_descending(const RVec& v)
{
    for (Eigen::Index i = 1; i < v.size(); ++i) {
        if (v[i] > v[i - 1]) {
            return false;
        }
    }
    return true;
}

} // namespace isaclab
