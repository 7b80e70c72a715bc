#include "isaclab/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace isaclab {

namespace {

double log2_1p(double x)
{
    return std::log1p(x) / kLn2;
}

void check_spectrum_dims(const RVec& sigma_s, const Scene& scene)
{
    require(sigma_s.size() == scene.n_tx(), "sigma_s length must equal n_tx");
}

/// R_k = sum_{i != k} p_i h_i^* h_i^T + level I.
CMat interference_covariance(const Scene& scene, int k, double level)
{
    const int n_rx = scene.n_rx();
    CMat r = level * CMat::Identity(n_rx, n_rx);
    for (int i = 0; i < scene.n_cu(); ++i) {
        if (i == k) {
            continue;
        }
        const CVec hc = scene.channel.col(i).conjugate();
        r.noalias() += scene.cu_power[i] * hc * hc.adjoint();
    }
    return r;
}

} // namespace

PowerSpectrum PowerSpectrum::checked(RVec values, double budget)
{
    PowerSpectrum ps{std::move(values), budget};
    if (!ps.feasible()) {
        throw std::invalid_argument("power spectrum violates nonnegativity, ordering or budget");
    }
    return ps;
}

bool PowerSpectrum::feasible(double rel_tol) const
{
    if (budget <= 0.0 || !values.allFinite() || (values.array() < 0.0).any()) {
        return false;
    }
    return is_descending(values) && l1_sum(values) <= budget + rel_tol * budget;
}

double kron_vec_identity(const CMat& a, const CMat& b, const CMat& c)
{
    require(a.cols() == b.rows() && b.cols() == c.rows(), "kron_vec_identity: non-conformable matrices");
    const CVec lhs = vec(a * b * c);
    const CVec rhs = kron(c.transpose(), a) * vec(b);
    return (lhs - rhs).norm();
}

double kron_det_identity(const CMat& a, const CMat& b, const CMat& c, const CMat& d)
{
    require(a.rows() == a.cols() && b.rows() == b.cols() && a.rows() == b.rows(),
            "kron_det_identity: A and B must be square of equal size");
    require(c.rows() == c.cols() && d.rows() == d.cols() && c.rows() == d.rows(),
            "kron_det_identity: C and D must be square of equal size");
    const Eigen::Index mn = a.rows() * c.rows();
    const CMat id = CMat::Identity(mn, mn);
    const cplx lhs = (id + kron(a * b, c * d)).determinant();
    const cplx rhs = (id + kron(b * a, d * c)).determinant();
    return std::abs(lhs - rhs);
}

double sensing_mi_full(const Waveform& s, const Scene& scene)
{
    require(s.matrix.rows() == scene.wave_len && s.matrix.cols() == scene.n_tx(),
            "sensing_mi_full: waveform must be L x n_tx");
    if (!s.matrix.allFinite()) {
        throw std::invalid_argument("sensing_mi_full: non-finite waveform");
    }
    const CMat& u = scene.tcm_eigvecs;
    const CMat r_t = u * scene.tcm_eigvals.cast<cplx>().asDiagonal() * u.adjoint();
    CMat q = s.matrix * r_t * s.matrix.adjoint();
    q = 0.5 * (q + q.adjoint()).eval();
    const Eigen::Index l = q.rows();
    double mi = 0.0;
    // R_H = U_h diag(sigma_h) U_h^H, so I + R_H kron Q is unitarily similar to
    // the block-diagonal blkdiag_j(I + sigma_h,j Q).
    for (Eigen::Index j = 0; j < scene.interf_eigvals.size(); ++j) {
        mi += log2det_hpd(CMat::Identity(l, l) + scene.interf_eigvals[j] * q);
    }
    return mi;
}

double reduced_sense_rate(const RVec& sigma_s, const Scene& scene)
{
    check_spectrum_dims(sigma_s, scene);
    double acc = 0.0;
    for (int i = 0; i < scene.n_tx(); ++i) {
        const double g = scene.tcm_eigvals[i] * sigma_s[i];
        for (Eigen::Index j = 0; j < scene.interf_eigvals.size(); ++j) {
            acc += log2_1p(g * scene.interf_eigvals[j]);
        }
    }
    return acc / scene.wave_len;
}

double sensing_interference(const RVec& sigma_s, const Scene& scene)
{
    check_spectrum_dims(sigma_s, scene);
    return scene.tcm_eigvals.dot(sigma_s) / scene.wave_len;
}

double sinr_direct(const CVec& w, int k, const RVec& sigma_s, const Scene& scene)
{
    require(k >= 0 && k < scene.n_cu(), "sinr_direct: user index out of range");
    require(w.size() == scene.n_rx(), "sinr_direct: beam length must equal n_rx");
    const double wn = w.squaredNorm();
    if (wn == 0.0) {
        throw std::invalid_argument("sinr_direct: zero beamformer");
    }
    const double t = sensing_interference(sigma_s, scene);
    // h^T w is the plain (unconjugated) product.
    const double signal = scene.cu_power[k] * std::norm(scene.channel.col(k).cwiseProduct(w).sum());
    double interference = (t + scene.noise_power) * wn;
    for (int i = 0; i < scene.n_cu(); ++i) {
        if (i != k) {
            interference += scene.cu_power[i] * std::norm(scene.channel.col(i).cwiseProduct(w).sum());
        }
    }
    return signal / interference;
}

RVec optimal_sinrs(const RVec& sigma_s, const Scene& scene)
{
    const double level = sensing_interference(sigma_s, scene) + scene.noise_power;
    RVec gamma(scene.n_cu());
    for (int k = 0; k < scene.n_cu(); ++k) {
        Eigen::LLT<CMat> llt(interference_covariance(scene, k, level));
        if (llt.info() != Eigen::Success) {
            throw NumericalError("interference covariance is not positive definite");
        }
        const CVec hc = scene.channel.col(k).conjugate();
        const CVec x = llt.solve(hc);
        gamma[k] = scene.cu_power[k] * hc.dot(x).real();
    }
    return gamma;
}

double reduced_comm_rate(const RVec& sigma_s, const Scene& scene)
{
    const RVec gamma = optimal_sinrs(sigma_s, scene);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
        acc += log2_1p(gamma[k]);
    }
    return acc / scene.n_cu();
}

double comm_rate_for_beams(const std::vector<CVec>& beams, const RVec& sigma_s, const Scene& scene)
{
    require(static_cast<int>(beams.size()) == scene.n_cu(), "comm_rate_for_beams: one beam per user");
    double acc = 0.0;
    for (int k = 0; k < scene.n_cu(); ++k) {
        acc += log2_1p(sinr_direct(beams[k], k, sigma_s, scene));
    }
    return acc / scene.n_cu();
}

RatePair compose_rates(double sense_rate, double comm_rate, const Scene& scene, double alpha)
{
    if (!(scene.norm_sense > 0.0) || !(scene.norm_comm > 0.0)) {
        throw std::invalid_argument("wsnr: normalizers must be positive");
    }
    return {sense_rate, comm_rate,
            alpha * sense_rate / scene.norm_sense + (1.0 - alpha) * comm_rate / scene.norm_comm};
}

RatePair wsnr(const RVec& sigma_s, const Scene& scene, double alpha)
{
    return compose_rates(reduced_sense_rate(sigma_s, scene), reduced_comm_rate(sigma_s, scene), scene, alpha);
}

RVec wsnr_gradient(const RVec& sigma_s, const Scene& scene, double alpha)
{
    check_spectrum_dims(sigma_s, scene);
    const int n_tx = scene.n_tx();
    const double l = scene.wave_len;

    RVec d_sense(n_tx);
    for (int i = 0; i < n_tx; ++i) {
        const double st = scene.tcm_eigvals[i];
        double acc = 0.0;
        for (Eigen::Index j = 0; j < scene.interf_eigvals.size(); ++j) {
            const double sh = scene.interf_eigvals[j];
            acc += st * sh / (1.0 + st * sigma_s[i] * sh);
        }
        d_sense[i] = acc / (l * kLn2);
    }

    // d gamma_k / dt = -p_k h_k^T R_k^-2 h_k^* = -p_k ||R_k^-1 h_k^*||^2
    const double level = sensing_interference(sigma_s, scene) + scene.noise_power;
    double d_comm_dt = 0.0;
    for (int k = 0; k < scene.n_cu(); ++k) {
        Eigen::LLT<CMat> llt(interference_covariance(scene, k, level));
        const CVec hc = scene.channel.col(k).conjugate();
        const CVec x = llt.solve(hc);
        const double gamma = scene.cu_power[k] * hc.dot(x).real();
        const double dgamma = -scene.cu_power[k] * x.squaredNorm();
        d_comm_dt += dgamma / (1.0 + gamma);
    }
    d_comm_dt /= scene.n_cu() * kLn2;

    const double ws = alpha / scene.norm_sense;
    const double wc = (1.0 - alpha) / scene.norm_comm;
    RVec grad(n_tx);
    for (int i = 0; i < n_tx; ++i) {
        grad[i] = ws * d_sense[i] + wc * d_comm_dt * scene.tcm_eigvals[i] / l;
    }
    return grad;
}

SceneObjective::SceneObjective(const Scene& scene) : scene_(&scene)
{
    const int n_cu = scene.n_cu();
    inter_eig_.resize(n_cu);
    weight_.resize(n_cu);
    for (int k = 0; k < n_cu; ++k) {
        const CMat a = interference_covariance(scene, k, 0.0);
        Eigen::SelfAdjointEigenSolver<CMat> es(a);
        if (es.info() != Eigen::Success) {
            throw NumericalError("SceneObjective: eigensolver failed");
        }
        // A_k is PSD; clip rounding noise below zero.
        inter_eig_[k] = es.eigenvalues().cwiseMax(0.0);
        const CVec proj = es.eigenvectors().adjoint() * scene.channel.col(k).conjugate();
        weight_[k] = scene.cu_power[k] * proj.cwiseAbs2();
    }
}

double SceneObjective::sense_rate(const RVec& sigma_s) const
{
    return reduced_sense_rate(sigma_s, *scene_);
}

double SceneObjective::comm_rate(const RVec& sigma_s) const
{
    const double level = sensing_interference(sigma_s, *scene_) + scene_->noise_power;
    double acc = 0.0;
    for (std::size_t k = 0; k < weight_.size(); ++k) {
        const double gamma = (weight_[k].array() / (inter_eig_[k].array() + level)).sum();
        acc += log2_1p(gamma);
    }
    return acc / static_cast<double>(weight_.size());
}

RatePair SceneObjective::evaluate(const RVec& sigma_s, double alpha) const
{
    return compose_rates(sense_rate(sigma_s), comm_rate(sigma_s), *scene_, alpha);
}

double SceneObjective::value_and_gradient(const RVec& sigma_s, double alpha, RVec& grad) const
{
    const Scene& sc = *scene_;
    check_spectrum_dims(sigma_s, sc);
    const int n_tx = sc.n_tx();
    const double l = sc.wave_len;
    const double ws = alpha / sc.norm_sense;
    const double wc = (1.0 - alpha) / sc.norm_comm;

    double sense = 0.0;
    grad.resize(n_tx);
    for (int i = 0; i < n_tx; ++i) {
        const double st = sc.tcm_eigvals[i];
        double dacc = 0.0;
        for (Eigen::Index j = 0; j < sc.interf_eigvals.size(); ++j) {
            const double sh = sc.interf_eigvals[j];
            const double x = st * sigma_s[i] * sh;
            sense += std::log1p(x);
            dacc += st * sh / (1.0 + x);
        }
        grad[i] = ws * dacc / (l * kLn2);
    }
    sense /= l * kLn2;

    const double level = sc.tcm_eigvals.dot(sigma_s) / l + sc.noise_power;
    double comm = 0.0;
    double d_comm_dt = 0.0;
    for (std::size_t k = 0; k < weight_.size(); ++k) {
        const auto denom = (inter_eig_[k].array() + level).eval();
        const double gamma = (weight_[k].array() / denom).sum();
        const double dgamma = -(weight_[k].array() / denom.square()).sum();
        comm += std::log1p(gamma);
        d_comm_dt += dgamma / (1.0 + gamma);
    }
    const double n_cu = static_cast<double>(weight_.size());
    comm /= n_cu * kLn2;
    d_comm_dt /= n_cu * kLn2;
    for (int i = 0; i < n_tx; ++i) {
        grad[i] += wc * d_comm_dt * sc.tcm_eigvals[i] / l;
    }
    return ws * sense + wc * comm;
}

} // namespace isaclab
