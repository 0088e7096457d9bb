#include "rwg/medium.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <gsl/gsl_sf_dawson.h>

#include "rwg/quadrature.hpp"

namespace rwg {

CovarianceModel CovarianceModel::gaussian(double ell, double sigma2) {
    CovarianceModel m;
    m.kind = CovarianceKind::gaussian_isotropic;
    m.ell = ell;
    m.sigma2 = sigma2;
    m.validate();
    return m;
}

void CovarianceModel::validate() const {
    if (!(ell > 0.0) || !std::isfinite(ell))
        throw std::invalid_argument("covariance: ell must be positive");
    if (!(sigma2 >= 0.0) || !std::isfinite(sigma2))
        throw std::invalid_argument("covariance: sigma2 must be non-negative");
    if (kind == CovarianceKind::custom_separable) {
        if (!k1 || !k2 || !g_custom)
            throw std::invalid_argument("covariance: custom kernel needs k1, k2 and g");
        if (!(z_support > 0.0))
            throw std::invalid_argument("covariance: custom kernel needs z_support > 0");
        if (std::abs(k1(0.0) - 1.0) > 1e-12 || std::abs(k2(0.0) - 1.0) > 1e-12 ||
            std::abs(g_custom(0.0, 0) - 1.0) > 1e-12)
            throw std::invalid_argument("covariance: custom kernels must equal 1 at 0");
    }
}

double CovarianceModel::kernel1(double d) const {
    if (kind == CovarianceKind::custom_separable) return k1(d);
    return std::exp(-d * d / (2 * ell * ell));
}

double CovarianceModel::kernel2(double d) const {
    if (kind == CovarianceKind::custom_separable) return k2(d);
    return std::exp(-d * d / (2 * ell * ell));
}

double CovarianceModel::transverse_kernel(double x1, double x2, double y1, double y2) const {
    return kernel1(x1 - y1) * kernel2(x2 - y2);
}

double CovarianceModel::g(double z, int deriv) const {
    if (kind == CovarianceKind::custom_separable) return g_custom(z, deriv);
    double l2 = ell * ell;
    double e = std::exp(-z * z / (2 * l2));
    switch (deriv) {
        case 0: return e;
        case 1: return -z / l2 * e;
        case 2: return (z * z / (l2 * l2) - 1.0 / l2) * e;
        default: throw std::invalid_argument("covariance: derivative order must be 0, 1 or 2");
    }
}

double CovarianceModel::z_cut() const {
    if (kind == CovarianceKind::custom_separable) return z_support;
    return 10.0 * ell;  // exp(-50) ~ 2e-22, also for g' and g''
}

std::string CovarianceModel::hash() const {
    std::ostringstream os;
    os.precision(17);
    if (kind == CovarianceKind::gaussian_isotropic)
        os << "gaussian-isotropic:ell=" << ell << ":sigma2=" << sigma2;
    else
        os << "custom-separable:" << tag << ":ell=" << ell << ":sigma2=" << sigma2
           << ":support=" << z_support;
    return os.str();
}

// --------------------------------------------------------------------------
// ZSpectrum
// --------------------------------------------------------------------------

ZSpectrum::ZSpectrum(CovarianceModel model, double rel_tol)
    : model_(std::move(model)), rel_tol_(rel_tol) {
    model_.validate();
}

double ZSpectrum::ghat(double beta) const {
    if (model_.kind == CovarianceKind::gaussian_isotropic) {
        double l = model_.ell;
        return std::sqrt(2 * 3.14159265358979323846) * l * std::exp(-beta * beta * l * l / 2);
    }
    return 2.0 * z_half_transform(TrigKind::cos, beta, 0.0, 0);
}

std::complex<double> ZSpectrum::z_fourier(double beta, int deriv) const {
    // integration by parts: FT of g^{(d)} is (-i beta)^d ghat
    std::complex<double> f(1.0, 0.0);
    for (int d = 0; d < deriv; ++d) f *= std::complex<double>(0.0, -beta);
    return f * ghat(beta);
}

double ZSpectrum::z_half_transform(TrigKind kind, double beta, double a, int deriv) const {
    if (a < 0.0) throw std::invalid_argument("z_half_transform: decay must be >= 0");
    if (deriv < 0 || deriv > 2)
        throw std::invalid_argument("z_half_transform: derivative order must be 0, 1 or 2");
    const CovarianceModel& m = model_;
    auto f = [&](double z) {
        double t = kind == TrigKind::cos ? std::cos(beta * z) : std::sin(beta * z);
        return std::exp(-a * z) * t * m.g(z, deriv);
    };
    double scale = std::pow(m.ell, 1 - deriv);
    double zc = m.z_cut();
    // resolve the exp(-a z) boundary layer before the smooth remainder
    double split = (a * zc > 8.0) ? 8.0 / a : 0.0;
    double v = 0.0;
    if (split > 0.0) {
        v += integrate_adaptive(f, 0.0, split, rel_tol_, 5e-14 * scale).value;
        v += integrate_adaptive(f, split, zc, rel_tol_, 5e-14 * scale).value;
    } else {
        v = integrate_adaptive(f, 0.0, zc, rel_tol_, 5e-14 * scale).value;
    }
    return v;
}

std::complex<double> ZSpectrum::damped(double beta, double a, int deriv) const {
    return {z_half_transform(TrigKind::cos, beta, a, deriv),
            z_half_transform(TrigKind::sin, beta, a, deriv)};
}

void ZSpectrum::half_line_all(double beta, std::complex<double> out[3]) const {
    for (int d = 0; d < 3; ++d) out[d] = damped(beta, 0.0, d);
}

std::complex<double> ZSpectrum::half_line(double beta) const {
    if (model_.kind == CovarianceKind::gaussian_isotropic) {
        double l = model_.ell;
        double hs = std::sqrt(2.0) * l * gsl_sf_dawson(beta * l / std::sqrt(2.0));
        return {0.5 * ghat(beta), hs};
    }
    return damped(beta, 0.0, 0);
}

Eigen::MatrixXcd ZSpectrum::damped_matrix(const std::vector<double>& a,
                                          const std::vector<double>& beta, int deriv) const {
    if (deriv < 0 || deriv > 2)
        throw std::invalid_argument("damped_matrix: derivative order must be 0, 1 or 2");
    double amax = 0.0;
    for (double v : a) {
        if (v < 0.0) throw std::invalid_argument("damped_matrix: decay must be >= 0");
        amax = std::max(amax, v);
    }
    const double zc = model_.z_cut();
    const double wmax = model_.ell / 4;
    // panels grow geometrically from the exp(-a z) boundary layer of the largest decay
    std::vector<double> edges{0.0};
    double w = amax > 0.0 ? std::min(0.25 / amax, wmax) : wmax;
    while (edges.back() < zc) {
        edges.push_back(std::min(edges.back() + w, zc));
        w = std::min(2 * w, wmax);
    }
    GaussRule unit = gauss_legendre(16, 0.0, 1.0);
    std::vector<double> z, wz;
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
        double h = edges[p + 1] - edges[p];
        for (int i = 0; i < unit.size(); ++i) {
            z.push_back(edges[p] + h * unit.x[i]);
            wz.push_back(h * unit.w[i] * model_.g(z.back(), deriv));
        }
    }
    const Eigen::Index nz = static_cast<Eigen::Index>(z.size());
    Eigen::MatrixXd W(a.size(), nz), Cb(nz, beta.size()), Sb(nz, beta.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (Eigen::Index n = 0; n < nz; ++n) W(i, n) = wz[n] * std::exp(-a[i] * z[n]);
    for (Eigen::Index n = 0; n < nz; ++n)
        for (std::size_t j = 0; j < beta.size(); ++j) {
            Cb(n, j) = std::cos(beta[j] * z[n]);
            Sb(n, j) = std::sin(beta[j] * z[n]);
        }
    Eigen::MatrixXcd out(a.size(), beta.size());
    out.real() = W * Cb;
    out.imag() = W * Sb;
    return out;
}

}  // namespace rwg
