// medium.hpp - separable covariance of the fluctuations and its z-transforms
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace rwg {

enum class CovarianceKind { gaussian_isotropic, custom_separable };

// R(x, x', z) = sigma2 * K1(x1 - x1') * K2(x2 - x2') * g(z).
// The implementation relies on this separable form (non-separable kernels
// are not supported). Custom kernels must be even with K1(0) = K2(0) = g(0) = 1.
struct CovarianceModel {
    CovarianceKind kind = CovarianceKind::gaussian_isotropic;
    double ell = 1.0;
    double sigma2 = 1.0;

    // custom_separable only
    std::function<double(double)> k1;
    std::function<double(double)> k2;
    std::function<double(double, int)> g_custom;  // g^{(d)}(z), d = 0, 1, 2
    double z_support = 0.0;                       // g negligible beyond this
    std::string tag;                              // identifies custom kernels in hashes

    static CovarianceModel gaussian(double ell, double sigma2 = 1.0);

    void validate() const;
    double kernel1(double d) const;
    double kernel2(double d) const;
    double transverse_kernel(double x1, double x2, double y1, double y2) const;
    double g(double z, int deriv = 0) const;
    double z_cut() const;  // g(z_cut) < 1e-16
    std::string hash() const;
};

enum class TrigKind { cos, sin };

// z-transforms of the longitudinal factor g (unit variance; sigma2 is carried
// by the coupling tensor).
class ZSpectrum {
public:
    explicit ZSpectrum(CovarianceModel model, double rel_tol = 1e-10);

    // full line: integral of g(z) exp(i beta z)
    double ghat(double beta) const;
    // integral of g^{(deriv)}(z) exp(i beta z) over the real line
    std::complex<double> z_fourier(double beta, int deriv) const;
    // integral over z > 0 of exp(-a z) trig(beta z) g^{(deriv)}(z)
    double z_half_transform(TrigKind kind, double beta, double a, int deriv) const;
    // D_c + i D_s, i.e. integral over z > 0 of exp(-a z + i beta z) g^{(deriv)}(z)
    std::complex<double> damped(double beta, double a, int deriv) const;
    // H_c + i H_s for derivative orders 0, 1, 2 at once
    void half_line_all(double beta, std::complex<double> out[3]) const;
    // H_c + i H_s for deriv = 0; closed form (Dawson function) for the Gaussian kind
    std::complex<double> half_line(double beta) const;
    // D_c + i D_s for every (a_i, beta_j) on one composite Gauss-Legendre rule
    Eigen::MatrixXcd damped_matrix(const std::vector<double>& a, const std::vector<double>& beta,
                                   int deriv) const;

    const CovarianceModel& model() const { return model_; }

private:
    CovarianceModel model_;
    double rel_tol_;
};

}  // namespace rwg
