// quadrature.hpp - Gauss-Legendre rules and adaptive 1D integration (GSL backed)
#pragma once

#include <functional>
#include <vector>

namespace rwg {

struct GaussRule {
    std::vector<double> x;
    std::vector<double> w;
    int size() const { return static_cast<int>(x.size()); }
};

// n-point Gauss-Legendre rule mapped to [a, b].
GaussRule gauss_legendre(int n, double a, double b);

struct QuadResult {
    double value = 0.0;
    double abserr = 0.0;
};

// Adaptive Gauss-Kronrod on [a, b]. Throws std::runtime_error when the
// requested tolerance cannot be met; the message carries the achieved error.
QuadResult integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double rel_tol, double abs_tol = 0.0);

// Pairwise summation; order independent of how the caller chunked the work.
double pairwise_sum(const double* v, std::size_t n);

}  // namespace rwg
