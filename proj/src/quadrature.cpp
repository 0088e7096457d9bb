#include "rwg/quadrature.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace rwg {

namespace {

struct GslInit {
    GslInit() { gsl_set_error_handler_off(); }
};
const GslInit gsl_init;

double trampoline(double x, void* p) {
    return (*static_cast<const std::function<double(double)>*>(p))(x);
}

}  // namespace

GaussRule gauss_legendre(int n, double a, double b) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    std::unique_ptr<gsl_integration_glfixed_table,
                    decltype(&gsl_integration_glfixed_table_free)>
        table(gsl_integration_glfixed_table_alloc(static_cast<size_t>(n)),
              &gsl_integration_glfixed_table_free);
    if (!table) throw std::runtime_error("gauss_legendre: table allocation failed");

    // GSL tabulates a few orders exactly; the others come from a double
    // precision Newton solve good to ~1e-11, so polish every node in long double.
    auto legendre = [n](long double x, long double& dp) {
        long double p0 = 1.0L, p1 = x;
        for (int k = 2; k <= n; ++k) {
            const long double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0L);
        return p1;
    };
    GaussRule rule;
    rule.x.resize(n);
    rule.w.resize(n);
    const long double mid = 0.5L * (static_cast<long double>(a) + b);
    const long double half = 0.5L * (static_cast<long double>(b) - a);
    for (int i = 0; i < n; ++i) {
        double xi = 0.0, wi = 0.0;
        gsl_integration_glfixed_point(-1.0, 1.0, static_cast<size_t>(i), &xi, &wi, table.get());
        long double x = xi, dp = 0.0L;
        if (n > 1) {
            for (int it = 0; it < 3; ++it) x -= legendre(x, dp) / dp;
            legendre(x, dp);
            rule.w[i] = static_cast<double>(half * 2.0L / ((1.0L - x * x) * dp * dp));
        } else {
            rule.w[i] = static_cast<double>(2.0L * half);
        }
        rule.x[i] = static_cast<double>(mid + half * x);
    }
    return rule;
}

QuadResult integrate_adaptive(const std::function<double(double)>& f, double a,
                              double b, double rel_tol, double abs_tol) {
    constexpr size_t limit = 2000;
    std::unique_ptr<gsl_integration_workspace, decltype(&gsl_integration_workspace_free)>
        ws(gsl_integration_workspace_alloc(limit), &gsl_integration_workspace_free);

    gsl_function F;
    F.function = &trampoline;
    F.params = const_cast<std::function<double(double)>*>(&f);

    QuadResult r;
    int status = gsl_integration_qag(&F, a, b, abs_tol, rel_tol, limit,
                                     GSL_INTEG_GAUSS61, ws.get(), &r.value, &r.abserr);
    if (status != GSL_SUCCESS) {
        // roundoff-limited results are accepted when already at machine level
        double scale = std::max(std::abs(r.value), abs_tol);
        if (r.abserr <= 1e-13 * scale + abs_tol) return r;
        std::ostringstream msg;
        msg << "non-convergent quadrature on [" << a << ", " << b << "]: achieved abs error "
            << r.abserr << " (value " << r.value << ", requested rel " << rel_tol << ")";
        throw std::runtime_error(msg.str());
    }
    return r;
}

double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

}  // namespace rwg
