#include "rwg/modes.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace rwg {

void Geometry::validate() const {
    if (!(L1 > 0.0) || !(L2 > 0.0) || !std::isfinite(L1) || !std::isfinite(L2))
        throw std::invalid_argument("geometry: L1 and L2 must be positive");
    if (!(k > 0.0) || !std::isfinite(k))
        throw std::invalid_argument("geometry: k must be positive");
}

std::string Geometry::describe() const {
    std::ostringstream os;
    os.precision(17);
    os << "L1=" << L1 << ",L2=" << L2 << ",k=" << k;
    return os.str();
}

namespace {

struct Pair {
    double lambda;
    int j1, j2;
};

ModeRecord make_record(const Geometry& g, const Pair& p, Polarization s, ModeKind kind) {
    ModeRecord m;
    m.j1 = p.j1;
    m.j2 = p.j2;
    m.s = s;
    m.lambda = p.lambda;
    m.beta = std::sqrt(std::abs(g.k * g.k - p.lambda));
    m.kind = kind;
    m.multiplicity = (p.j1 * p.j2 == 0) ? 1 : 2;
    m.alpha = (m.multiplicity == 2) ? 2.0 / std::sqrt(p.lambda * g.L1 * g.L2)
                                    : std::sqrt(2.0 / (p.lambda * g.L1 * g.L2));
    m.kx = kPi * p.j1 / g.L1;
    m.ky = kPi * p.j2 / g.L2;
    return m;
}

// all (j1, j2) != (0, 0) with lambda <= cap
std::vector<Pair> pairs_below(const Geometry& g, double cap) {
    std::vector<Pair> out;
    int m1 = static_cast<int>(std::floor(std::sqrt(cap) * g.L1 / kPi)) + 1;
    int m2 = static_cast<int>(std::floor(std::sqrt(cap) * g.L2 / kPi)) + 1;
    for (int j1 = 0; j1 <= m1; ++j1) {
        for (int j2 = 0; j2 <= m2; ++j2) {
            if (j1 == 0 && j2 == 0) continue;
            double a = kPi * j1 / g.L1, b = kPi * j2 / g.L2;
            double lam = a * a + b * b;
            if (lam <= cap) out.push_back({lam, j1, j2});
        }
    }
    std::sort(out.begin(), out.end(), [](const Pair& x, const Pair& y) {
        return std::tie(x.lambda, x.j1, x.j2) < std::tie(y.lambda, y.j1, y.j2);
    });
    return out;
}

void append_block(const Geometry& g, const Pair& p, ModeKind kind, int block,
                  std::vector<ModeRecord>& list) {
    ModeRecord te = make_record(g, p, Polarization::TE, kind);
    te.block = block;
    list.push_back(te);
    if (te.multiplicity == 2) {
        ModeRecord tm = make_record(g, p, Polarization::TM, kind);
        tm.block = block;
        list.push_back(tm);
    }
}

}  // namespace

ModeBasis enumerate_modes(const Geometry& geometry, int n_evanescent) {
    geometry.validate();
    if (n_evanescent < 0) throw std::invalid_argument("enumerate_modes: n_evanescent must be >= 0");

    const double k2 = geometry.k * geometry.k;
    double cap = 2.0 * k2 + 1.0;
    std::vector<Pair> pairs;
    for (;;) {
        pairs = pairs_below(geometry, cap);
        int n_above = static_cast<int>(std::count_if(
            pairs.begin(), pairs.end(), [&](const Pair& p) { return p.lambda > k2; }));
        if (n_above >= n_evanescent + 1) break;
        cap *= 2.0;
    }

    ModeBasis basis;
    basis.geometry = geometry;
    for (const Pair& p : pairs) {
        if (std::abs(k2 - p.lambda) < 1e-9 * k2) {
            std::ostringstream msg;
            msg << "standing wave at cutoff: mode (" << p.j1 << "," << p.j2
                << ") has lambda = k^2 for " << geometry.describe();
            throw std::domain_error(msg.str());
        }
    }
    // only the listed modes matter: all propagating plus the first n_evanescent
    std::size_t listed = 0;
    for (int ne_seen = 0; listed < pairs.size(); ++listed) {
        if (pairs[listed].lambda > k2 && ne_seen++ == n_evanescent) break;
    }
    for (std::size_t i = 1; i < listed; ++i) {
        if (std::abs(pairs[i].lambda - pairs[i - 1].lambda) <= 1e-12 * pairs[i].lambda) {
            basis.has_ties = true;
            break;
        }
    }
    if (basis.has_ties)
        spdlog::warn("degenerate transverse eigenvalues for {} (rational L1/L2?); "
                     "ties broken by (j1, j2, s)", geometry.describe());

    int nb = 0, ne = 0;
    for (const Pair& p : pairs) {
        if (p.lambda < k2) {
            basis.block_start.push_back(static_cast<int>(basis.propagating.size()));
            append_block(geometry, p, ModeKind::propagating, nb++, basis.propagating);
        } else if (ne < n_evanescent) {
            basis.ev_block_start.push_back(static_cast<int>(basis.evanescent.size()));
            append_block(geometry, p, ModeKind::evanescent, ne++, basis.evanescent);
        }
    }
    basis.block_start.push_back(static_cast<int>(basis.propagating.size()));
    basis.ev_block_start.push_back(static_cast<int>(basis.evanescent.size()));
    basis.n_propagating = nb;
    basis.n_evanescent = ne;
    return basis;
}

std::array<double, 2> eval_mode(const ModeRecord& m, double x1, double x2) {
    double c1 = std::cos(m.kx * x1), s1 = std::sin(m.kx * x1);
    double c2 = std::cos(m.ky * x2), s2 = std::sin(m.ky * x2);
    return {m.amp1() * c1 * s2, m.amp2() * s1 * c2};
}

double mode_divergence(const ModeRecord& m, double x1, double x2) {
    // d1(A1 c1 s2) + d2(A2 s1 c2) = -(A1 kx + A2 ky) s1 s2
    return -(m.amp1() * m.kx + m.amp2() * m.ky) * std::sin(m.kx * x1) * std::sin(m.ky * x2);
}

double mode_curl(const ModeRecord& m, double x1, double x2) {
    return (m.amp2() * m.kx - m.amp1() * m.ky) * std::cos(m.kx * x1) * std::cos(m.ky * x2);
}

std::array<double, 2> mode_grad_divergence(const ModeRecord& m, double x1, double x2) {
    double d = -(m.amp1() * m.kx + m.amp2() * m.ky);
    return {d * m.kx * std::cos(m.kx * x1) * std::sin(m.ky * x2),
            d * m.ky * std::sin(m.kx * x1) * std::cos(m.ky * x2)};
}

QuadratureGrid make_quadrature_grid(const Geometry& g, int n1, int n2) {
    return {gauss_legendre(n1, 0.0, g.L1), gauss_legendre(n2, 0.0, g.L2)};
}

QuadratureGrid default_quadrature_grid(const ModeBasis& basis) {
    int m1 = 0, m2 = 0;
    for (const auto* list : {&basis.propagating, &basis.evanescent})
        for (const ModeRecord& m : *list) {
            m1 = std::max(m1, m.j1);
            m2 = std::max(m2, m.j2);
        }
    int n = 4 * std::max(m1, m2) + 8;
    return make_quadrature_grid(basis.geometry, n, n);
}

double mode_inner_product(const ModeRecord& a, const ModeRecord& b, const QuadratureGrid& quad) {
    // separable: phi_a . phi_b = A1 A1' (c c)(s s) + A2 A2' (s s)(c c)
    double cc1 = 0, ss1 = 0, cc2 = 0, ss2 = 0;
    for (int i = 0; i < quad.r1.size(); ++i) {
        double x = quad.r1.x[i], w = quad.r1.w[i];
        cc1 += w * std::cos(a.kx * x) * std::cos(b.kx * x);
        ss1 += w * std::sin(a.kx * x) * std::sin(b.kx * x);
    }
    for (int i = 0; i < quad.r2.size(); ++i) {
        double x = quad.r2.x[i], w = quad.r2.w[i];
        cc2 += w * std::cos(a.ky * x) * std::cos(b.ky * x);
        ss2 += w * std::sin(a.ky * x) * std::sin(b.ky * x);
    }
    return a.amp1() * b.amp1() * cc1 * ss2 + a.amp2() * b.amp2() * ss1 * cc2;
}

// --------------------------------------------------------------------------
// Sources
// --------------------------------------------------------------------------

ScalarField grid_sampler(const Geometry& g, int n1, int n2, std::vector<double> values) {
    if (n1 < 2 || n2 < 2 || static_cast<int>(values.size()) != n1 * n2)
        throw std::invalid_argument("grid_sampler: need n1, n2 >= 2 and n1*n2 values");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("grid_sampler: non-finite sample");
    double h1 = g.L1 / (n1 - 1), h2 = g.L2 / (n2 - 1);
    return [=, v = std::move(values)](double x1, double x2) {
        double u = std::clamp(x1 / h1, 0.0, static_cast<double>(n1 - 1));
        double w = std::clamp(x2 / h2, 0.0, static_cast<double>(n2 - 1));
        int i = std::min(static_cast<int>(u), n1 - 2);
        int j = std::min(static_cast<int>(w), n2 - 2);
        double fu = u - i, fw = w - j;
        auto at = [&](int a, int b) { return v[static_cast<std::size_t>(a) * n2 + b]; };
        return (1 - fu) * (1 - fw) * at(i, j) + fu * (1 - fw) * at(i + 1, j) +
               (1 - fu) * fw * at(i, j + 1) + fu * fw * at(i + 1, j + 1);
    };
}

SourceAmplitudes project_source(const ModeBasis& basis, const SourceSpec& src,
                                const QuadratureGrid& quad) {
    const Geometry& g = basis.geometry;
    const double k = g.k;
    const int n1 = quad.r1.size(), n2 = quad.r2.size();

    // sample once on the tensor grid
    std::vector<std::array<double, 2>> J(static_cast<std::size_t>(n1) * n2, {0.0, 0.0});
    std::vector<std::array<double, 2>> G(J.size(), {0.0, 0.0});
    const double h = 1e-6 * std::max(g.L1, g.L2);
    for (int a = 0; a < n1; ++a) {
        for (int b = 0; b < n2; ++b) {
            double x1 = quad.r1.x[a], x2 = quad.r2.x[b];
            auto& j = J[static_cast<std::size_t>(a) * n2 + b];
            auto& gz = G[static_cast<std::size_t>(a) * n2 + b];
            if (src.J) j = src.J(x1, x2);
            if (src.grad_Jz) {
                gz = src.grad_Jz(x1, x2);
            } else if (src.Jz) {
                gz = {(src.Jz(x1 + h, x2) - src.Jz(x1 - h, x2)) / (2 * h),
                      (src.Jz(x1, x2 + h) - src.Jz(x1, x2 - h)) / (2 * h)};
            }
            if (!std::isfinite(j[0]) || !std::isfinite(j[1]) || !std::isfinite(gz[0]) ||
                !std::isfinite(gz[1]))
                throw std::invalid_argument("project_source: non-finite field sample");
        }
    }

    auto project = [&](const ModeRecord& m, double& pJ, double& pG) {
        pJ = 0.0;
        pG = 0.0;
        for (int a = 0; a < n1; ++a) {
            for (int b = 0; b < n2; ++b) {
                double w = quad.r1.w[a] * quad.r2.w[b];
                auto phi = eval_mode(m, quad.r1.x[a], quad.r2.x[b]);
                const auto& j = J[static_cast<std::size_t>(a) * n2 + b];
                const auto& gz = G[static_cast<std::size_t>(a) * n2 + b];
                pJ += w * (phi[0] * j[0] + phi[1] * j[1]);
                pG += w * (phi[0] * gz[0] + phi[1] * gz[1]);
            }
        }
    };

    const cdouble I(0.0, 1.0);
    const double c = src.c_o;
    SourceAmplitudes out;
    for (const ModeRecord& m : basis.propagating) {
        double pJ, pG;
        project(m, pJ, pG);
        double r = std::sqrt(k / m.beta);
        double w1 = m.te() ? r : 1.0 / r;
        double w2 = m.te() ? 1.0 / r : r;
        out.A_o.push_back(-w1 * pJ / (2 * c) - I * w2 * pG / (2 * c * k));
        out.B_o.push_back(-w1 * pJ / (2 * c) + I * w2 * pG / (2 * c * k));
    }
    for (const ModeRecord& m : basis.evanescent) {
        double pJ, pG;
        project(m, pJ, pG);
        double r = std::sqrt(k / m.beta);
        double e1 = m.te() ? r : -1.0 / r;
        double w2 = m.te() ? 1.0 / r : r;
        out.E_o.push_back(I * e1 * pJ / (2 * c) - I * w2 * pG / (2 * c * k));
    }
    return out;
}

double ideal_flux(const SourceAmplitudes& amps) {
    double s = 0.0;
    for (const cdouble& a : amps.A_o) s += std::norm(a);
    return s;
}

}  // namespace rwg
