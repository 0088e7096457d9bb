#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <random>

#include "rwg/moments.hpp"
#include "rwg/pipeline.hpp"

using namespace rwg;

namespace {

struct Fixture {
    ModeBasis basis;
    CouplingTensor tensor;
    ModeMoments m;
};

Fixture make(Geometry g, double sigma2 = 1.0, MomentOptions opt = {}) {
    Fixture f;
    f.basis = enumerate_modes(g, 1024);
    const CovarianceModel model = CovarianceModel::gaussian(1.0, sigma2);
    f.tensor = assemble_coupling_tensor(f.basis, model, {}, opt.evanescent,
                                        tensor_ev_count(opt, f.basis.n_evanescent));
    f.m = compute_moments(f.basis, f.tensor, model, opt);
    return f;
}

const Fixture& geom1() {
    static const Fixture f = make(Geometry{3.03, 5.84, 2 * kPi});
    return f;
}

const Fixture& geom2() {
    static const Fixture f = make(Geometry{4.08, 5.77, 2 * kPi});
    return f;
}

CMatrix random_psd(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    CMatrix A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = {g(rng), g(rng)};
    return A * A.adjoint();
}

}  // namespace

TEST_CASE("zero fluctuations give zero moments and frozen amplitudes") {
    const Fixture f = make(Geometry{1.3, 2.1, 2 * kPi}, 0.0);
    std::vector<CMatrix> Q;
    for (const BlockMoments& b : f.m.blocks) {
        CHECK(b.Q.norm() == 0.0);
        CHECK(b.C.norm() == 0.0);
        CHECK(b.U.norm() == 0.0);
        CHECK(b.kappa.norm() == 0.0);
        Q.push_back(b.Q);
    }
    std::vector<cdouble> A0(f.basis.n_modes());
    for (int i = 0; i < f.basis.n_modes(); ++i) A0[i] = {1.0 + i, -0.5 * i};
    const AmplitudeTrajectory tr = mean_amplitude_evolution(f.basis, Q, A0, {0.0, 0.7, 5.0});
    for (const CVector& A : tr.A)
        for (int i = 0; i < f.basis.n_modes(); ++i) CHECK(A(i) == A0[i]);
}

TEST_CASE("C is Hermitian positive definite, raw asymmetry small") {
    for (const Fixture* f : {&geom1(), &geom2()})
        for (const BlockMoments& b : f->m.blocks) {
            CHECK(b.c_asymmetry <= 1e-9);
            CHECK((b.C - b.C.adjoint()).norm() == 0.0);
            const double lo = Eigen::SelfAdjointEigenSolver<CMatrix>(b.C).eigenvalues().minCoeff();
            CHECK(lo > 0.0);
        }
}

TEST_CASE("Q and C from independent routes satisfy Q + Q* + C = 0") {
    for (const Fixture* f : {&geom1(), &geom2()}) {
        const std::vector<double> r = mid_residuals(f->m);
        for (std::size_t j = 0; j < r.size(); ++j) {
            CHECK(r[j] <= 1e-6);
            const BlockMoments& b = f->m.blocks[j];
            const double tq = 2 * b.Q.trace().real(), tc = b.C.trace().real();
            CHECK(std::abs(tq + tc) <= 1e-6 * std::abs(tc));
            // entrywise version of the same identity
            const CMatrix H = -(b.Q + b.Q.adjoint());
            CHECK((H - b.C).cwiseAbs().maxCoeff() <= 1e-6 * b.C.cwiseAbs().maxCoeff());
        }
    }
}

TEST_CASE("explicit U formulas against the term-by-term half-line route") {
    const Fixture& f = geom1();
    const ZSpectrum zs(CovarianceModel::gaussian(1.0));
    const std::vector<CMatrix> G = forward_generator_generic(f.basis, f.tensor, zs);
    for (int j = 0; j < f.basis.n_propagating; ++j) {
        const CMatrix W = weight_matrix(f.basis, j);
        const CMatrix Qf = W * f.m.blocks[j].U * W.inverse();
        CHECK((Qf - G[j]).norm() <= 1e-9 * (G[j].norm() + 1e-300));
    }
}

TEST_CASE("Re U has nonpositive diagonal") {
    for (const Fixture* f : {&geom1(), &geom2()})
        for (const BlockMoments& b : f->m.blocks)
            for (int s = 0; s < b.size; ++s) CHECK(b.U(s, s).real() <= 0.0);
}

TEST_CASE("kappa is real and reported; its symmetry is measured, not assumed") {
    double worst = 0.0;
    for (const BlockMoments& b : geom1().m.blocks)
        if (b.kappa.norm() > 0) worst = std::max(worst, (b.kappa - b.kappa.transpose()).norm() / b.kappa.norm());
    MESSAGE("max ||kappa - kappa^T|| / ||kappa|| on geometry 1: " << worst);
    CHECK(std::isfinite(worst));
    CHECK(geom1().m.n_ev_used > 0);
}

TEST_CASE("assemble_Q: kappa = 0 and diagonal U give Q = U") {
    const Fixture& f = geom1();
    std::vector<CMatrix> U;
    std::vector<RMatrix> K;
    for (int j = 0; j < f.basis.n_propagating; ++j) {
        const int n = f.basis.block_size(j);
        CMatrix D = CMatrix::Zero(n, n);
        for (int s = 0; s < n; ++s) D(s, s) = {-1.0 - j - s, 0.3 * s};
        U.push_back(D);
        K.push_back(RMatrix::Zero(n, n));
    }
    const std::vector<CMatrix> Q = assemble_Q(U, K, f.basis);
    for (std::size_t j = 0; j < Q.size(); ++j) CHECK((Q[j] - U[j]).norm() <= 1e-15 * U[j].norm());
    K.pop_back();
    CHECK_THROWS_AS(assemble_Q(U, K, f.basis), std::invalid_argument);
}

TEST_CASE("single propagating mode: C is the self-coupling spectral density at zero") {
    const Geometry g{0.6, 0.4, 2 * kPi};
    const ModeBasis b = enumerate_modes(g, 64);
    REQUIRE(b.n_propagating == 1);
    REQUIRE(b.n_modes() == 1);
    const CovarianceModel model = CovarianceModel::gaussian(1.0, 0.5);
    const CouplingTensor t = assemble_coupling_tensor(b, model, {}, false, 0);
    const ZSpectrum zs(model);
    const std::vector<CMatrix> C = compute_C(b, t, zs);
    const ModeRecord& m = b.propagating[0];
    const Coefficient c = coupling_coefficient(CoeffKind::AA, m, m, g.k);
    // only the underived terms survive at zero frequency
    double expect = 0.0;
    for (int a = 0; a < c.n; ++a)
        for (int d = 0; d < c.n; ++d) {
            if (c.t[a].d != 0 || c.t[d].d != 0) continue;
            const PairField fa(m, m, c.t[a].kind), fd(m, m, c.t[d].kind);
            expect += (c.t[a].c * std::conj(c.t[d].c)).real() * t.B(fa, fd);
        }
    expect *= zs.ghat(0);
    REQUIRE(C[0].rows() == 1);
    CHECK(std::abs(C[0](0, 0).imag()) <= 1e-15 * expect);
    CHECK(C[0](0, 0).real() == doctest::Approx(expect).epsilon(1e-12));
    const MeanFreePaths p = scattering_mean_free_paths(C);
    CHECK(p.S[0] == doctest::Approx(1.0 / expect).epsilon(1e-12));
}

TEST_CASE("mean free paths: scalar case and rejection of indefinite C") {
    const MeanFreePaths p = scattering_mean_free_paths({CMatrix::Constant(1, 1, 2.5)});
    CHECK(p.S[0] == 0.4);
    CMatrix bad(2, 2);
    bad << 1.0, 0.0, 0.0, -1e-3;
    CHECK_THROWS_AS(scattering_mean_free_paths({bad}), std::runtime_error);
    const MeanFreePaths q = scattering_mean_free_paths({CMatrix::Zero(1, 1) + CMatrix::Constant(1, 1, 4.0), bad.cwiseAbs().cast<cdouble>()});
    CHECK(q.mu[1](0) == doctest::Approx(1e-3));
    CHECK(q.S[1] == doctest::Approx(1e3));
}

TEST_CASE("3.03 x 5.84 guide: mean free paths decrease with j") {
    std::vector<CMatrix> C;
    for (const BlockMoments& b : geom1().m.blocks) C.push_back(b.C);
    const MeanFreePaths p = scattering_mean_free_paths(C);
    REQUIRE(p.S.size() == 64);
    CHECK(p.S.back() < 0.2 * p.S.front());
    for (std::size_t j = 0; j < C.size(); ++j) CHECK(p.mu[j](0) > 0.0);
}

TEST_CASE("block exponential against a general matrix exponential") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int t = 0; t < 50; ++t) {
        const int n = 1 + t % 2;
        CMatrix Q(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) Q(i, j) = {g(rng), g(rng)};
        if (t % 7 == 0 && n == 2) Q << cdouble(-1, 0.5), 0.0, 0.0, cdouble(-1, 0.5);  // degenerate
        for (double Z : {0.0, 1e-8, 0.3, 2.0}) {
            const CMatrix ref = (Q * Z).exp();
            CHECK((block_exponential(Q, Z) - ref).norm() <= 1e-12 * ref.norm());
        }
    }
    CHECK_THROWS_AS(block_exponential(CMatrix::Zero(3, 3), 1.0), std::invalid_argument);
}

TEST_CASE("mean amplitudes obey the loss of coherence bounds") {
    for (const Fixture* f : {&geom1(), &geom2()}) {
        std::vector<CMatrix> Q, C;
        for (const BlockMoments& b : f->m.blocks) {
            Q.push_back(b.Q);
            C.push_back(b.C);
        }
        const MeanFreePaths p = scattering_mean_free_paths(C);
        const double zmax = 3 * *std::max_element(p.S.begin(), p.S.end());
        std::vector<double> Z = linear_grid(zmax, 100);
        std::mt19937_64 rng(17);
        std::normal_distribution<double> g;
        std::vector<cdouble> A0(f->basis.n_modes());
        for (auto& a : A0) a = {g(rng), g(rng)};
        const AmplitudeTrajectory tr = mean_amplitude_evolution(f->basis, Q, A0, Z);
        CHECK(tr.A.front() == Eigen::Map<const CVector>(A0.data(), A0.size()));
        for (int j = 0; j < f->basis.n_propagating; ++j) {
            const int j0 = f->basis.block_start[j], nj = f->basis.block_size(j);
            double n0 = 0;
            for (int s = 0; s < nj; ++s) n0 += std::norm(A0[j0 + s]);
            const double mu1 = p.mu[j](0), mu2 = p.mu[j](nj - 1);
            for (std::size_t i = 0; i < Z.size(); ++i) {
                double n2 = 0;
                for (int s = 0; s < nj; ++s) n2 += std::norm(tr.A[i](j0 + s));
                const double hi = std::exp(-mu1 * Z[i]) * n0, lo = std::exp(-mu2 * Z[i]) * n0;
                if (nj == 1) {
                    CHECK(std::abs(n2 - hi) <= 1e-9 * hi + 1e-300);
                } else {
                    CHECK(n2 <= hi * (1 + 1e-9));
                    CHECK(n2 >= lo * (1 - 1e-9));
                }
            }
        }
    }
}

TEST_CASE("mean_amplitude_evolution rejects bad grids") {
    const Fixture& f = geom1();
    std::vector<CMatrix> Q;
    for (const BlockMoments& b : f.m.blocks) Q.push_back(b.Q);
    std::vector<cdouble> A0(f.basis.n_modes(), 1.0);
    CHECK_THROWS_AS(mean_amplitude_evolution(f.basis, Q, A0, {0.0, -1.0}), std::invalid_argument);
    CHECK_THROWS_AS(mean_amplitude_evolution(f.basis, Q, A0, {1.0, 0.5}), std::invalid_argument);
    A0.pop_back();
    CHECK_THROWS_AS(mean_amplitude_evolution(f.basis, Q, A0, {0.0}), std::invalid_argument);
}

TEST_CASE("random PSD sandwiches stay PSD under the Hermitian part of Q") {
    // d/dZ (A A*) = Q A A* + A A* Q*, so the trace decays at rate given by C
    std::mt19937_64 rng(23);
    for (const BlockMoments& b : geom2().m.blocks) {
        const CMatrix P = random_psd(rng, b.size);
        const double dtr = (b.Q * P + P * b.Q.adjoint()).trace().real();
        CHECK(dtr <= 1e-12 * b.C.norm() * P.norm());
        CHECK(std::abs(dtr + (b.C * P).trace().real()) <= 1e-9 * b.C.norm() * P.norm());
    }
}
