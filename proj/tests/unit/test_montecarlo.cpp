#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "rwg/montecarlo.hpp"
#include "rwg/parallel.hpp"
#include "rwg/pipeline.hpp"

using namespace rwg;

namespace {

struct Fixture {
    ModeBasis basis;
    CovarianceModel model;
    CouplingTensor tensor;
    std::vector<CMatrix> Q_forward, C;
    TransportOperator op;
    MeanFreePaths mfp;
};

const Fixture& small() {
    static const Fixture f = [] {
        Fixture f;
        f.basis = enumerate_modes(Geometry{1.3, 2.1, 2 * kPi}, 64);
        f.model = CovarianceModel::gaussian(1.0, 0.01);
        f.tensor = assemble_coupling_tensor(f.basis, f.model, {}, false, 0);
        MomentOptions opt;
        opt.evanescent = false;
        const ModeMoments m = compute_moments(f.basis, f.tensor, f.model, opt);
        for (const BlockMoments& b : m.blocks) {
            const CMatrix W = weight_matrix(f.basis, b.j);
            f.Q_forward.push_back(W * b.U * W.inverse());
            f.C.push_back(b.C);
        }
        f.op = assemble_transport(f.basis, f.tensor, ZSpectrum(f.model), f.Q_forward);
        f.mfp = scattering_mean_free_paths(f.C);
        return f;
    }();
    return f;
}

struct Moment {
    double sum = 0, sum2 = 0;
    int n = 0;
    void add(double v) {
        sum += v;
        sum2 += v * v;
        ++n;
    }
    double mean() const { return sum / n; }
    double se() const { return std::sqrt((sum2 / n - mean() * mean()) / (n - 1)); }
};

}  // namespace

TEST_CASE("Sidak threshold") {
    CHECK(sidak_threshold(0.0027, 1) == doctest::Approx(3.0).epsilon(1e-3));
    double prev = 0;
    for (int m : {1, 10, 100, 1000, 10000}) {
        const double t = sidak_threshold(0.0027, m);
        CHECK(t > prev);
        prev = t;
        // two-sided tail of the per-test level
        const double per_test = 1 - std::pow(1 - 0.0027, 1.0 / m);
        CHECK(std::erfc(t / std::sqrt(2.0)) == doctest::Approx(per_test).epsilon(1e-9));
    }
    CHECK(sidak_threshold(0.0027, 0) == 0.0);
}

TEST_CASE("zero variance gives identically zero paths") {
    const Fixture& f = small();
    const CouplingTensor t0 = assemble_coupling_tensor(f.basis, CovarianceModel::gaussian(1.0, 0.0), {}, false, 0);
    ProcessSynthesizer s(f.basis, t0, CovarianceModel::gaussian(1.0, 0.0), 10.0, 0.05);
    std::mt19937_64 rng(1);
    RMatrix Yd;
    s.sample(rng, Yd);
    CHECK(s.n_scalar() == 0);
    CHECK(Yd.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("synthesized pair processes have the tensor covariance") {
    const Fixture& f = small();
    const double ell = f.model.ell, h = ell / 16;
    ProcessSynthesizer s(f.basis, f.tensor, f.model, 2 * ell, h);
    CHECK(s.truncated() <= 1e-8);
    const ModeBasis& b = f.basis;
    const PairField fa(b.propagating[0], b.propagating[1], PairKind::psi);
    const PairField fb(b.propagating[2], b.propagating[1], PairKind::psi);
    int tm = 0;
    while (tm < b.n_modes() && b.propagating[tm].te()) ++tm;
    REQUIRE(tm < b.n_modes());
    const PairField ft(b.propagating[tm], b.propagating[tm], PairKind::theta);
    REQUIRE(ft.terms.n > 0);
    const int lag[3] = {0, static_cast<int>(std::lround(ell / h)), static_cast<int>(std::lround(2 * ell / h))};
    Moment auto_m[3], cross, dd, dz, tt;
    std::mt19937_64 rng(2024);
    RMatrix Yd;
    for (int r = 0; r < 2000; ++r) {
        s.sample(rng, Yd);
        const double a0 = s.evaluate(fa.terms, Yd, 0);
        for (int q = 0; q < 3; ++q) auto_m[q].add(s.evaluate(fa.terms, Yd, lag[q]) * a0);
        cross.add(s.evaluate(fb.terms, Yd, 0) * a0);
        dd.add(s.evaluate(fa.terms, Yd, 0, true) * s.evaluate(fa.terms, Yd, 0, true));
        dz.add(s.evaluate(fa.terms, Yd, lag[1], true) * a0);
        const double t0 = s.evaluate(ft.terms, Yd, 0);
        tt.add(t0 * t0);
    }
    const double Baa = f.tensor.B(fa, fa);
    for (int q = 0; q < 3; ++q) {
        const double expect = Baa * f.model.g(lag[q] * h);
        CHECK(std::abs(auto_m[q].mean() - expect) <= 3 * auto_m[q].se());
    }
    CHECK(std::abs(cross.mean() - f.tensor.B(fb, fa)) <= 3 * cross.se());
    // E{f'(0) f'(0)} = -B g''(0), E{f'(z) f(0)} = B g'(z)
    CHECK(std::abs(dd.mean() + Baa * f.model.g(0, 2)) <= 3 * dd.se());
    CHECK(std::abs(dz.mean() - Baa * f.model.g(lag[1] * h, 1)) <= 3 * dz.se());
    CHECK(std::abs(tt.mean() - f.tensor.B(ft, ft)) <= 3 * tt.se());
}

TEST_CASE("forward integration: epsilon = 0 is the identity, bad steps throw") {
    const Fixture& f = small();
    ProcessSynthesizer s(f.basis, f.tensor, f.model, 5.0, 0.05);
    CouplingAssembler c(f.basis, s);
    std::mt19937_64 rng(4);
    RMatrix Yd;
    s.sample(rng, Yd);
    CMatrix A0 = CMatrix::Random(f.basis.n_modes(), 2);
    const std::vector<CMatrix> out = integrate_forward(f.basis, c, Yd, 0.05, 0.0, A0, {0, 10, 50});
    REQUIRE(out.size() == 3);
    for (const CMatrix& A : out) CHECK(A == A0);
    CHECK_THROWS_AS(integrate_forward(f.basis, c, Yd, 0.05, 0.1, A0, {0, 10000}), std::invalid_argument);
    CHECK_THROWS_AS(integrate_forward(f.basis, c, Yd, 0.05, 0.1, A0, {5, 2}), std::invalid_argument);
    CHECK_THROWS_AS(integrate_forward(f.basis, c, Yd, 0.05, 0.1, CMatrix::Zero(1, 1), {0}), std::invalid_argument);
    // a realization keeps the energy to O(eps) and a checkpoint at step 0 is exact
    const std::vector<CMatrix> e = integrate_forward(f.basis, c, Yd, 0.05, 0.05, A0, {0, 50});
    CHECK(e[0] == A0);
    CHECK(std::abs(e[1].squaredNorm() / A0.squaredNorm() - 1) < 0.05);
}

TEST_CASE("run configuration errors") {
    const Fixture& f = small();
    MCConfig cfg;
    cfg.n_realizations = 4;
    cfg.dz = 1.0;
    CHECK_THROWS_AS(run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S), std::invalid_argument);
    cfg.dz = 0.05;
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S), std::invalid_argument);
    cfg.epsilon = 0.1;
    cfg.source_record = f.basis.n_modes();
    CHECK_THROWS_AS(run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S), std::invalid_argument);
    cfg.source_record = 0;
    cfg.n_realizations = 1;
    CHECK_THROWS_AS(run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S), std::invalid_argument);
}

TEST_CASE("seeded runs replay bitwise across thread counts") {
    const Fixture& f = small();
    MCConfig cfg;
    cfg.epsilon = 0.1;
    cfg.n_realizations = 150;
    cfg.Z_checkpoints = {0.0, 0.05};
    set_num_threads(1);
    const MCResult a = run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S);
    set_num_threads(3);
    const MCResult b = run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S);
    set_num_threads(0);
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (std::size_t c = 0; c < a.checkpoints.size(); ++c) {
        CHECK(a.checkpoints[c].mean_A == b.checkpoints[c].mean_A);
        for (std::size_t j = 0; j < a.checkpoints[c].P.size(); ++j)
            CHECK(a.checkpoints[c].P[j] == b.checkpoints[c].P[j]);
    }
    cfg.seed += 1;
    const MCResult d = run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S);
    CHECK(d.checkpoints.back().mean_A != a.checkpoints.back().mean_A);

    // the Z = 0 checkpoint agrees exactly with the prediction
    const ComparisonReport rep = estimate_and_compare(a, f.basis, f.Q_forward, f.op);
    for (const ComparisonRow& r : rep.rows)
        if (r.Z == 0.0) {
            CHECK(r.empirical == doctest::Approx(r.predicted).epsilon(1e-15));
            CHECK(r.zscore == 0.0);
        }
}

TEST_CASE("pathwise energy drift shrinks when epsilon halves") {
    const Fixture& f = small();
    MCConfig cfg;
    cfg.n_realizations = 200;
    cfg.Z_checkpoints = {0.0, 0.25 * *std::min_element(f.mfp.S.begin(), f.mfp.S.end())};
    cfg.epsilon = 0.1;
    const MCResult a = run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S);
    cfg.epsilon = 0.05;
    const MCResult b = run_monte_carlo(f.basis, f.tensor, f.model, cfg, f.mfp.S);
    const double ratio = b.mean_drift / a.mean_drift;
    MESSAGE("mean drift eps=0.1: " << a.mean_drift << ", eps=0.05: " << b.mean_drift << ", ratio " << ratio);
    CHECK(ratio >= 0.25);
    CHECK(ratio <= 1.0);
    CHECK(b.max_drift < a.max_drift);
}
