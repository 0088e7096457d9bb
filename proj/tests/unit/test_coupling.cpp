#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "rwg/coupling.hpp"

using namespace rwg;

namespace {

Geometry geom1() { return Geometry{3.03, 5.84, 2 * kPi}; }

CovarianceModel constant_kernel(double sigma2) {
    CovarianceModel m;
    m.kind = CovarianceKind::custom_separable;
    m.sigma2 = sigma2;
    m.k1 = [](double) { return 1.0; };
    m.k2 = [](double) { return 1.0; };
    m.g_custom = [](double z, int d) {
        const double e = std::exp(-z * z / 2);
        return d == 0 ? e : d == 1 ? -z * e : (z * z - 1) * e;
    };
    m.z_support = 12;
    m.tag = "constant";
    return m;
}

const ModeBasis& basis1() {
    static const ModeBasis b = enumerate_modes(geom1(), 8);
    return b;
}

const CouplingTensor& tensor1() {
    static const CouplingTensor t =
        assemble_coupling_tensor(basis1(), CovarianceModel::gaussian(1.0), {}, true, 8);
    return t;
}

}  // namespace

TEST_CASE("pair expansions reproduce the sampled products") {
    const ModeBasis& b = basis1();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> pick(0, b.n_modes() - 1);
    std::uniform_real_distribution<double> u1(0, 3.03), u2(0, 5.84);
    for (int t = 0; t < 100; ++t) {
        const ModeRecord& a = b.propagating[pick(rng)];
        const ModeRecord& c = t % 4 == 0 ? b.evanescent[t % b.evanescent.size()] : b.propagating[pick(rng)];
        const PairField psi(a, c, PairKind::psi), theta(a, c, PairKind::theta);
        const double x1 = u1(rng), x2 = u2(rng);
        const auto pa = eval_mode(a, x1, x2), pc = eval_mode(c, x1, x2);
        CHECK(psi.sample(x1, x2) == doctest::Approx(pa[0] * pc[0] + pa[1] * pc[1]).scale(1.0).epsilon(1e-12));
        CHECK(theta.sample(x1, x2) ==
              doctest::Approx(mode_divergence(a, x1, x2) * mode_divergence(c, x1, x2)).scale(1.0).epsilon(1e-10));
        if (a.te() || c.te()) {
            CHECK(theta.terms.n == 0);
            CHECK(std::abs(theta.sample(x1, x2)) < 1e-12);
        }
    }
}

TEST_CASE("constant kernel: B(Psi_ab, Psi_ba) = sigma2 delta_ab") {
    const ModeBasis b = enumerate_modes(Geometry{1.3, 2.1, 2 * kPi}, 0);
    const CouplingTensor t = assemble_coupling_tensor(b, constant_kernel(0.7), {}, false, 0);
    for (int a = 0; a < b.n_modes(); ++a)
        for (int c = 0; c < b.n_modes(); ++c) {
            const PairField f(b.propagating[a], b.propagating[c], PairKind::psi);
            const PairField h(b.propagating[c], b.propagating[a], PairKind::psi);
            CHECK(std::abs(t.B(f, h) - (a == c ? 0.7 : 0.0)) <= 1e-12);
        }
}

TEST_CASE("symmetry and agreement with direct evaluation") {
    const ModeBasis& b = basis1();
    const CouplingTensor& t = tensor1();
    const CovarianceModel m = CovarianceModel::gaussian(1.0);
    const QuadratureGrid q = make_quadrature_grid(b.geometry, t.order1, t.order2);
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<int> pick(0, b.n_modes() - 1);
    for (int s = 0; s < 30; ++s) {
        const PairKind k1 = s % 3 == 0 ? PairKind::theta : PairKind::psi;
        const PairKind k2 = s % 5 == 0 ? PairKind::theta : PairKind::psi;
        const PairField f(b.propagating[pick(rng)], b.propagating[pick(rng)], k1);
        const PairField h(b.propagating[pick(rng)], b.propagating[pick(rng)], k2);
        const double bfh = t.B(f, h);
        CHECK(bfh == t.B(h, f));
        const double direct = cross_range_covariance(m, f, h, q);
        const double scale = std::sqrt(std::abs(t.B(f, f) * t.B(h, h))) + 1e-14;
        CHECK(std::abs(direct - bfh) <= 1e-12 * scale);
    }
}

TEST_CASE("diagonal entry against Monte Carlo integration") {
    const ModeBasis& b = basis1();
    const CouplingTensor& t = tensor1();
    const PairField f(b.propagating[0], b.propagating[0], PairKind::psi);
    const double L1 = 3.03, L2 = 5.84, area = L1 * L2;
    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> u1(0, L1), u2(0, L2);
    const int n = 1000000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const double x1 = u1(rng), x2 = u2(rng), y1 = u1(rng), y2 = u2(rng);
        const double d2 = (x1 - y1) * (x1 - y1) + (x2 - y2) * (x2 - y2);
        const double v = area * area * std::exp(-d2 / 2) * f.sample(x1, x2) * f.sample(y1, y2);
        s += v;
        s2 += v * v;
    }
    const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / (n - 1));
    MESSAGE("B(Psi11, Psi11) = " << t.B(f, f) << ", Monte Carlo " << mean << " +- " << se);
    CHECK(std::abs(t.B(f, f) - mean) <= 3 * se);
}

TEST_CASE("Gram matrices of random field families are PSD") {
    const ModeBasis& b = basis1();
    const CouplingTensor& t = tensor1();
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> pick(0, b.n_modes() - 1);
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<PairField> fam;
        for (int i = 0; i < 20; ++i)
            fam.emplace_back(b.propagating[pick(rng)], b.propagating[pick(rng)],
                             i % 4 == 3 ? PairKind::theta : PairKind::psi);
        Eigen::MatrixXd G(20, 20);
        for (int i = 0; i < 20; ++i)
            for (int j = 0; j < 20; ++j) G(i, j) = t.B(fam[i], fam[j]);
        CHECK((G - G.transpose()).norm() == 0.0);
        const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff();
        CHECK(lo >= -1e-10 * G.norm());
    }
}

TEST_CASE("doubling the quadrature order changes no entry by more than 1e-8") {
    const ModeBasis& b = basis1();
    const CouplingTensor& t = tensor1();
    TensorQuadrature q2;
    q2.order1 = 2 * t.order1;
    q2.order2 = 2 * t.order2;
    const CouplingTensor t2 = assemble_coupling_tensor(b, CovarianceModel::gaussian(1.0), q2, true, 8);
    CHECK(t2.order1 >= 2 * t.order1);
    const double scale = std::max(t.G1.cwiseAbs().maxCoeff(), t.G2.cwiseAbs().maxCoeff());
    CHECK((t2.G1 - t.G1).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    CHECK((t2.G2 - t.G2).cwiseAbs().maxCoeff() <= 1e-8 * scale);
    double worst = 0;
    for (int a = 0; a < b.n_modes(); a += 3)
        for (int c = 0; c < b.n_modes(); c += 5) {
            const PairField f(b.propagating[a], b.propagating[c], PairKind::psi);
            const double v = t.B(f, f);
            worst = std::max(worst, std::abs(t2.B(f, f) - v) / std::abs(v));
        }
    CHECK(worst <= 1e-8);
}

TEST_CASE("small basis with tied eigenvalues") {
    const ModeBasis b = enumerate_modes(Geometry{1, 1, 2 * kPi * 0.999}, 4);
    const CouplingTensor t = assemble_coupling_tensor(b, CovarianceModel::gaussian(1.0), {}, true, 4);
    std::vector<PairField> fam;
    for (const ModeRecord& a : b.propagating)
        for (const ModeRecord& c : b.propagating) {
            fam.emplace_back(a, c, PairKind::psi);
            fam.emplace_back(a, c, PairKind::theta);
        }
    Eigen::MatrixXd G(fam.size(), fam.size());
    for (std::size_t i = 0; i < fam.size(); ++i)
        for (std::size_t j = 0; j < fam.size(); ++j) {
            G(i, j) = t.B(fam[i], fam[j]);
            CHECK(std::isfinite(G(i, j)));
        }
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues().minCoeff() >= -1e-10);
}

TEST_CASE("evanescent switch with n_ev = 0 leaves the propagating block unchanged") {
    const ModeBasis& b = basis1();
    const CovarianceModel m = CovarianceModel::gaussian(1.0);
    const CouplingTensor a = assemble_coupling_tensor(b, m, {}, false, 0);
    const CouplingTensor c = assemble_coupling_tensor(b, m, {}, true, 0);
    CHECK(a.P1 == c.P1);
    CHECK(a.P2 == c.P2);
    CHECK((a.G1 - c.G1).norm() == 0.0);
    CHECK((a.G2 - c.G2).norm() == 0.0);
    CHECK(tensor1().covers(b.evanescent.back()));
}

TEST_CASE("cache round trip") {
    const CouplingTensor& t = tensor1();
    const auto path = (std::filesystem::temp_directory_path() / "rwg_tensor_roundtrip.json").string();
    t.save(path);
    const CouplingTensor r = CouplingTensor::load(path);
    std::filesystem::remove(path);
    CHECK(r.key() == t.key());
    CHECK(r.model_hash == t.model_hash);
    CHECK(r.sigma2 == t.sigma2);
    CHECK(r.P1 == t.P1);
    CHECK(r.P2 == t.P2);
    CHECK((r.G1 - t.G1).norm() == 0.0);
    CHECK((r.G2 - t.G2).norm() == 0.0);
    CHECK_THROWS(CouplingTensor::load(path));
}

TEST_CASE("sigma2 scales every entry") {
    const ModeBasis b = enumerate_modes(Geometry{1.3, 2.1, 2 * kPi}, 0);
    const CouplingTensor t1 = assemble_coupling_tensor(b, CovarianceModel::gaussian(1.0, 1.0), {}, false, 0);
    const CouplingTensor t0 = assemble_coupling_tensor(b, CovarianceModel::gaussian(1.0, 0.0), {}, false, 0);
    const CouplingTensor t3 = assemble_coupling_tensor(b, CovarianceModel::gaussian(1.0, 3.0), {}, false, 0);
    const PairField f(b.propagating[0], b.propagating[1], PairKind::psi);
    CHECK(t0.B(f, f) == 0.0);
    CHECK(t3.B(f, f) == doctest::Approx(3 * t1.B(f, f)).epsilon(1e-14));
}
