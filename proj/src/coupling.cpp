#include "rwg/coupling.hpp"

#include "json.hpp"
#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rwg {

namespace {

void add_term(CosExpansion& e, int p1, int p2, double c) {
    for (int i = 0; i < e.n; ++i) {
        if (e.t[i].p1 == p1 && e.t[i].p2 == p2) {
            e.t[i].c += c;
            return;
        }
    }
    e.t[e.n++] = {p1, p2, c};
}

void prune(CosExpansion& e, double scale) {
    int m = 0;
    for (int i = 0; i < e.n; ++i)
        if (std::abs(e.t[i].c) > 1e-300 && std::abs(e.t[i].c) > 1e-15 * scale) e.t[m++] = e.t[i];
    e.n = m;
}

}  // namespace

CosExpansion expand_pair(const ModeRecord& a, const ModeRecord& b, PairKind kind) {
    // cos cos = (C(d) + C(s))/2 and sin sin = (C(d) - C(s))/2
    int d1 = std::abs(a.j1 - b.j1), s1 = a.j1 + b.j1;
    int d2 = std::abs(a.j2 - b.j2), s2 = a.j2 + b.j2;
    CosExpansion e;
    double scale = 0.0;
    if (kind == PairKind::psi) {
        double c = a.amp1() * b.amp1() / 4;  // cc(x1) ss(x2)
        add_term(e, d1, d2, c);
        add_term(e, d1, s2, -c);
        add_term(e, s1, d2, c);
        add_term(e, s1, s2, -c);
        double c2 = a.amp2() * b.amp2() / 4;  // ss(x1) cc(x2)
        add_term(e, d1, d2, c2);
        add_term(e, d1, s2, c2);
        add_term(e, s1, d2, -c2);
        add_term(e, s1, s2, -c2);
        scale = std::abs(c) + std::abs(c2);
    } else {
        double c = a.div_amp() * b.div_amp() / 4;
        if (c == 0.0) return e;
        add_term(e, d1, d2, c);
        add_term(e, d1, s2, -c);
        add_term(e, s1, d2, -c);
        add_term(e, s1, s2, c);
        scale = std::abs(c);
    }
    prune(e, scale);
    return e;
}

double PairField::sample(double x1, double x2) const {
    if (kind == PairKind::psi) {
        auto p = eval_mode(left, x1, x2);
        auto q = eval_mode(right, x1, x2);
        return p[0] * q[0] + p[1] * q[1];
    }
    return mode_divergence(left, x1, x2) * mode_divergence(right, x1, x2);
}

Eigen::MatrixXd build_axis_table(double L, int P, int order,
                                 const std::function<double(double)>& kernel) {
    GaussRule r = gauss_legendre(order, 0.0, L);
    const int n = r.size();
    Eigen::MatrixXd C(P + 1, n);
    for (int p = 0; p <= P; ++p)
        for (int i = 0; i < n; ++i) C(p, i) = std::cos(kPi * p * r.x[i] / L) * r.w[i];
    Eigen::MatrixXd K(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) K(i, j) = kernel(r.x[i] - r.x[j]);
    Eigen::MatrixXd G = C * K * C.transpose();
    return 0.5 * (G + G.transpose());
}

namespace {

// strict weak order on expansions, so B(f, h) and B(h, f) sum in the same order
bool expansion_less(const CosExpansion& a, const CosExpansion& b) {
    if (a.n != b.n) return a.n < b.n;
    for (int i = 0; i < a.n; ++i) {
        const CosTerm &u = a.t[i], &v = b.t[i];
        if (u.p1 != v.p1) return u.p1 < v.p1;
        if (u.p2 != v.p2) return u.p2 < v.p2;
        if (u.c != v.c) return u.c < v.c;
    }
    return false;
}

}  // namespace

double CouplingTensor::B(const CosExpansion& f_in, const CosExpansion& h_in) const {
    const bool swap = expansion_less(h_in, f_in);
    const CosExpansion& f = swap ? h_in : f_in;
    const CosExpansion& h = swap ? f_in : h_in;
    double s = 0.0;
    for (int a = 0; a < f.n; ++a) {
        const CosTerm& u = f.t[a];
        if (u.p1 > P1 || u.p2 > P2)
            throw std::out_of_range("coupling tensor does not cover index (" +
                                    std::to_string(u.p1) + "," + std::to_string(u.p2) + ")");
        for (int b = 0; b < h.n; ++b) {
            const CosTerm& v = h.t[b];
            if (v.p1 > P1 || v.p2 > P2)
                throw std::out_of_range("coupling tensor does not cover index (" +
                                        std::to_string(v.p1) + "," + std::to_string(v.p2) + ")");
            s += u.c * v.c * G1(u.p1, v.p1) * G2(u.p2, v.p2);
        }
    }
    return sigma2 * s;
}

std::string content_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::string CouplingTensor::key() const {
    std::ostringstream os;
    os << geometry.describe() << "|" << model_hash << "|P=" << P1 << "," << P2
       << "|order=" << order1 << "," << order2;
    return content_hash(os.str());
}

namespace {

struct AxisResult {
    Eigen::MatrixXd G;
    int order;
};

AxisResult refined_axis_table(double L, int P, int order, const TensorQuadrature& q,
                              const std::function<double(double)>& kernel, const char* axis) {
    Eigen::MatrixXd G = build_axis_table(L, P, order, kernel);
    for (;;) {
        int finer = 2 * order;
        Eigen::MatrixXd G2 = build_axis_table(L, P, finer, kernel);
        double scale = G2.cwiseAbs().maxCoeff();
        double diff = (G2 - G).cwiseAbs().maxCoeff();
        if (diff <= q.refine_tol * scale) return {G2, finer};
        if (finer * 2 > q.max_order) {
            spdlog::warn("axis {} table not converged at order {} (change {:.3e}); using it anyway",
                         axis, finer, diff / scale);
            return {G2, finer};
        }
        spdlog::warn("axis {} quadrature under-resolved at order {} (change {:.3e} on doubling); "
                     "refining", axis, order, diff / scale);
        G = std::move(G2);
        order = finer;
    }
}

}  // namespace

CouplingTensor assemble_coupling_tensor(const ModeBasis& basis, const CovarianceModel& model,
                                        const TensorQuadrature& quad, bool include_evanescent,
                                        int n_ev) {
    model.validate();
    if (n_ev < 0) throw std::invalid_argument("assemble_coupling_tensor: n_ev must be >= 0");
    if (include_evanescent && n_ev > basis.n_evanescent)
        throw std::invalid_argument("assemble_coupling_tensor: basis lists only " +
                                    std::to_string(basis.n_evanescent) +
                                    " evanescent modes, requested " + std::to_string(n_ev));
    CouplingTensor t;
    t.geometry = basis.geometry;
    t.model_hash = model.hash();
    t.sigma2 = model.sigma2;
    for (const ModeRecord& m : basis.propagating) {
        t.max_j1 = std::max(t.max_j1, m.j1);
        t.max_j2 = std::max(t.max_j2, m.j2);
    }
    if (include_evanescent) {
        int end = basis.ev_block_start[n_ev];
        for (int i = 0; i < end; ++i) {
            t.max_j1 = std::max(t.max_j1, basis.evanescent[i].j1);
            t.max_j2 = std::max(t.max_j2, basis.evanescent[i].j2);
        }
    }
    t.P1 = 2 * t.max_j1;
    t.P2 = 2 * t.max_j2;
    int o1 = quad.order1 > 0 ? quad.order1 : 4 * t.max_j1 + 8;
    int o2 = quad.order2 > 0 ? quad.order2 : 4 * t.max_j2 + 8;
    auto k1 = [&](double d) { return model.kernel1(d); };
    auto k2 = [&](double d) { return model.kernel2(d); };
    AxisResult a1 = refined_axis_table(basis.geometry.L1, t.P1, o1, quad, k1, "x1");
    AxisResult a2 = refined_axis_table(basis.geometry.L2, t.P2, o2, quad, k2, "x2");
    t.G1 = 0.5 * (a1.G + a1.G.transpose());
    t.G2 = 0.5 * (a2.G + a2.G.transpose());
    t.order1 = a1.order;
    t.order2 = a2.order;
    return t;
}

double cross_range_covariance(const CovarianceModel& model, const PairField& a,
                              const PairField& b, const QuadratureGrid& quad) {
    const int n1 = quad.r1.size(), n2 = quad.r2.size();
    Eigen::MatrixXd F(n1, n2), H(n1, n2), K1(n1, n1), K2(n2, n2);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            double w = quad.r1.w[i] * quad.r2.w[j];
            F(i, j) = w * a.sample(quad.r1.x[i], quad.r2.x[j]);
            H(i, j) = w * b.sample(quad.r1.x[i], quad.r2.x[j]);
        }
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n1; ++j) K1(i, j) = model.kernel1(quad.r1.x[i] - quad.r1.x[j]);
    for (int i = 0; i < n2; ++i)
        for (int j = 0; j < n2; ++j) K2(i, j) = model.kernel2(quad.r2.x[i] - quad.r2.x[j]);
    return model.sigma2 * F.cwiseProduct(K1 * H * K2.transpose()).sum();
}

// --------------------------------------------------------------------------
// cache file: JSON header plus the two axis tables
// --------------------------------------------------------------------------

void CouplingTensor::save(const std::string& path) const {
    nlohmann::json j;
    j["format"] = "rwg-coupling-tensor";
    j["version"] = 1;
    j["geometry"] = {{"L1", geometry.L1}, {"L2", geometry.L2}, {"k", geometry.k}};
    j["model"] = model_hash;
    j["sigma2"] = sigma2;
    j["P"] = {P1, P2};
    j["order"] = {order1, order2};
    j["max_j"] = {max_j1, max_j2};
    j["key"] = key();
    auto flat = [](const Eigen::MatrixXd& M) {
        std::vector<double> v(M.size());
        for (Eigen::Index r = 0; r < M.rows(); ++r)
            for (Eigen::Index c = 0; c < M.cols(); ++c) v[r * M.cols() + c] = M(r, c);
        return v;
    };
    j["G1"] = flat(G1);
    j["G2"] = flat(G2);
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write tensor cache " + path);
    os << j.dump();
}

CouplingTensor CouplingTensor::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("tensor cache not found: " + path);
    nlohmann::json j = nlohmann::json::parse(is);
    if (j.value("format", "") != "rwg-coupling-tensor" || j.value("version", 0) != 1)
        throw std::runtime_error("unrecognized tensor cache format in " + path);
    CouplingTensor t;
    t.geometry.L1 = j["geometry"]["L1"];
    t.geometry.L2 = j["geometry"]["L2"];
    t.geometry.k = j["geometry"]["k"];
    t.model_hash = j["model"];
    t.sigma2 = j["sigma2"];
    t.P1 = j["P"][0];
    t.P2 = j["P"][1];
    t.order1 = j["order"][0];
    t.order2 = j["order"][1];
    t.max_j1 = j["max_j"][0];
    t.max_j2 = j["max_j"][1];
    auto unflat = [](const std::vector<double>& v, int n) {
        if (static_cast<int>(v.size()) != n * n)
            throw std::runtime_error("tensor cache: table size mismatch");
        Eigen::MatrixXd M(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) M(r, c) = v[static_cast<std::size_t>(r) * n + c];
        return M;
    };
    t.G1 = unflat(j["G1"].get<std::vector<double>>(), t.P1 + 1);
    t.G2 = unflat(j["G2"].get<std::vector<double>>(), t.P2 + 1);
    if (j.value("key", "") != t.key())
        throw std::runtime_error("tensor cache header does not match its content: " + path);
    return t;
}

}  // namespace rwg
