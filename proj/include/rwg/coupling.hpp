// coupling.hpp - equal-range covariances of the coupling processes Psi and Theta
#pragma once

#include <Eigen/Dense>

#include <array>
#include <string>

#include "rwg/medium.hpp"
#include "rwg/modes.hpp"

namespace rwg {

enum class PairKind { psi, theta };

// sum of c * cos(pi p1 x1 / L1) * cos(pi p2 x2 / L2)
struct CosTerm {
    int p1 = 0;
    int p2 = 0;
    double c = 0.0;
};

struct CosExpansion {
    std::array<CosTerm, 4> t{};
    int n = 0;
};

// Psi = phi_a . phi_b, Theta = div(phi_a) div(phi_b)
CosExpansion expand_pair(const ModeRecord& a, const ModeRecord& b, PairKind kind);

struct PairField {
    ModeRecord left;
    ModeRecord right;
    PairKind kind = PairKind::psi;
    CosExpansion terms;

    PairField() = default;
    PairField(const ModeRecord& a, const ModeRecord& b, PairKind k)
        : left(a), right(b), kind(k), terms(expand_pair(a, b, k)) {}
    double sample(double x1, double x2) const;
};

// G(p, p') = int int K(x - y) cos(pi p x / L) cos(pi p' y / L) dx dy, p, p' = 0..P
Eigen::MatrixXd build_axis_table(double L, int P, int order,
                                 const std::function<double(double)>& kernel);

struct TensorQuadrature {
    int order1 = 0;  // 0: 4 * (max mode index) + 8
    int order2 = 0;
    double refine_tol = 1e-6;
    int max_order = 8192;
};

class CouplingTensor {
public:
    Geometry geometry;
    std::string model_hash;
    double sigma2 = 0.0;
    int P1 = 0, P2 = 0;
    int order1 = 0, order2 = 0;
    Eigen::MatrixXd G1, G2;
    int max_j1 = 0, max_j2 = 0;  // largest mode indices covered

    // B(f, h) = int int sigma2 K(x - x') f(x) h(x') dx dx'
    double B(const CosExpansion& f, const CosExpansion& h) const;
    double B(const PairField& f, const PairField& h) const { return B(f.terms, h.terms); }

    bool covers(const ModeRecord& m) const { return m.j1 <= max_j1 && m.j2 <= max_j2; }
    std::string key() const;

    void save(const std::string& path) const;
    static CouplingTensor load(const std::string& path);
};

CouplingTensor assemble_coupling_tensor(const ModeBasis& basis, const CovarianceModel& model,
                                        const TensorQuadrature& quad, bool include_evanescent,
                                        int n_ev);

// Independent evaluation on the tensor quadrature grid by direct sampling of
// both fields (no trig expansion).
double cross_range_covariance(const CovarianceModel& model, const PairField& a,
                              const PairField& b, const QuadratureGrid& quad);

std::string content_hash(const std::string& s);

}  // namespace rwg
