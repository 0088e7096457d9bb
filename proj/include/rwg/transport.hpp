// transport.hpp - energy transport operator on Hermitian mode-power matrices
#pragma once

#include <Eigen/Dense>

#include <vector>

#include "rwg/coupling.hpp"
#include "rwg/medium.hpp"
#include "rwg/moments.hpp"

namespace rwg {

using RVector = Eigen::VectorXd;

// Orthonormal basis of the Hermitian blocks under (U, V) = tr(U V*):
// E1 = diag(1,0), E2 = diag(0,1), E3 = (0 1; 1 0)/sqrt2, E4 = (0 i; -i 0)/sqrt2,
// or {1} for single-polarization blocks.
class HermitianBasis {
public:
    explicit HermitianBasis(const ModeBasis& basis);
    HermitianBasis() = default;

    int dim() const { return dim_; }
    int n_blocks() const { return static_cast<int>(size_.size()); }
    int block_size(int j) const { return size_[j]; }
    int offset(int j) const { return offset_[j]; }
    static CMatrix element(int m, int b);  // b-th basis matrix for block size m

    RVector to_coords(const std::vector<CMatrix>& P) const;
    std::vector<CMatrix> from_coords(const RVector& x) const;
    RVector identity_coords() const;  // coordinates of the vector of identities

private:
    std::vector<int> size_, offset_;
    int dim_ = 0;
};

struct TransportOperator {
    HermitianBasis hb;
    RMatrix matrix;  // D x D real representation
    RMatrix gain;    // Upsilon^+ part only
    double norm = 0.0;

    RVector apply(const RVector& x) const { return matrix * x; }
};

// Gain blocks Upsilon^+_{jl}(U) for U in block l, as a complex 4-index array
// folded into a map on block matrices.
CMatrix gain_block_apply(const ModeBasis& basis, const CouplingTensor& tensor, const ZSpectrum& zs,
                         int j, int l, const CMatrix& U);

TransportOperator assemble_transport(const ModeBasis& basis, const CouplingTensor& tensor,
                                     const ZSpectrum& zs, const std::vector<CMatrix>& Q);

struct SpectralResult {
    std::vector<cdouble> eigenvalues;  // ascending by magnitude
    std::vector<CMatrix> U_o;          // unit total trace
    RVector U_o_coords;
    double lambda_gap = 0.0;  // smallest-magnitude nonzero eigenvalue (negative)
    int m_gap = 0;
    double L_eq = 0.0;
    int kernel_dim = 0;
    double max_imag = 0.0;  // max |Im lambda|
    double max_real = 0.0;  // max Re lambda
    double clipped = 0.0;   // largest negative block eigenvalue clipped in U_o
};

SpectralResult spectrum(const TransportOperator& op, double kernel_tol = 1e-10);

struct PowerTrajectory {
    std::vector<double> Z;
    std::vector<RVector> coords;
    std::vector<std::vector<CMatrix>> states;
    double max_trace_drift = 0.0;   // relative
    double min_block_eig = 0.0;     // min over Z, j of lambda_min(P_j) / max(tr P_j, 1e-6 sum tr)
    bool used_fallback = false;
};

PowerTrajectory integrate_power(const TransportOperator& op, const std::vector<CMatrix>& P_o,
                                const std::vector<double>& Z_grid);

// classical RK4 on the same linear system, for conditioning diagnostics
PowerTrajectory integrate_power_rk4(const TransportOperator& op, const std::vector<CMatrix>& P_o,
                                    const std::vector<double>& Z_grid, double dZ);

struct DepolarizationRow {
    double Z;
    int j;
    double P11, P22, metric;
};

std::vector<DepolarizationRow> depolarization_report(const PowerTrajectory& traj);

}  // namespace rwg
