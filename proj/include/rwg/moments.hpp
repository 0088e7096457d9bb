// moments.hpp - diffusion-limit moment matrices Q_j, C_j, kappa_j
#pragma once

#include <Eigen/Dense>

#include <array>
#include <vector>

#include "rwg/coupling.hpp"
#include "rwg/medium.hpp"
#include "rwg/modes.hpp"

namespace rwg {

using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;

// ---------------------------------------------------------------------------
// Coupling coefficients as linear combinations c * d^d/dz^d (pair process)
// of the (row, col) pair fields.
// ---------------------------------------------------------------------------

struct ProcTerm {
    cdouble c;
    PairKind kind = PairKind::psi;
    int d = 0;
};

struct Coefficient {
    std::array<ProcTerm, 4> t{};
    int n = 0;
};

enum class CoeffKind { AA, AB, BA, AV, Av, VA, vA };

// Leading-order coupling coefficient M_{row,col}. For AV/Av the column mode is
// evanescent; for VA/vA the row mode is.
Coefficient coupling_coefficient(CoeffKind kind, const ModeRecord& row, const ModeRecord& col,
                                 double k);

// Expansions of Psi and Theta over every pair of propagating records.
class PairTable {
public:
    explicit PairTable(const ModeBasis& basis);
    const CosExpansion& get(PairKind kind, int a, int b) const {
        return (kind == PairKind::psi ? psi_ : theta_)[static_cast<std::size_t>(a) * n_ + b];
    }
    int size() const { return n_; }

private:
    int n_;
    std::vector<CosExpansion> psi_, theta_;
};

// ---------------------------------------------------------------------------

struct MomentOptions {
    bool evanescent = true;
    int n_ev = -1;              // -1: automatic convergence probe
    int n_ev_start = 32;
    int n_ev_max = 1024;
    double n_ev_tol = 0.01;
    bool backward_reactive = true;
    bool printed_theta_normalization = false;
};

struct BlockMoments {
    int j = 0;      // wavenumber index
    int size = 1;   // multiplicity
    CMatrix Q, C, U;
    RMatrix kappa;  // full phase correction
    RMatrix Me;     // evanescent M_j^e (unweighted)
    RMatrix M2;     // M_j from the equal-range average (unweighted)
    RMatrix Kb;     // backward reactive part (already weighted)
    double c_asymmetry = 0.0;  // raw ||C - C*|| / ||C|| before symmetrization
};

struct ModeMoments {
    std::vector<BlockMoments> blocks;
    int n_ev_used = 0;
    double sigma2 = 0.0;
};

struct MeanFreePaths {
    std::vector<Eigen::VectorXd> mu;  // ascending eigenvalues of C_j
    std::vector<double> S;            // 1 / mu_{j,1}
};

// Direct power-spectral-density route (independent of Q).
std::vector<CMatrix> compute_C(const ModeBasis& basis, const CouplingTensor& tensor,
                               const ZSpectrum& zs, std::vector<double>* raw_asymmetry = nullptr);

// Explicit cos/sin kernel formulas for U_j.
std::vector<CMatrix> compute_U(const ModeBasis& basis, const CouplingTensor& tensor,
                               const ZSpectrum& zs, bool printed_normalization = false);

struct KappaParts {
    std::vector<RMatrix> Me, M2, Kb, kappa;
    int n_ev_used = 0;
};

KappaParts compute_kappa(const ModeBasis& basis, const CouplingTensor& tensor,
                         const ZSpectrum& zs, const MomentOptions& opt);

CMatrix weight_matrix(const ModeBasis& basis, int j);  // W_j = diag(sqrt(beta/k), sqrt(k/beta))

std::vector<CMatrix> assemble_Q(const std::vector<CMatrix>& U, const std::vector<RMatrix>& kappa,
                                const ModeBasis& basis);

ModeMoments compute_moments(const ModeBasis& basis, const CouplingTensor& tensor,
                            const CovarianceModel& model, const MomentOptions& opt);

// Q of the half-line integral evaluated term by term from the coupling
// coefficients (forward part only, no kappa). Used as a cross-check of compute_U.
std::vector<CMatrix> forward_generator_generic(const ModeBasis& basis,
                                               const CouplingTensor& tensor,
                                               const ZSpectrum& zs);

MeanFreePaths scattering_mean_free_paths(const std::vector<CMatrix>& C);

// ||Q + Q* + C||_F / (||Q||_F + ||C||_F) per block
std::vector<double> mid_residuals(const ModeMoments& m);

CMatrix block_exponential(const CMatrix& Q, double Z);

struct AmplitudeTrajectory {
    std::vector<double> Z;
    std::vector<CVector> A;  // flattened over propagating records, one per Z
};

AmplitudeTrajectory mean_amplitude_evolution(const ModeBasis& basis,
                                             const std::vector<CMatrix>& Q,
                                             const std::vector<cdouble>& A_o,
                                             const std::vector<double>& Z_grid);

}  // namespace rwg
