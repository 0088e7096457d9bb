// montecarlo.hpp - ensemble simulation of the forward coupled-amplitude equations
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "rwg/coupling.hpp"
#include "rwg/moments.hpp"
#include "rwg/transport.hpp"

namespace rwg {

// Realizations of the coupling processes Psi, dPsi/dz and Theta of every pair
// of propagating records. The separable covariance gives
//   Y_p(z) = int nu(x, z) cos(pi p1 x1/L1) cos(pi p2 x2/L2) dx = sum_r F(p, r) xi_r(z)
// with iid unit-variance g-correlated scalars xi_r and F F^T = sigma2 G1 (x) G2.
class ProcessSynthesizer {
public:
    ProcessSynthesizer(const ModeBasis& basis, const CouplingTensor& tensor,
                       const CovarianceModel& model, double z_len, double h,
                       double rank_tol = 1e-10);

    int n_grid() const { return n_grid_; }     // samples at z = i h, i < n_grid
    double h() const { return h_; }
    int n_scalar() const { return static_cast<int>(factor_.cols()); }
    int n_patterns() const { return static_cast<int>(factor_.rows()); }
    int pattern(int p1, int p2) const { return p1 * (P2_ + 1) + p2; }
    const RMatrix& factor() const { return factor_; }
    double clipped() const { return clipped_; }          // largest clipped Gram eigenvalue
    double truncated() const { return truncated_; }      // dropped variance, relative

    // xi and dxi/dz, n_grid x n_scalar
    void sample_scalars(std::mt19937_64& rng, RMatrix& xi, RMatrix& dxi) const;
    // pattern paths, (2 n_patterns) x n_grid: rows [0, n_patterns) hold Y,
    // the remaining rows dY/dz
    void sample(std::mt19937_64& rng, RMatrix& Yd) const;

    // Value (or z-derivative) of a cos expansion on the pattern paths at grid index i.
    double evaluate(const CosExpansion& f, const RMatrix& Yd, int i, bool deriv = false) const;

private:
    int P1_ = 0, P2_ = 0;
    int n_grid_ = 0, n_fft_ = 0;
    double h_ = 0.0;
    RMatrix factor_;
    std::vector<double> sqrt_eig_;  // circulant embedding spectrum, scaled
    std::vector<double> omega_;
    double clipped_ = 0.0;
    double truncated_ = 0.0;
    std::shared_ptr<void> plan_;  // fftw_plan, executed on per-call buffers
};

// M_AA(z) flattened over propagating records, as a sparse combination of the
// pattern paths: M(row, col) = sum_t w_t Y_{p_t} + w'_t dY_{p_t}.
class CouplingAssembler {
public:
    CouplingAssembler(const ModeBasis& basis, const ProcessSynthesizer& synth);
    void fill(const RMatrix& Yd, int i, CMatrix& M) const;
    int n() const { return n_; }

private:
    struct Term {
        int entry;
        int row;  // row of the stacked path matrix
        cdouble w;
    };
    int n_ = 0;
    std::vector<Term> terms_;
};

struct MCConfig {
    double epsilon = 0.05;
    std::vector<double> Z_checkpoints;  // empty: {0.1, 0.25, 0.5, 1} * min_j S_j
    double dz = 0.1;
    int n_realizations = 10000;
    std::uint64_t seed = 20240917;
    std::vector<cdouble> A_mean;  // start for the mean-amplitude test; empty: uniform
    int source_record = 0;        // single-mode start for the power test
    double max_drift = 0.1;
    double family_alpha = 0.0027;  // family-wise level, two-sided 3 sigma
};

// One checkpoint of the ensemble statistics.
struct MCCheckpoint {
    double Z = 0.0;  // epsilon^2 z at the grid point actually reached
    double z = 0.0;
    CVector mean_A;         // mean-start ensemble mean
    Eigen::VectorXd se_re;  // standard errors of Re / Im
    Eigen::VectorXd se_im;
    std::vector<CMatrix> P;       // single-start block powers E{A_j A_j*}
    std::vector<RMatrix> P_se_re;  // entrywise standard errors
    std::vector<RMatrix> P_se_im;
    double energy_mean = 0.0;  // mean total energy of the single-start paths
    double energy_se = 0.0;
};

struct MCResult {
    MCConfig config;
    std::vector<MCCheckpoint> checkpoints;
    double max_drift = 0.0;   // max over paths and checkpoints of relative energy drift
    double mean_drift = 0.0;  // ensemble mean at the last checkpoint
    int n_scalar = 0;
    double seconds = 0.0;
};

// Integrates dA/dz = eps sum_l M_AA(z) e^{i(beta_l - beta_j) z} A_l by RK4 on
// the half-step grid of the path for every column of A0. Returns the states at
// the requested step indices.
std::vector<CMatrix> integrate_forward(const ModeBasis& basis, const CouplingAssembler& coupling,
                                       const RMatrix& Yd, double h,
                                       double epsilon, const CMatrix& A0,
                                       const std::vector<int>& out_steps);

MCResult run_monte_carlo(const ModeBasis& basis, const CouplingTensor& tensor,
                         const CovarianceModel& model, const MCConfig& cfg,
                         const std::vector<double>& S);

struct ComparisonRow {
    double Z;
    int record;  // flattened record (amplitudes) or block index (powers)
    int s = 0, t = 0;
    const char* what;  // "amp_re", "amp_im", "pow_re", "pow_im"
    double empirical, predicted, se, zscore;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    double threshold = 3.0;  // Sidak-corrected |z| bound
    double max_abs_z = 0.0;
    double amp_discrepancy = 0.0;    // rms |<A> - e^{QZ}A_o| over checkpoints
    double power_discrepancy = 0.0;  // rms over block power entries
    double power_noise = 0.0;        // rms standard error of the same entries
    double amp_noise = 0.0;
    // sqrt(max(0, mean(z^2 - 1) / R)): rms bias in units of the single-path
    // standard deviation, comparable across realization counts
    double standardized_bias = 0.0;
    bool pass = false;
};

// Q_forward: forward generator without kappa (W U W^-1), matching the paths.
ComparisonReport estimate_and_compare(const MCResult& res, const ModeBasis& basis,
                                      const std::vector<CMatrix>& Q_forward,
                                      const TransportOperator& op);

double sidak_threshold(double family_alpha, int m);

}  // namespace rwg
