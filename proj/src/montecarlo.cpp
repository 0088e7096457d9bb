#include "rwg/montecarlo.hpp"

#include <fftw3.h>
#include <gsl/gsl_cdf.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>

#include "rwg/parallel.hpp"

namespace rwg {

namespace {

const cdouble I(0.0, 1.0);

struct FftwBuffer {
    explicit FftwBuffer(int n)
        : p(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
        if (!p) throw std::bad_alloc();
    }
    ~FftwBuffer() { fftw_free(p); }
    FftwBuffer(const FftwBuffer&) = delete;
    FftwBuffer& operator=(const FftwBuffer&) = delete;
    fftw_complex* p;
};

// FFTW planning is not thread safe; fftw_execute_dft on fresh buffers is.
std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

fftw_plan backward_plan(int n) {
    std::lock_guard<std::mutex> lk(plan_mutex());
    FftwBuffer a(n), b(n);
    return fftw_plan_dft_1d(n, a.p, b.p, FFTW_BACKWARD, FFTW_ESTIMATE);
}

// smallest 2^a 3^b 5^c >= n (sizes FFTW handles fast)
int next_fast_size(int n) {
    for (int m = std::max(n, 1);; ++m) {
        int r = m;
        for (int p : {2, 3, 5})
            while (r % p == 0) r /= p;
        if (r == 1) return m;
    }
}

// PSD factor of a symmetric table; small negative eigenvalues are clipped.
void psd_eig(const RMatrix& G, Eigen::VectorXd& mu, RMatrix& V, double& clipped) {
    Eigen::SelfAdjointEigenSolver<RMatrix> es(G);
    mu = es.eigenvalues();
    V = es.eigenvectors();
    const double top = std::max(mu.maxCoeff(), 0.0);
    for (int i = 0; i < mu.size(); ++i) {
        if (mu(i) >= 0) continue;
        if (mu(i) < -1e-10 * std::max(top, 1e-300))
            throw std::runtime_error("coupling Gram matrix is indefinite (eigenvalue " +
                                     std::to_string(mu(i)) + "); tensor assembly inconsistent");
        clipped = std::max(clipped, -mu(i));
        mu(i) = 0.0;
    }
}

}  // namespace

ProcessSynthesizer::ProcessSynthesizer(const ModeBasis& basis, const CouplingTensor& tensor,
                                       const CovarianceModel& model, double z_len, double h,
                                       double rank_tol)
    : h_(h) {
    if (!(h > 0) || !(z_len >= 0)) throw std::invalid_argument("synthesizer: need h > 0, z_len >= 0");
    for (const ModeRecord& m : basis.propagating) {
        P1_ = std::max(P1_, 2 * m.j1);
        P2_ = std::max(P2_, 2 * m.j2);
    }
    if (tensor.P1 < P1_ || tensor.P2 < P2_)
        throw std::out_of_range("synthesizer: coupling tensor does not cover the propagating pairs");

    Eigen::VectorXd mu1, mu2;
    RMatrix V1, V2;
    psd_eig(tensor.G1.topLeftCorner(P1_ + 1, P1_ + 1), mu1, V1, clipped_);
    psd_eig(tensor.G2.topLeftCorner(P2_ + 1, P2_ + 1), mu2, V2, clipped_);
    if (clipped_ > 0) spdlog::info("synthesizer: clipped Gram eigenvalues up to {:.2e}", clipped_);

    const double top = mu1.maxCoeff() * mu2.maxCoeff();
    double total = 0, dropped = 0;
    std::vector<std::pair<int, int>> keep;
    for (int a = 0; a < mu1.size(); ++a)
        for (int b = 0; b < mu2.size(); ++b) {
            const double v = mu1(a) * mu2(b);
            total += v;
            if (top > 0 && v > rank_tol * top)
                keep.emplace_back(a, b);
            else
                dropped += v;
        }
    if (tensor.sigma2 == 0.0) keep.clear();
    truncated_ = total > 0 ? dropped / total : 0.0;
    factor_ = RMatrix::Zero((P1_ + 1) * (P2_ + 1), static_cast<int>(keep.size()));
    for (int r = 0; r < static_cast<int>(keep.size()); ++r) {
        const auto [a, b] = keep[r];
        const double s = std::sqrt(tensor.sigma2 * mu1(a) * mu2(b));
        for (int p1 = 0; p1 <= P1_; ++p1)
            for (int p2 = 0; p2 <= P2_; ++p2) factor_(pattern(p1, p2), r) = s * V1(p1, a) * V2(p2, b);
    }

    // circulant embedding of g on the grid, padded past the support of g
    n_grid_ = static_cast<int>(std::ceil(z_len / h - 1e-9)) + 1;
    const int pad = static_cast<int>(std::ceil(model.z_cut() / h)) + 1;
    n_fft_ = next_fast_size(2 * (n_grid_ + pad));
    FftwBuffer c(n_fft_), lam(n_fft_);
    for (int i = 0; i < n_fft_; ++i) {
        c.p[i][0] = model.g(std::min(i, n_fft_ - i) * h);
        c.p[i][1] = 0.0;
    }
    plan_ = std::shared_ptr<void>(backward_plan(n_fft_), [](void* p) {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(p));
    });
    fftw_execute_dft(static_cast<fftw_plan>(plan_.get()), c.p, lam.p);
    sqrt_eig_.resize(n_fft_);
    omega_.resize(n_fft_);
    double neg = 0.0;
    for (int i = 0; i < n_fft_; ++i) {
        double v = lam.p[i][0];
        if (v < 0) {
            neg = std::max(neg, -v);
            v = 0;
        }
        sqrt_eig_[i] = std::sqrt(v / n_fft_);
        const int kk = i < n_fft_ / 2 ? i : (i == n_fft_ / 2 ? 0 : i - n_fft_);
        omega_[i] = 2.0 * kPi * kk / (n_fft_ * h);
    }
    // spectral lines carrying less than 1e-30 of the peak variance are skipped
    const double peak = *std::max_element(sqrt_eig_.begin(), sqrt_eig_.end());
    for (double& v : sqrt_eig_)
        if (v < 1e-15 * peak) v = 0.0;
    if (neg > 1e-10) spdlog::warn("circulant embedding: clipped spectrum values up to {:.2e}", neg);
    spdlog::debug("synthesizer: {} scalar processes, {} patterns, grid {} (fft {})", n_scalar(),
                  n_patterns(), n_grid_, n_fft_);
}

void ProcessSynthesizer::sample_scalars(std::mt19937_64& rng, RMatrix& xi, RMatrix& dxi) const {
    const int R = n_scalar();
    xi.setZero(n_grid_, R);
    dxi.setZero(n_grid_, R);
    if (R == 0) return;
    fftw_plan plan = static_cast<fftw_plan>(plan_.get());
    std::normal_distribution<double> nd;
    FftwBuffer w(n_fft_), dw(n_fft_), x(n_fft_), dx(n_fft_);
    for (int r = 0; r < R; r += 2) {
        for (int i = 0; i < n_fft_; ++i) {
            if (sqrt_eig_[i] == 0.0) {
                w.p[i][0] = w.p[i][1] = dw.p[i][0] = dw.p[i][1] = 0.0;
                continue;
            }
            const double a = nd(rng), b = nd(rng);
            w.p[i][0] = sqrt_eig_[i] * a;
            w.p[i][1] = sqrt_eig_[i] * b;
            // multiply by i omega
            dw.p[i][0] = -omega_[i] * w.p[i][1];
            dw.p[i][1] = omega_[i] * w.p[i][0];
        }
        fftw_execute_dft(plan, w.p, x.p);
        fftw_execute_dft(plan, dw.p, dx.p);
        for (int i = 0; i < n_grid_; ++i) {
            xi(i, r) = x.p[i][0];
            dxi(i, r) = dx.p[i][0];
            if (r + 1 < R) {
                xi(i, r + 1) = x.p[i][1];
                dxi(i, r + 1) = dx.p[i][1];
            }
        }
    }
}

void ProcessSynthesizer::sample(std::mt19937_64& rng, RMatrix& Yd) const {
    RMatrix xi, dxi;
    sample_scalars(rng, xi, dxi);
    const int np = n_patterns();
    Yd.resize(2 * np, n_grid_);
    Yd.topRows(np).noalias() = factor_ * xi.transpose();
    Yd.bottomRows(np).noalias() = factor_ * dxi.transpose();
}

double ProcessSynthesizer::evaluate(const CosExpansion& f, const RMatrix& Yd, int i,
                                    bool deriv) const {
    const int off = deriv ? n_patterns() : 0;
    double v = 0.0;
    for (int t = 0; t < f.n; ++t) v += f.t[t].c * Yd(off + pattern(f.t[t].p1, f.t[t].p2), i);
    return v;
}

CouplingAssembler::CouplingAssembler(const ModeBasis& basis, const ProcessSynthesizer& synth)
    : n_(basis.n_modes()) {
    const double k = basis.geometry.k;
    for (int b = 0; b < n_; ++b)
        for (int a = 0; a < n_; ++a) {
            const ModeRecord& row = basis.propagating[a];
            const ModeRecord& col = basis.propagating[b];
            const Coefficient c = coupling_coefficient(CoeffKind::AA, row, col, k);
            for (int t = 0; t < c.n; ++t) {
                const CosExpansion f = expand_pair(row, col, c.t[t].kind);
                const int off = c.t[t].d == 1 ? synth.n_patterns() : 0;
                for (int u = 0; u < f.n; ++u)
                    terms_.push_back({a + b * n_, off + synth.pattern(f.t[u].p1, f.t[u].p2),
                                      c.t[t].c * f.t[u].c});
            }
        }
}

void CouplingAssembler::fill(const RMatrix& Yd, int i, CMatrix& M) const {
    M.setZero(n_, n_);
    cdouble* m = M.data();
    const double* y = Yd.col(i).data();
    for (const Term& t : terms_) m[t.entry] += t.w * y[t.row];
}

std::vector<CMatrix> integrate_forward(const ModeBasis& basis, const CouplingAssembler& coupling,
                                       const RMatrix& Yd, double h,
                                       double epsilon, const CMatrix& A0,
                                       const std::vector<int>& out_steps) {
    const int n = basis.n_modes();
    if (A0.rows() != n) throw std::invalid_argument("integrate_forward: A0 row count mismatch");
    const int max_steps = (static_cast<int>(Yd.cols()) - 1) / 2;
    for (std::size_t i = 0; i < out_steps.size(); ++i)
        if (out_steps[i] < 0 || out_steps[i] > max_steps ||
            (i > 0 && out_steps[i] < out_steps[i - 1]))
            throw std::invalid_argument("integrate_forward: output steps outside the path");
    Eigen::VectorXd beta(n);
    for (int a = 0; a < n; ++a) beta(a) = basis.propagating[a].beta;

    const double dz = 2 * h;
    CMatrix M0, Mh, M1;
    auto phase = [&](double z) { return CVector((I * beta * z).array().exp().matrix()); };
    auto rhs = [&](const CMatrix& M, const CVector& ph, const CMatrix& A) {
        CMatrix w = M * (ph.asDiagonal() * A);
        return CMatrix(epsilon * (ph.conjugate().asDiagonal() * w));
    };

    std::vector<CMatrix> out;
    out.reserve(out_steps.size());
    CMatrix A = A0;
    std::size_t next = 0;
    while (next < out_steps.size() && out_steps[next] == 0) {
        out.push_back(A);
        ++next;
    }
    if (epsilon == 0.0) {
        while (next++ < out_steps.size()) out.push_back(A);
        return out;
    }
    const int steps = out_steps.empty() ? 0 : out_steps.back();
    coupling.fill(Yd, 0, M0);
    CVector ph0 = phase(0.0);
    for (int s = 0; s < steps; ++s) {
        const double z = s * dz;
        coupling.fill(Yd, 2 * s + 1, Mh);
        coupling.fill(Yd, 2 * s + 2, M1);
        const CVector ph_h = phase(z + h), ph1 = phase(z + dz);
        const CMatrix k1 = rhs(M0, ph0, A);
        const CMatrix k2 = rhs(Mh, ph_h, A + h * k1);
        const CMatrix k3 = rhs(Mh, ph_h, A + h * k2);
        const CMatrix k4 = rhs(M1, ph1, A + dz * k3);
        A += dz / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        std::swap(M0, M1);
        ph0 = ph1;
        while (next < out_steps.size() && out_steps[next] == s + 1) {
            out.push_back(A);
            ++next;
        }
    }
    return out;
}

namespace {

// Sums over a fixed chunk of realizations.
struct Accum {
    std::vector<CVector> sA;
    std::vector<Eigen::VectorXd> sre2, sim2;
    std::vector<CMatrix> sP;
    std::vector<RMatrix> sPre2, sPim2;
    std::vector<double> sE, sE2;
    double max_drift = 0.0;
    double last_drift = 0.0;

    Accum(int nc, int n)
        : sA(nc, CVector::Zero(n)),
          sre2(nc, Eigen::VectorXd::Zero(n)),
          sim2(nc, Eigen::VectorXd::Zero(n)),
          sP(nc, CMatrix::Zero(n, n)),
          sPre2(nc, RMatrix::Zero(n, n)),
          sPim2(nc, RMatrix::Zero(n, n)),
          sE(nc, 0.0),
          sE2(nc, 0.0) {}

    void add(const Accum& o) {
        for (std::size_t c = 0; c < sA.size(); ++c) {
            sA[c] += o.sA[c];
            sre2[c] += o.sre2[c];
            sim2[c] += o.sim2[c];
            sP[c] += o.sP[c];
            sPre2[c] += o.sPre2[c];
            sPim2[c] += o.sPim2[c];
            sE[c] += o.sE[c];
            sE2[c] += o.sE2[c];
        }
        max_drift = std::max(max_drift, o.max_drift);
        last_drift += o.last_drift;
    }
};

double se_from(double s, double s2, int n) {
    if (n < 2) return 0.0;
    const double m = s / n;
    const double var = std::max(s2 / n - m * m, 0.0) * n / (n - 1);
    return std::sqrt(var / n);
}

}  // namespace

MCResult run_monte_carlo(const ModeBasis& basis, const CouplingTensor& tensor,
                         const CovarianceModel& model, const MCConfig& cfg,
                         const std::vector<double>& S) {
    const auto t0 = std::chrono::steady_clock::now();
    if (!(cfg.epsilon > 0 && cfg.epsilon < 1))
        throw std::invalid_argument("montecarlo: epsilon must be in (0, 1)");
    if (cfg.n_realizations < 2) throw std::invalid_argument("montecarlo: need at least 2 realizations");
    const int n = basis.n_modes();
    double beta_max = 0;
    for (const ModeRecord& m : basis.propagating) beta_max = std::max(beta_max, m.beta);
    const double dz_max = std::min(model.ell, 2 * kPi / beta_max) / 10;
    if (!(cfg.dz > 0) || cfg.dz > dz_max * (1 + 1e-12))
        throw std::invalid_argument("montecarlo: dz must be in (0, " + std::to_string(dz_max) + "]");
    if (cfg.source_record < 0 || cfg.source_record >= n)
        throw std::invalid_argument("montecarlo: source_record outside the propagating records");

    MCResult res;
    res.config = cfg;
    std::vector<double> Zs = cfg.Z_checkpoints;
    if (Zs.empty()) {
        if (S.empty()) throw std::invalid_argument("montecarlo: no checkpoints and no mean free paths");
        const double smin = *std::min_element(S.begin(), S.end());
        Zs = {0.0, 0.1 * smin, 0.25 * smin, 0.5 * smin, smin};
    }
    std::sort(Zs.begin(), Zs.end());
    const double e2 = cfg.epsilon * cfg.epsilon;
    std::vector<int> steps;
    for (double Z : Zs) steps.push_back(static_cast<int>(std::lround(Z / e2 / cfg.dz)));
    res.config.Z_checkpoints = Zs;
    const int nc = static_cast<int>(steps.size());

    const double h = cfg.dz / 2;
    ProcessSynthesizer synth(basis, tensor, model, steps.back() * cfg.dz, h);
    CouplingAssembler coupling(basis, synth);
    res.n_scalar = synth.n_scalar();
    spdlog::info("montecarlo: eps={} z_max={:.1f} records={} scalars={} realizations={}",
                 cfg.epsilon, steps.back() * cfg.dz, n, synth.n_scalar(), cfg.n_realizations);

    CMatrix A0 = CMatrix::Zero(n, 2);
    if (cfg.A_mean.empty()) {
        A0.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(n)));
    } else {
        if (static_cast<int>(cfg.A_mean.size()) != n)
            throw std::invalid_argument("montecarlo: A_mean size does not match the record count");
        for (int a = 0; a < n; ++a) A0(a, 0) = cfg.A_mean[a];
    }
    A0(cfg.source_record, 1) = 1.0;
    const double E0[2] = {A0.col(0).squaredNorm(), 1.0};

    constexpr int kChunk = 64;
    const int n_chunks = (cfg.n_realizations + kChunk - 1) / kChunk;
    std::vector<Accum> parts(n_chunks, Accum(nc, n));
    parallel_for(n_chunks, [&](int ch) {
        Accum& acc = parts[ch];
        RMatrix Yd;
        const int lo = ch * kChunk, hi = std::min(cfg.n_realizations, lo + kChunk);
        for (int r = lo; r < hi; ++r) {
            std::seed_seq sq{static_cast<std::uint32_t>(cfg.seed & 0xffffffffu),
                             static_cast<std::uint32_t>(cfg.seed >> 32),
                             static_cast<std::uint32_t>(r)};
            std::mt19937_64 rng(sq);
            synth.sample(rng, Yd);
            const std::vector<CMatrix> out =
                integrate_forward(basis, coupling, Yd, h, cfg.epsilon, A0, steps);
            for (int c = 0; c < nc; ++c) {
                const CVector a = out[c].col(0);
                const CVector p = out[c].col(1);
                acc.sA[c] += a;
                acc.sre2[c] += a.real().cwiseAbs2();
                acc.sim2[c] += a.imag().cwiseAbs2();
                const CMatrix pp = p * p.adjoint();
                acc.sP[c] += pp;
                acc.sPre2[c] += pp.real().cwiseAbs2();
                acc.sPim2[c] += pp.imag().cwiseAbs2();
                const double E = p.squaredNorm();
                acc.sE[c] += E;
                acc.sE2[c] += E * E;
                for (int col = 0; col < 2; ++col) {
                    const double d = std::abs(out[c].col(col).squaredNorm() - E0[col]) / E0[col];
                    acc.max_drift = std::max(acc.max_drift, d);
                    if (c == nc - 1 && col == 1) acc.last_drift += d;
                }
            }
        }
    });
    Accum tot(nc, n);
    for (const Accum& a : parts) tot.add(a);

    const int R = cfg.n_realizations;
    res.max_drift = tot.max_drift;
    res.mean_drift = tot.last_drift / R;
    if (res.max_drift > cfg.max_drift)
        throw std::runtime_error("montecarlo: pathwise energy drift " + std::to_string(res.max_drift) +
                                 " exceeds " + std::to_string(cfg.max_drift) +
                                 "; reduce dz or epsilon");
    for (int c = 0; c < nc; ++c) {
        MCCheckpoint cp;
        cp.z = steps[c] * cfg.dz;
        cp.Z = e2 * cp.z;
        cp.mean_A = tot.sA[c] / R;
        cp.se_re.resize(n);
        cp.se_im.resize(n);
        for (int a = 0; a < n; ++a) {
            cp.se_re(a) = se_from(tot.sA[c](a).real(), tot.sre2[c](a), R);
            cp.se_im(a) = se_from(tot.sA[c](a).imag(), tot.sim2[c](a), R);
        }
        for (int j = 0; j < basis.n_propagating; ++j) {
            const int j0 = basis.block_start[j], nj = basis.block_size(j);
            CMatrix P = tot.sP[c].block(j0, j0, nj, nj) / R;
            RMatrix sr(nj, nj), si(nj, nj);
            for (int s = 0; s < nj; ++s)
                for (int t = 0; t < nj; ++t) {
                    sr(s, t) = se_from(tot.sP[c](j0 + s, j0 + t).real(), tot.sPre2[c](j0 + s, j0 + t), R);
                    si(s, t) = se_from(tot.sP[c](j0 + s, j0 + t).imag(), tot.sPim2[c](j0 + s, j0 + t), R);
                }
            cp.P.push_back(P);
            cp.P_se_re.push_back(sr);
            cp.P_se_im.push_back(si);
        }
        cp.energy_mean = tot.sE[c] / R;
        cp.energy_se = se_from(tot.sE[c], tot.sE2[c], R);
        res.checkpoints.push_back(std::move(cp));
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    spdlog::info("montecarlo: done in {:.1f} s, max drift {:.3e}", res.seconds, res.max_drift);
    return res;
}

double sidak_threshold(double family_alpha, int m) {
    if (m <= 0) return 0.0;
    const double a = -std::expm1(std::log1p(-family_alpha) / m);
    return gsl_cdf_ugaussian_Qinv(a / 2);
}

ComparisonReport estimate_and_compare(const MCResult& res, const ModeBasis& basis,
                                      const std::vector<CMatrix>& Q_forward,
                                      const TransportOperator& op) {
    ComparisonReport rep;
    const int n = basis.n_modes();
    std::vector<cdouble> A_o(n);
    if (res.config.A_mean.empty())
        std::fill(A_o.begin(), A_o.end(), cdouble(1.0 / std::sqrt(static_cast<double>(n))));
    else
        A_o = res.config.A_mean;
    std::vector<double> Zs;
    for (const MCCheckpoint& cp : res.checkpoints) Zs.push_back(cp.Z);
    const AmplitudeTrajectory amp = mean_amplitude_evolution(basis, Q_forward, A_o, Zs);

    std::vector<CMatrix> P_o(basis.n_propagating);
    for (int j = 0; j < basis.n_propagating; ++j) {
        const int nj = basis.block_size(j);
        P_o[j] = CMatrix::Zero(nj, nj);
        const int s = res.config.source_record - basis.block_start[j];
        if (s >= 0 && s < nj) P_o[j](s, s) = 1.0;
    }
    const PowerTrajectory pow = integrate_power(op, P_o, Zs);

    auto push = [&](double Z, int rec, int s, int t, const char* what, double e, double p, double se) {
        double z = 0.0;
        if (se > 0)
            z = (e - p) / se;
        else if (std::abs(e - p) > 1e-12)
            z = std::numeric_limits<double>::infinity();
        rep.rows.push_back({Z, rec, s, t, what, e, p, se, z});
    };
    double amp_sq = 0, pow_sq = 0, noise_sq = 0, amp_noise_sq = 0;
    int amp_n = 0, pow_n = 0;
    for (std::size_t c = 0; c < res.checkpoints.size(); ++c) {
        const MCCheckpoint& cp = res.checkpoints[c];
        for (int a = 0; a < n; ++a) {
            const cdouble e = cp.mean_A(a), p = amp.A[c](a);
            push(cp.Z, a, 0, 0, "amp_re", e.real(), p.real(), cp.se_re(a));
            push(cp.Z, a, 0, 0, "amp_im", e.imag(), p.imag(), cp.se_im(a));
            amp_sq += std::norm(e - p);
            amp_noise_sq += std::pow(cp.se_re(a), 2) + std::pow(cp.se_im(a), 2);
            ++amp_n;
        }
        for (int j = 0; j < basis.n_propagating; ++j) {
            const int nj = basis.block_size(j);
            for (int s = 0; s < nj; ++s)
                for (int t = s; t < nj; ++t) {
                    const cdouble e = cp.P[j](s, t), p = pow.states[c][j](s, t);
                    push(cp.Z, j, s, t, "pow_re", e.real(), p.real(), cp.P_se_re[j](s, t));
                    if (s != t) push(cp.Z, j, s, t, "pow_im", e.imag(), p.imag(), cp.P_se_im[j](s, t));
                    pow_sq += std::norm(e - p);
                    noise_sq += std::pow(cp.P_se_re[j](s, t), 2) + (s != t ? std::pow(cp.P_se_im[j](s, t), 2) : 0.0);
                    ++pow_n;
                }
        }
    }
    int m = 0;
    for (const ComparisonRow& r : rep.rows)
        if (r.se > 0) ++m;
    rep.threshold = std::max(3.0, sidak_threshold(res.config.family_alpha, m));
    double excess = 0.0;
    for (const ComparisonRow& r : rep.rows) {
        rep.max_abs_z = std::max(rep.max_abs_z, std::abs(r.zscore));
        if (r.se > 0) excess += r.zscore * r.zscore - 1.0;
    }
    if (m > 0)
        rep.standardized_bias =
            std::sqrt(std::max(0.0, excess / m / res.config.n_realizations));
    rep.amp_noise = amp_n ? std::sqrt(amp_noise_sq / amp_n) : 0.0;
    rep.amp_discrepancy = amp_n ? std::sqrt(amp_sq / amp_n) : 0.0;
    rep.power_discrepancy = pow_n ? std::sqrt(pow_sq / pow_n) : 0.0;
    rep.power_noise = pow_n ? std::sqrt(noise_sq / pow_n) : 0.0;
    rep.pass = rep.max_abs_z <= rep.threshold;
    return rep;
}

}  // namespace rwg
