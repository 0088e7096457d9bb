#include "rwg/transport.hpp"

#include <spdlog/spdlog.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rwg/parallel.hpp"

namespace rwg {

HermitianBasis::HermitianBasis(const ModeBasis& basis) {
    for (int j = 0; j < basis.n_propagating; ++j) {
        size_.push_back(basis.block_size(j));
        offset_.push_back(dim_);
        dim_ += size_.back() * size_.back();
    }
}

CMatrix HermitianBasis::element(int m, int b) {
    if (m == 1) return CMatrix::Ones(1, 1);
    const double r = 1.0 / std::sqrt(2.0);
    CMatrix E = CMatrix::Zero(2, 2);
    switch (b) {
        case 0: E(0, 0) = 1.0; break;
        case 1: E(1, 1) = 1.0; break;
        case 2: E(0, 1) = r; E(1, 0) = r; break;
        case 3: E(0, 1) = cdouble(0, r); E(1, 0) = cdouble(0, -r); break;
        default: throw std::out_of_range("HermitianBasis: index out of range");
    }
    return E;
}

RVector HermitianBasis::to_coords(const std::vector<CMatrix>& P) const {
    if (static_cast<int>(P.size()) != n_blocks())
        throw std::invalid_argument("HermitianBasis: wrong number of blocks");
    RVector x(dim_);
    for (int j = 0; j < n_blocks(); ++j) {
        const int m = size_[j];
        if (P[j].rows() != m || P[j].cols() != m)
            throw std::invalid_argument("HermitianBasis: block size mismatch");
        for (int b = 0; b < m * m; ++b) x(offset_[j] + b) = (P[j] * element(m, b)).trace().real();
    }
    return x;
}

std::vector<CMatrix> HermitianBasis::from_coords(const RVector& x) const {
    if (x.size() != dim_) throw std::invalid_argument("HermitianBasis: wrong coordinate length");
    std::vector<CMatrix> P(n_blocks());
    for (int j = 0; j < n_blocks(); ++j) {
        const int m = size_[j];
        P[j] = CMatrix::Zero(m, m);
        for (int b = 0; b < m * m; ++b) P[j] += x(offset_[j] + b) * element(m, b);
    }
    return P;
}

RVector HermitianBasis::identity_coords() const {
    std::vector<CMatrix> P;
    for (int m : size_) P.push_back(CMatrix::Identity(m, m));
    return to_coords(P);
}

namespace {

// T[(s nj + s') nl^2 + q nl + q'] so that Upsilon^+_{jl}(U)^{ss'} = sum T U^{qq'}
std::vector<cdouble> gain_tensor(const ModeBasis& basis, const CouplingTensor& tensor,
                                 const ZSpectrum& zs, const PairTable& F, int j, int l) {
    const double k = basis.geometry.k;
    const int j0 = basis.block_start[j], nj = basis.block_size(j);
    const int l0 = basis.block_start[l], nl = basis.block_size(l);
    const double w = basis.lead(l).beta - basis.lead(j).beta;
    const double gh = zs.ghat(w);
    cdouble f[3] = {gh, cdouble(0, -w) * gh, -w * w * gh};
    std::vector<Coefficient> c(nj * nl);
    for (int s = 0; s < nj; ++s)
        for (int q = 0; q < nl; ++q)
            c[s * nl + q] = coupling_coefficient(CoeffKind::AA, basis.propagating[j0 + s],
                                                 basis.propagating[l0 + q], k);
    std::vector<cdouble> T(static_cast<std::size_t>(nj * nj * nl * nl), 0.0);
    for (int s = 0; s < nj; ++s)
        for (int s2 = 0; s2 < nj; ++s2)
            for (int q = 0; q < nl; ++q)
                for (int q2 = 0; q2 < nl; ++q2) {
                    const Coefficient& c1 = c[s * nl + q];
                    const Coefficient& c2 = c[s2 * nl + q2];
                    cdouble acc = 0.0;
                    for (int a = 0; a < c1.n; ++a)
                        for (int b = 0; b < c2.n; ++b) {
                            const ProcTerm& u = c1.t[a];
                            const ProcTerm& v = c2.t[b];
                            double B = tensor.B(F.get(u.kind, j0 + s, l0 + q),
                                                F.get(v.kind, j0 + s2, l0 + q2));
                            double sg = (v.d % 2) ? -1.0 : 1.0;
                            acc += u.c * std::conj(v.c) * B * sg * f[u.d + v.d];
                        }
                    T[(s * nj + s2) * nl * nl + q * nl + q2] = acc;
                }
    return T;
}

CMatrix apply_tensor(const std::vector<cdouble>& T, int nj, int nl, const CMatrix& U) {
    CMatrix Y = CMatrix::Zero(nj, nj);
    for (int s = 0; s < nj; ++s)
        for (int s2 = 0; s2 < nj; ++s2)
            for (int q = 0; q < nl; ++q)
                for (int q2 = 0; q2 < nl; ++q2)
                    Y(s, s2) += T[(s * nj + s2) * nl * nl + q * nl + q2] * U(q, q2);
    return Y;
}

}  // namespace

CMatrix gain_block_apply(const ModeBasis& basis, const CouplingTensor& tensor, const ZSpectrum& zs,
                         int j, int l, const CMatrix& U) {
    PairTable F(basis);
    auto T = gain_tensor(basis, tensor, zs, F, j, l);
    return apply_tensor(T, basis.block_size(j), basis.block_size(l), U);
}

TransportOperator assemble_transport(const ModeBasis& basis, const CouplingTensor& tensor,
                                     const ZSpectrum& zs, const std::vector<CMatrix>& Q) {
    const int N = basis.n_propagating;
    if (static_cast<int>(Q.size()) != N)
        throw std::invalid_argument("assemble_transport: expected " + std::to_string(N) +
                                    " Q blocks, got " + std::to_string(Q.size()));
    TransportOperator op;
    op.hb = HermitianBasis(basis);
    const int D = op.hb.dim();
    op.gain = RMatrix::Zero(D, D);
    op.matrix = RMatrix::Zero(D, D);
    PairTable F(basis);
    parallel_for(N, [&](int j) {
        const int nj = basis.block_size(j);
        if (Q[j].rows() != nj) throw std::invalid_argument("assemble_transport: Q block size mismatch");
        for (int l = 0; l < N; ++l) {
            const int nl = basis.block_size(l);
            auto T = gain_tensor(basis, tensor, zs, F, j, l);
            for (int b = 0; b < nl * nl; ++b) {
                CMatrix Y = apply_tensor(T, nj, nl, HermitianBasis::element(nl, b));
                for (int a = 0; a < nj * nj; ++a)
                    op.gain(op.hb.offset(j) + a, op.hb.offset(l) + b) =
                        (Y * HermitianBasis::element(nj, a)).trace().real();
            }
        }
        // Upsilon = Upsilon^+ - Upsilon^-, Upsilon^-(U) = -(Q_j U + U Q_j*)
        for (int b = 0; b < nj * nj; ++b) {
            CMatrix E = HermitianBasis::element(nj, b);
            CMatrix Y = Q[j] * E + E * Q[j].adjoint();
            for (int a = 0; a < nj * nj; ++a)
                op.matrix(op.hb.offset(j) + a, op.hb.offset(j) + b) =
                    (Y * HermitianBasis::element(nj, a)).trace().real();
        }
    });
    op.matrix += op.gain;
    Eigen::JacobiSVD<RMatrix> svd(op.matrix);
    op.norm = svd.singularValues()(0);
    return op;
}

SpectralResult spectrum(const TransportOperator& op, double kernel_tol) {
    Eigen::EigenSolver<RMatrix> es(op.matrix);
    if (es.info() != Eigen::Success) throw std::runtime_error("transport spectrum: eigensolver failed");
    const Eigen::VectorXcd ev = es.eigenvalues();
    const int D = static_cast<int>(ev.size());
    std::vector<int> order(D);
    for (int i = 0; i < D; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return std::abs(ev(a)) < std::abs(ev(b)); });

    SpectralResult r;
    double maxabs = 0.0;
    for (int i = 0; i < D; ++i) {
        r.eigenvalues.push_back(ev(order[i]));
        maxabs = std::max(maxabs, std::abs(ev(i)));
        r.max_imag = std::max(r.max_imag, std::abs(ev(i).imag()));
        r.max_real = std::max(r.max_real, ev(i).real());
    }
    if (D == 0) throw std::runtime_error("transport spectrum: empty operator");
    if (r.max_real > 1e-8 * op.norm)
        spdlog::warn("transport spectrum has a positive eigenvalue {:.3e}", r.max_real);

    std::vector<int> kernel;
    for (int i = 0; i < D; ++i)
        if (std::abs(ev(order[i])) <= kernel_tol * maxabs) kernel.push_back(order[i]);
    r.kernel_dim = static_cast<int>(kernel.size());
    if (r.kernel_dim == 0)
        throw std::runtime_error("transport operator has no kernel (smallest |eigenvalue| " +
                                 std::to_string(std::abs(r.eigenvalues[0])) + ")");
    if (r.kernel_dim > 1)
        spdlog::warn("kernel of the transport operator has dimension {}: the positive-flux "
                     "(irreducibility) condition between modes may fail", r.kernel_dim);

    // kernel vector: real part after removing the global phase
    Eigen::VectorXcd v = es.eigenvectors().col(kernel[0]);
    Eigen::Index imax;
    v.cwiseAbs().maxCoeff(&imax);
    v *= std::conj(v(imax)) / std::abs(v(imax));
    RVector x = v.real();
    std::vector<CMatrix> U = op.hb.from_coords(x);
    double tr = 0.0;
    for (const auto& B : U) tr += B.trace().real();
    if (tr < 0) {
        x = -x;
        tr = -tr;
        for (auto& B : U) B = -B;
    }
    for (auto& B : U) {
        B = 0.5 * (B + B.adjoint()) / tr;
        Eigen::SelfAdjointEigenSolver<CMatrix> bs(B);
        double mn = bs.eigenvalues()(0);
        if (mn < 0) {
            r.clipped = std::min(r.clipped, mn);
            if (mn < -1e-12)
                spdlog::warn("equipartition block has eigenvalue {:.3e} < 0; clipped", mn);
            Eigen::VectorXd lam = bs.eigenvalues().cwiseMax(0.0);
            B = bs.eigenvectors() * lam.cast<cdouble>().asDiagonal() * bs.eigenvectors().adjoint();
        }
    }
    double tr2 = 0.0;
    for (const auto& B : U) tr2 += B.trace().real();
    for (auto& B : U) B /= tr2;
    r.U_o = U;
    r.U_o_coords = op.hb.to_coords(U);

    int first = r.kernel_dim;
    if (first < D) {
        r.lambda_gap = r.eigenvalues[first].real();
        double mag = std::abs(r.eigenvalues[first]);
        r.m_gap = 0;
        for (int i = first; i < D; ++i)
            if (std::abs(std::abs(r.eigenvalues[i]) - mag) <= 1e-6 * mag) ++r.m_gap;
        r.L_eq = 1.0 / mag;
    }
    return r;
}

namespace {

void fill_states(const TransportOperator& op, PowerTrajectory& tr) {
    double tr0 = 0.0;
    tr.min_block_eig = 0.0;
    tr.max_trace_drift = 0.0;
    for (std::size_t i = 0; i < tr.coords.size(); ++i) {
        tr.states.push_back(op.hb.from_coords(tr.coords[i]));
        double t = 0.0;
        for (const auto& B : tr.states.back()) t += B.trace().real();
        // blocks holding a negligible share of the power are judged against
        // 1e-6 of the total, below which round-off dominates
        const double floor = 1e-6 * std::abs(t);
        for (const auto& B : tr.states.back()) {
            const double bt = B.trace().real();
            Eigen::SelfAdjointEigenSolver<CMatrix> es(B, Eigen::EigenvaluesOnly);
            const double mn = es.eigenvalues()(0);
            const double scale = std::max(bt, floor);
            tr.min_block_eig = std::min(tr.min_block_eig, scale > 0 ? mn / scale : mn);
        }
        if (i == 0) tr0 = t;
        if (tr0 != 0.0) tr.max_trace_drift = std::max(tr.max_trace_drift, std::abs(t - tr0) / std::abs(tr0));
    }
    if (tr.min_block_eig < -1e-8)
        throw std::runtime_error("power trajectory left the PSD cone (relative eigenvalue " +
                                 std::to_string(tr.min_block_eig) + ")");
}

void check_grid(const std::vector<double>& Z) {
    for (std::size_t i = 0; i < Z.size(); ++i)
        if (Z[i] < 0 || (i > 0 && Z[i] < Z[i - 1]))
            throw std::invalid_argument("Z grid must be ascending and start at >= 0");
}

}  // namespace

PowerTrajectory integrate_power(const TransportOperator& op, const std::vector<CMatrix>& P_o,
                                const std::vector<double>& Z_grid) {
    check_grid(Z_grid);
    PowerTrajectory tr;
    tr.Z = Z_grid;
    const RVector x0 = op.hb.to_coords(P_o);
    Eigen::EigenSolver<RMatrix> es(op.matrix);
    const Eigen::MatrixXcd V = es.eigenvectors();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(V);
    const Eigen::MatrixXcd Vinv = lu.inverse();
    const double cond = V.norm() * Vinv.norm();
    if (es.info() == Eigen::Success && cond < 1e8) {
        const Eigen::VectorXcd c = Vinv * x0.cast<cdouble>();
        const Eigen::VectorXcd lam = es.eigenvalues();
        for (double Z : Z_grid) {
            if (Z == 0.0) {
                tr.coords.push_back(x0);
                continue;
            }
            Eigen::VectorXcd e = (lam * Z).array().exp().matrix().cwiseProduct(c);
            tr.coords.push_back((V * e).real());
        }
    } else {
        spdlog::warn("transport eigenvectors ill-conditioned (cond {:.2e}); using scaling and squaring",
                     cond);
        tr.used_fallback = true;
        for (double Z : Z_grid) {
            RMatrix E = (op.matrix * Z).exp();
            tr.coords.push_back(E * x0);
        }
    }
    fill_states(op, tr);
    return tr;
}

PowerTrajectory integrate_power_rk4(const TransportOperator& op, const std::vector<CMatrix>& P_o,
                                    const std::vector<double>& Z_grid, double dZ) {
    check_grid(Z_grid);
    if (!(dZ > 0)) throw std::invalid_argument("integrate_power_rk4: dZ must be positive");
    PowerTrajectory tr;
    tr.Z = Z_grid;
    RVector x = op.hb.to_coords(P_o);
    double z = 0.0;
    for (double Zt : Z_grid) {
        while (z < Zt) {
            double h = std::min(dZ, Zt - z);
            RVector k1 = op.matrix * x;
            RVector k2 = op.matrix * (x + 0.5 * h * k1);
            RVector k3 = op.matrix * (x + 0.5 * h * k2);
            RVector k4 = op.matrix * (x + h * k3);
            x += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
            z += h;
        }
        tr.coords.push_back(x);
    }
    fill_states(op, tr);
    return tr;
}

std::vector<DepolarizationRow> depolarization_report(const PowerTrajectory& traj) {
    std::vector<DepolarizationRow> out;
    for (std::size_t i = 0; i < traj.Z.size(); ++i)
        for (std::size_t j = 0; j < traj.states[i].size(); ++j) {
            const CMatrix& P = traj.states[i][j];
            double p11 = P(0, 0).real();
            double p22 = P.rows() == 2 ? P(1, 1).real() : 0.0;
            double t = p11 + p22;
            double m = t > 0 ? std::abs(p11 - p22) / t : 0.0;
            out.push_back({traj.Z[i], static_cast<int>(j), p11, p22, m});
        }
    return out;
}

}  // namespace rwg
