#include "rwg/moments.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <stdexcept>

#include "rwg/parallel.hpp"

namespace rwg {

namespace {

const cdouble I(0.0, 1.0);

double wa(const ModeRecord& m, double k) {
    return m.te() ? std::sqrt(m.beta / k) : std::sqrt(k / m.beta);
}

double wb(const ModeRecord& m, double k) {
    return m.te() ? std::sqrt(k / m.beta) : std::sqrt(m.beta / k);
}

// coefficient of k^2/beta (TE) or beta (TM) in the explicit U formulas
double cfac(const ModeRecord& m, double k) { return m.te() ? k * k / m.beta : m.beta; }

void push(Coefficient& c, cdouble v, PairKind kind, int d) {
    if (v == 0.0) return;
    c.t[c.n++] = {v, kind, d};
}

}  // namespace

Coefficient coupling_coefficient(CoeffKind kind, const ModeRecord& row, const ModeRecord& col,
                                 double k) {
    // alpha = a_r b_c dPsi/dz
    // gamma = (i/k) a_r a_c [(k^2 - lambda_c [c TM]) Psi + Theta]
    // eta   = i lambda_r [r TE] / sqrt(k beta_r) b_c Psi
    const double alpha = wa(row, k) * wb(col, k);
    const cdouble g_psi = I / k * wa(row, k) * wa(col, k) * (k * k - (col.tm() ? col.lambda : 0.0));
    const cdouble g_theta = I / k * wa(row, k) * wa(col, k);
    const cdouble eta = row.te() ? I * row.lambda / std::sqrt(k * row.beta) * wb(col, k) : 0.0;

    double fa = 0, fg = 0, fe = 0;
    cdouble scale = 1.0;
    switch (kind) {
        case CoeffKind::AA: fa = 0.5; fg = 0.5; fe = 0.5; break;
        case CoeffKind::AB: fa = 0.5; fg = -0.5; fe = 0.5; break;
        case CoeffKind::BA: fa = 0.5; fg = 0.5; fe = -0.5; break;
        case CoeffKind::AV: fa = 0.5; fe = 0.5; break;
        case CoeffKind::Av: fg = 1.0; scale = -0.5 * I * (col.te() ? -1.0 : 1.0); break;
        case CoeffKind::VA: fa = 1.0; fg = 1.0; break;
        case CoeffKind::vA: fe = 1.0; scale = I * (row.te() ? -1.0 : 1.0); break;
    }
    Coefficient c;
    push(c, scale * fa * alpha, PairKind::psi, 1);
    push(c, scale * (fg * g_psi + fe * eta), PairKind::psi, 0);
    push(c, scale * fg * g_theta, PairKind::theta, 0);
    return c;
}

PairTable::PairTable(const ModeBasis& basis) : n_(basis.n_modes()) {
    psi_.resize(static_cast<std::size_t>(n_) * n_);
    theta_.resize(psi_.size());
    for (int a = 0; a < n_; ++a)
        for (int b = 0; b < n_; ++b) {
            const auto& ma = basis.propagating[a];
            const auto& mb = basis.propagating[b];
            psi_[static_cast<std::size_t>(a) * n_ + b] = expand_pair(ma, mb, PairKind::psi);
            theta_[static_cast<std::size_t>(a) * n_ + b] = expand_pair(ma, mb, PairKind::theta);
        }
}

namespace {

void check_cover(const ModeBasis& basis, const CouplingTensor& t) {
    if (std::abs(basis.geometry.L1 - t.geometry.L1) > 0 ||
        std::abs(basis.geometry.L2 - t.geometry.L2) > 0)
        throw std::invalid_argument("coupling tensor was assembled for another geometry");
    for (const ModeRecord& m : basis.propagating)
        if (!t.covers(m))
            throw std::out_of_range("coupling tensor has no entry for mode pair involving (" +
                                    std::to_string(m.j1) + "," + std::to_string(m.j2) + ")");
}

// (-i w)^n times a transform value
cdouble minus_iw_pow(double w, int n) {
    cdouble f = 1.0;
    for (int i = 0; i < n; ++i) f *= cdouble(0.0, -w);
    return f;
}

}  // namespace

std::vector<CMatrix> compute_C(const ModeBasis& basis, const CouplingTensor& tensor,
                               const ZSpectrum& zs, std::vector<double>* raw_asymmetry) {
    check_cover(basis, tensor);
    const double k = basis.geometry.k;
    const int N = basis.n_propagating;
    PairTable F(basis);
    std::vector<CMatrix> out(N);
    std::vector<double> asym(N, 0.0);
    parallel_for(N, [&](int j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        const double bj = basis.lead(j).beta;
        CMatrix C = CMatrix::Zero(nj, nj);
        for (int l = 0; l < N; ++l) {
            const double w = basis.lead(l).beta - bj;
            const double gh = zs.ghat(w);
            cdouble f[3];
            for (int n = 0; n < 3; ++n) f[n] = minus_iw_pow(w, n) * gh;
            for (int q = basis.block_start[l]; q < basis.block_start[l + 1]; ++q) {
                const ModeRecord& mq = basis.propagating[q];
                for (int s = 0; s < nj; ++s) {
                    Coefficient c1 = coupling_coefficient(CoeffKind::AA, mq,
                                                          basis.propagating[j0 + s], k);
                    for (int t = 0; t < nj; ++t) {
                        Coefficient c2 = coupling_coefficient(CoeffKind::AA, mq,
                                                              basis.propagating[j0 + t], k);
                        cdouble acc = 0.0;
                        for (int a = 0; a < c1.n; ++a)
                            for (int b = 0; b < c2.n; ++b) {
                                const ProcTerm& u = c1.t[a];
                                const ProcTerm& v = c2.t[b];
                                double B = tensor.B(F.get(u.kind, q, j0 + s),
                                                    F.get(v.kind, q, j0 + t));
                                double sg = (v.d % 2) ? -1.0 : 1.0;
                                acc += std::conj(u.c) * v.c * B * sg * f[u.d + v.d];
                            }
                        C(s, t) += acc;
                    }
                }
            }
        }
        double nrm = C.norm();
        asym[j] = nrm > 0 ? (C - C.adjoint()).norm() / nrm : 0.0;
        out[j] = 0.5 * (C + C.adjoint());
    });
    if (raw_asymmetry) *raw_asymmetry = asym;
    return out;
}

std::vector<CMatrix> compute_U(const ModeBasis& basis, const CouplingTensor& tensor,
                               const ZSpectrum& zs, bool printed_normalization) {
    check_cover(basis, tensor);
    const double k = basis.geometry.k;
    const int N = basis.n_propagating;
    PairTable F(basis);
    std::vector<CMatrix> out(N);
    parallel_for(N, [&](int j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        const double bj = basis.lead(j).beta, lj = basis.lead(j).lambda;
        CMatrix U = CMatrix::Zero(nj, nj);
        for (int l = 0; l < N; ++l) {
            const double bl = basis.lead(l).beta, ll = basis.lead(l).lambda;
            const cdouble H = zs.half_line(bl - bj);
            const double Hc = H.real(), Hs = H.imag();
            for (int q = basis.block_start[l]; q < basis.block_start[l + 1]; ++q) {
                const ModeRecord& mq = basis.propagating[q];
                for (int s = 0; s < nj; ++s) {
                    const ModeRecord& ms = basis.propagating[j0 + s];
                    const CosExpansion& Pjl = F.get(PairKind::psi, j0 + s, q);
                    const CosExpansion& Tjl = F.get(PairKind::theta, j0 + s, q);
                    for (int t = 0; t < nj; ++t) {
                        const CosExpansion& Plj = F.get(PairKind::psi, q, j0 + t);
                        const CosExpansion& Tlj = F.get(PairKind::theta, q, j0 + t);
                        double Bpp = tensor.B(Pjl, Plj);
                        double Bpt = tensor.B(Pjl, Tlj);
                        double Btp = tensor.B(Tjl, Plj);
                        double Btt = tensor.B(Tjl, Tlj);
                        double Bn;
                        if (printed_normalization)
                            Bn = Bpp + Bpt / (bl * bl) + Btp / (bj * bj) + Btt / (bj * bj * bl * bl);
                        else
                            Bn = Bpp + (Bpt + Btp) / (bj * bl) + Btt / (bj * bj * bl * bl);
                        double eq = ((ms.te() ? lj / bj : 0.0) - (mq.te() ? ll / bl : 0.0)) * Bpp -
                                    Bpt / bj + Btp / bl;
                        double cc = cfac(ms, k) * cfac(mq, k);
                        U(s, t) += cdouble(-0.25 * Hc * cc * Bn, 0.25 * eq - 0.25 * Hs * cc * Bn);
                    }
                }
            }
        }
        out[j] = U;
    });
    return out;
}

std::vector<CMatrix> forward_generator_generic(const ModeBasis& basis,
                                               const CouplingTensor& tensor,
                                               const ZSpectrum& zs) {
    check_cover(basis, tensor);
    const double k = basis.geometry.k;
    const int N = basis.n_propagating;
    PairTable F(basis);
    std::vector<CMatrix> out(N);
    parallel_for(N, [&](int j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        const double bj = basis.lead(j).beta;
        CMatrix Q = CMatrix::Zero(nj, nj);
        for (int l = 0; l < N; ++l) {
            const double w = basis.lead(l).beta - bj;
            const cdouble H = zs.half_line(w);
            const cdouble hv[3] = {H, -1.0 - I * w * H, I * w - w * w * H};
            for (int q = basis.block_start[l]; q < basis.block_start[l + 1]; ++q) {
                const ModeRecord& mq = basis.propagating[q];
                for (int s = 0; s < nj; ++s) {
                    Coefficient c1 = coupling_coefficient(CoeffKind::AA,
                                                          basis.propagating[j0 + s], mq, k);
                    for (int t = 0; t < nj; ++t) {
                        Coefficient c2 = coupling_coefficient(CoeffKind::AA, mq,
                                                              basis.propagating[j0 + t], k);
                        cdouble acc = 0.0;
                        for (int a = 0; a < c1.n; ++a)
                            for (int b = 0; b < c2.n; ++b) {
                                const ProcTerm& u = c1.t[a];
                                const ProcTerm& v = c2.t[b];
                                double B = tensor.B(F.get(u.kind, j0 + s, q),
                                                    F.get(v.kind, q, j0 + t));
                                double sg = (v.d % 2) ? -1.0 : 1.0;
                                acc += u.c * v.c * B * sg * hv[u.d + v.d];
                            }
                        Q(s, t) += acc;
                    }
                }
            }
        }
        out[j] = Q;
    });
    return out;
}

CMatrix weight_matrix(const ModeBasis& basis, int j) {
    const int nj = basis.block_size(j);
    const double r = std::sqrt(basis.lead(j).beta / basis.geometry.k);
    CMatrix W = CMatrix::Zero(nj, nj);
    W(0, 0) = r;
    if (nj == 2) W(1, 1) = 1.0 / r;
    return W;
}

namespace {

RMatrix weighted(const RMatrix& M, const ModeBasis& basis, int j) {
    RMatrix W = weight_matrix(basis, j).real();
    return W * M * W.inverse();
}

// Equal-range evanescent line of M_j^e summed over every l > N via completeness.
RMatrix completeness_line(const ModeBasis& basis, const CouplingTensor& tensor,
                          const PairTable& F, int j) {
    const int j0 = basis.block_start[j], nj = basis.block_size(j);
    const double bj = basis.lead(j).beta, lj = basis.lead(j).lambda;
    const double s2 = tensor.sigma2;
    RMatrix M = RMatrix::Zero(nj, nj);
    for (int s = 0; s < nj; ++s) {
        const ModeRecord& ms = basis.propagating[j0 + s];
        for (int t = 0; t < nj; ++t) {
            const ModeRecord& mt = basis.propagating[j0 + t];
            double spp = 0.0, spt = 0.0;
            for (int q = 0; q < basis.n_modes(); ++q) {
                spp += tensor.B(F.get(PairKind::psi, j0 + s, q), F.get(PairKind::psi, q, j0 + t));
                spt += tensor.B(F.get(PairKind::psi, j0 + s, q), F.get(PairKind::theta, q, j0 + t));
            }
            double tot_pp = s == t ? s2 : 0.0;
            double tot_pt = (ms.tm() && mt.tm()) ? s2 * lj : 0.0;
            M(s, t) = ((ms.te() ? lj * (tot_pp - spp) : 0.0) - (tot_pt - spt)) / bj;
        }
    }
    return M;
}

// D_c / D_s lines of M_j^e for evanescent records [e0, e1)
void evanescent_lines(const ModeBasis& basis, const CouplingTensor& tensor, const ZSpectrum& zs,
                      int e0, int e1, std::vector<RMatrix>& acc) {
    const int N = basis.n_propagating;
    if (e1 <= e0) return;
    std::vector<double> a, b(N);
    for (int e = e0; e < e1; ++e) a.push_back(basis.evanescent[e].beta);
    for (int j = 0; j < N; ++j) b[j] = basis.lead(j).beta;
    CMatrix D = zs.damped_matrix(a, b, 0);
    parallel_for(N, [&](int j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        const double bj = b[j], lj = basis.lead(j).lambda;
        RMatrix& M = acc[j];
        std::vector<CosExpansion> P(nj), T(nj);
        for (int e = e0; e < e1; ++e) {
            const ModeRecord& me = basis.evanescent[e];
            if (!tensor.covers(me))
                throw std::out_of_range("coupling tensor does not cover evanescent mode (" +
                                        std::to_string(me.j1) + "," + std::to_string(me.j2) + ")");
            const double bl = me.beta, ll = me.lambda;
            const double Dc = D(e - e0, j).real(), Ds = D(e - e0, j).imag();
            for (int s = 0; s < nj; ++s) {
                P[s] = expand_pair(basis.propagating[j0 + s], me, PairKind::psi);
                T[s] = expand_pair(basis.propagating[j0 + s], me, PairKind::theta);
            }
            for (int s = 0; s < nj; ++s) {
                const ModeRecord& ms = basis.propagating[j0 + s];
                const double f = 1.0 + (ms.te() ? lj / (bj * bj) : 0.0);
                for (int t = 0; t < nj; ++t) {
                    double Btp = tensor.B(T[s], P[t]);
                    double Bpt = tensor.B(P[s], T[t]);
                    double Btt = tensor.B(T[s], T[t]);
                    double Bpp = tensor.B(P[s], P[t]);
                    double v = Ds * (Btp + f * Bpt);
                    v += Dc * (Btt / (bj * bl) +
                               bj * bl * f * ((me.te() ? ll / (bl * bl) : 0.0) - 1.0) * Bpp);
                    M(s, t) += v;
                }
            }
        }
    });
}

// Reactive coupling through the backward modes: H(beta_j + beta_l) -> i H_s.
RMatrix backward_reactive(const ModeBasis& basis, const CouplingTensor& tensor,
                          const ZSpectrum& zs, const PairTable& F, int j) {
    const double k = basis.geometry.k;
    const int j0 = basis.block_start[j], nj = basis.block_size(j);
    const double bj = basis.lead(j).beta;
    CMatrix Qb = CMatrix::Zero(nj, nj);
    for (int l = 0; l < basis.n_propagating; ++l) {
        const double w = basis.lead(l).beta + bj;
        const cdouble H = I * zs.half_line(w).imag();
        const cdouble hv[3] = {H, -1.0 - I * w * H, I * w - w * w * H};
        for (int q = basis.block_start[l]; q < basis.block_start[l + 1]; ++q) {
            const ModeRecord& mq = basis.propagating[q];
            for (int s = 0; s < nj; ++s) {
                Coefficient c1 =
                    coupling_coefficient(CoeffKind::AB, basis.propagating[j0 + s], mq, k);
                for (int t = 0; t < nj; ++t) {
                    Coefficient c2 =
                        coupling_coefficient(CoeffKind::BA, mq, basis.propagating[j0 + t], k);
                    cdouble acc = 0.0;
                    for (int a = 0; a < c1.n; ++a)
                        for (int b = 0; b < c2.n; ++b) {
                            const ProcTerm& u = c1.t[a];
                            const ProcTerm& v = c2.t[b];
                            double B = tensor.B(F.get(u.kind, j0 + s, q), F.get(v.kind, q, j0 + t));
                            double sg = (u.d % 2) ? -1.0 : 1.0;
                            acc += u.c * v.c * B * sg * hv[u.d + v.d];
                        }
                    Qb(s, t) -= acc;
                }
            }
        }
    }
    return Qb.imag();
}

}  // namespace

KappaParts compute_kappa(const ModeBasis& basis, const CouplingTensor& tensor,
                         const ZSpectrum& zs, const MomentOptions& opt) {
    check_cover(basis, tensor);
    const int N = basis.n_propagating;
    PairTable F(basis);
    KappaParts kp;
    kp.Me.resize(N);
    kp.M2.resize(N);
    kp.Kb.resize(N);
    kp.kappa.resize(N);

    parallel_for(N, [&](int j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        const ModeRecord& m = basis.lead(j);
        RMatrix M2 = RMatrix::Zero(nj, nj);
        for (int s = 0; s < nj; ++s)
            if (basis.propagating[j0 + s].te()) M2(s, s) = -m.lambda * tensor.sigma2 / (2 * m.beta);
        kp.M2[j] = M2;
        kp.Kb[j] = opt.backward_reactive ? backward_reactive(basis, tensor, zs, F, j)
                                         : RMatrix::Zero(nj, nj);
        kp.Me[j] = opt.evanescent ? completeness_line(basis, tensor, F, j) : RMatrix::Zero(nj, nj);
    });

    auto assemble = [&](const std::vector<RMatrix>& Me, std::vector<RMatrix>& out) {
        out.resize(N);
        for (int j = 0; j < N; ++j) out[j] = 0.5 * weighted(Me[j], basis, j) + kp.M2[j] + kp.Kb[j];
    };

    if (!opt.evanescent) {
        assemble(kp.Me, kp.kappa);
        return kp;
    }

    auto records = [&](int pairs) { return basis.ev_block_start[std::min(pairs, basis.n_evanescent)]; };
    int cap = std::min(opt.n_ev_max, basis.n_evanescent);
    if (opt.n_ev >= 0) {
        if (opt.n_ev > basis.n_evanescent)
            throw std::invalid_argument("compute_kappa: basis lists only " +
                                        std::to_string(basis.n_evanescent) + " evanescent modes");
        if (opt.n_ev == 0)
            spdlog::warn("n_ev = 0: kappa keeps only the equal-range parts (no damped evanescent lines)");
        evanescent_lines(basis, tensor, zs, 0, records(opt.n_ev), kp.Me);
        kp.n_ev_used = opt.n_ev;
        assemble(kp.Me, kp.kappa);
        return kp;
    }

    // automatic probe: double n_ev until every kappa_j changes by < n_ev_tol
    int n = std::min(opt.n_ev_start, cap);
    evanescent_lines(basis, tensor, zs, 0, records(n), kp.Me);
    std::vector<RMatrix> prev;
    assemble(kp.Me, prev);
    for (;;) {
        int n2 = std::min(2 * n, cap);
        if (n2 == n) {
            spdlog::warn("evanescent probe reached the cap n_ev = {} without meeting {:.1e}", n,
                         opt.n_ev_tol);
            break;
        }
        evanescent_lines(basis, tensor, zs, records(n), records(n2), kp.Me);
        std::vector<RMatrix> cur;
        assemble(kp.Me, cur);
        double worst = 0.0;
        for (int j = 0; j < N; ++j) {
            double nr = cur[j].norm();
            if (nr > 0) worst = std::max(worst, (cur[j] - prev[j]).norm() / nr);
        }
        n = n2;
        prev = std::move(cur);
        if (worst < opt.n_ev_tol) break;
    }
    kp.n_ev_used = n;
    kp.kappa = std::move(prev);
    return kp;
}

std::vector<CMatrix> assemble_Q(const std::vector<CMatrix>& U, const std::vector<RMatrix>& kappa,
                                const ModeBasis& basis) {
    if (U.size() != kappa.size() || static_cast<int>(U.size()) != basis.n_propagating)
        throw std::invalid_argument("assemble_Q: dimension mismatch");
    std::vector<CMatrix> Q(U.size());
    for (std::size_t j = 0; j < U.size(); ++j) {
        CMatrix W = weight_matrix(basis, static_cast<int>(j));
        if (U[j].rows() != W.rows() || kappa[j].rows() != W.rows())
            throw std::invalid_argument("assemble_Q: block size mismatch");
        Q[j] = W * U[j] * W.inverse() + I * kappa[j].cast<cdouble>();
    }
    return Q;
}

ModeMoments compute_moments(const ModeBasis& basis, const CouplingTensor& tensor,
                            const CovarianceModel& model, const MomentOptions& opt) {
    ZSpectrum zs(model);
    ModeMoments mm;
    mm.sigma2 = model.sigma2;
    std::vector<double> asym;
    auto C = compute_C(basis, tensor, zs, &asym);
    auto U = compute_U(basis, tensor, zs, opt.printed_theta_normalization);
    KappaParts kp = compute_kappa(basis, tensor, zs, opt);
    auto Q = assemble_Q(U, kp.kappa, basis);
    mm.n_ev_used = kp.n_ev_used;
    double worst = 0.0;
    for (int j = 0; j < basis.n_propagating; ++j) {
        BlockMoments b;
        b.j = j;
        b.size = basis.block_size(j);
        b.Q = Q[j];
        b.C = C[j];
        b.U = U[j];
        b.kappa = kp.kappa[j];
        b.Me = kp.Me[j];
        b.M2 = kp.M2[j];
        b.Kb = kp.Kb[j];
        b.c_asymmetry = asym[j];
        worst = std::max(worst, asym[j]);
        mm.blocks.push_back(std::move(b));
    }
    if (worst > 1e-9) spdlog::warn("raw asymmetry of C up to {:.3e} before symmetrization", worst);
    else spdlog::debug("raw asymmetry of C up to {:.3e}", worst);
    return mm;
}

MeanFreePaths scattering_mean_free_paths(const std::vector<CMatrix>& C) {
    MeanFreePaths r;
    for (std::size_t j = 0; j < C.size(); ++j) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(C[j]);
        Eigen::VectorXd mu = es.eigenvalues();
        if (!(mu(0) > 0.0))
            throw std::runtime_error("C not positive definite at j = " + std::to_string(j + 1) +
                                     " (min eigenvalue " + std::to_string(mu(0)) + ")");
        r.mu.push_back(mu);
        r.S.push_back(1.0 / mu(0));
    }
    return r;
}

std::vector<double> mid_residuals(const ModeMoments& m) {
    std::vector<double> r;
    for (const auto& b : m.blocks) {
        double den = b.Q.norm() + b.C.norm();
        r.push_back(den > 0 ? (b.Q + b.Q.adjoint() + b.C).norm() / den : 0.0);
    }
    return r;
}

CMatrix block_exponential(const CMatrix& Q, double Z) {
    if (Q.rows() == 1) return CMatrix::Constant(1, 1, std::exp(Q(0, 0) * Z));
    if (Q.rows() != 2) throw std::invalid_argument("block_exponential: blocks are 1x1 or 2x2");
    // e^{QZ} = e^{mZ} [cosh(dZ) I + sinh(dZ)/d (Q - m I)], d^2 = m^2 - det Q
    const cdouble m = 0.5 * Q.trace();
    const cdouble d = std::sqrt(m * m - Q.determinant());
    const cdouble dz = d * Z;
    const cdouble sh = std::abs(dz) < 1e-6 ? Z * (1.0 + dz * dz / 6.0) : std::sinh(dz) / d;
    CMatrix E = std::cosh(dz) * CMatrix::Identity(2, 2) + sh * (Q - m * CMatrix::Identity(2, 2));
    return std::exp(m * Z) * E;
}

AmplitudeTrajectory mean_amplitude_evolution(const ModeBasis& basis,
                                             const std::vector<CMatrix>& Q,
                                             const std::vector<cdouble>& A_o,
                                             const std::vector<double>& Z_grid) {
    if (static_cast<int>(A_o.size()) != basis.n_modes())
        throw std::invalid_argument("mean_amplitude_evolution: A_o size mismatch");
    for (std::size_t i = 0; i < Z_grid.size(); ++i)
        if (Z_grid[i] < 0 || (i > 0 && Z_grid[i] < Z_grid[i - 1]))
            throw std::invalid_argument("mean_amplitude_evolution: Z grid must be ascending and >= 0");
    AmplitudeTrajectory tr;
    tr.Z = Z_grid;
    for (double Z : Z_grid) {
        CVector A(basis.n_modes());
        for (int j = 0; j < basis.n_propagating; ++j) {
            const int j0 = basis.block_start[j], nj = basis.block_size(j);
            CVector a0(nj);
            for (int s = 0; s < nj; ++s) a0(s) = A_o[j0 + s];
            CVector a = Z == 0.0 ? a0 : CVector(block_exponential(Q[j], Z) * a0);
            for (int s = 0; s < nj; ++s) A(j0 + s) = a(s);
        }
        tr.A.push_back(A);
    }
    return tr;
}

}  // namespace rwg
