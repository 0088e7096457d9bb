#include "rwg/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "rwg/io.hpp"
#include "rwg/parallel.hpp"

namespace rwg {

namespace fs = std::filesystem;

namespace {

class Stopwatch {
public:
    Stopwatch() : t0_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    }

private:
    std::chrono::steady_clock::time_point t0_;
};

const char* pol_name(const ModeRecord& m) { return m.te() ? "TE" : "TM"; }

int find_record(const ModeBasis& basis, int j, int s, const std::string& field) {
    if (j < 1 || j > basis.n_propagating)
        throw ConfigError(field + ": mode j=" + std::to_string(j) + " does not exist (N = " +
                          std::to_string(basis.n_propagating) + ")");
    const int j0 = basis.block_start[j - 1];
    for (int r = j0; r < basis.block_start[j]; ++r)
        if (basis.propagating[r].pol() == s) return r;
    throw ConfigError(field + ": mode j=" + std::to_string(j) + " has no " + (s == 1 ? "TE" : "TM") +
                      " polarization");
}

}  // namespace

ModeBasis build_basis(const Geometry& g, int listed) { return enumerate_modes(g, listed); }

ModeBasis build_basis(const RunConfig& cfg) { return build_basis(cfg.geometry, cfg.n_evanescent_listed); }

int tensor_ev_count(const MomentOptions& opt, int listed) {
    if (!opt.evanescent) return 0;
    return std::min(opt.n_ev >= 0 ? opt.n_ev : opt.n_ev_max, listed);
}

CouplingTensor obtain_tensor(const ModeBasis& basis, const CovarianceModel& model,
                             const TensorQuadrature& quad, int n_ev, const std::string& cache_path,
                             bool no_assemble, bool* from_cache) {
    if (from_cache) *from_cache = false;
    auto usable = [&](const CouplingTensor& t) {
        if (t.geometry.L1 != basis.geometry.L1 || t.geometry.L2 != basis.geometry.L2 ||
            t.geometry.k != basis.geometry.k || t.model_hash != model.hash())
            return false;
        for (const ModeRecord& m : basis.propagating)
            if (!t.covers(m)) return false;
        const int end = n_ev > 0 ? basis.ev_block_start[n_ev] : 0;
        for (int i = 0; i < end; ++i)
            if (!t.covers(basis.evanescent[i])) return false;
        return true;
    };
    if (!cache_path.empty() && fs::exists(cache_path)) {
        CouplingTensor t = CouplingTensor::load(cache_path);
        if (usable(t)) {
            spdlog::info("coupling tensor loaded from {}", cache_path);
            if (from_cache) *from_cache = true;
            return t;
        }
        if (no_assemble)
            throw std::runtime_error("cached coupling tensor " + cache_path +
                                     " does not match the geometry, covariance or mode coverage, "
                                     "and --no-assemble forbids assembling a new one");
        spdlog::info("cached tensor {} does not match this run; reassembling", cache_path);
    } else if (no_assemble) {
        throw std::runtime_error("--no-assemble given but no cached coupling tensor at " +
                                 (cache_path.empty() ? std::string("<none>") : cache_path));
    }
    CouplingTensor t = assemble_coupling_tensor(basis, model, quad, n_ev > 0, n_ev);
    if (!cache_path.empty()) t.save(cache_path);
    return t;
}

std::vector<cdouble> source_amplitudes(const ModeBasis& basis, const SourceChoice& src) {
    const int n = basis.n_modes();
    std::vector<cdouble> A(n, 0.0);
    switch (src.kind) {
        case SourceKind::single_mode:
            A[find_record(basis, src.j, src.s, "source")] = 1.0;
            break;
        case SourceKind::uniform:
            std::fill(A.begin(), A.end(), cdouble(1.0 / std::sqrt(static_cast<double>(n))));
            break;
        case SourceKind::file: {
            const CsvTable t = read_csv(src.path);
            const int cj = t.column("j"), cs = t.column("s"), cr = t.column("re"), ci = t.column("im");
            for (const auto& row : t.rows) {
                const int j = std::stoi(row.at(cj)), s = std::stoi(row.at(cs));
                A[find_record(basis, j, s, "source.path")] =
                    cdouble(std::stod(row.at(cr)), std::stod(row.at(ci)));
            }
            break;
        }
    }
    return A;
}

std::vector<CMatrix> source_powers(const ModeBasis& basis, const std::vector<cdouble>& A) {
    std::vector<CMatrix> P(basis.n_propagating);
    for (int j = 0; j < basis.n_propagating; ++j) {
        const int j0 = basis.block_start[j], nj = basis.block_size(j);
        CVector a(nj);
        for (int s = 0; s < nj; ++s) a(s) = A[j0 + s];
        P[j] = a * a.adjoint();
    }
    return P;
}

std::vector<double> linear_grid(double hi, int n) {
    std::vector<double> Z(n);
    for (int i = 0; i < n; ++i) Z[i] = hi * i / (n - 1);
    return Z;
}

double offdiagonal_ratio(const std::vector<CMatrix>& U) {
    double off = 0, diag = 0;
    for (const CMatrix& B : U)
        for (int r = 0; r < B.rows(); ++r)
            for (int c = 0; c < B.cols(); ++c) (r == c ? diag : off) += std::norm(B(r, c));
    return diag > 0 ? std::sqrt(off / diag) : 0.0;
}

GeometryReport analyze_geometry(const RunConfig& cfg, const Geometry& g,
                                const std::string& cache_path, bool no_assemble,
                                bool with_transport) {
    GeometryReport r;
    r.basis = build_basis(g, cfg.n_evanescent_listed);
    const int n_ev = tensor_ev_count(cfg.moments, r.basis.n_evanescent);
    r.tensor = obtain_tensor(r.basis, cfg.covariance, cfg.quadrature, n_ev, cache_path, no_assemble);
    r.moments = compute_moments(r.basis, r.tensor, cfg.covariance, cfg.moments);
    std::vector<CMatrix> C, Q;
    for (const BlockMoments& b : r.moments.blocks) {
        C.push_back(b.C);
        Q.push_back(b.Q);
    }
    r.mfp = scattering_mean_free_paths(C);
    r.mid = mid_residuals(r.moments);
    if (with_transport) {
        ZSpectrum zs(cfg.covariance);
        r.op = assemble_transport(r.basis, r.tensor, zs, Q);
        r.spectrum = spectrum(r.op);
    }
    return r;
}

MonteCarloRun run_monte_carlo_study(const RunConfig& cfg, double epsilon, int realizations,
                                    const std::string& cache_path, bool no_assemble) {
    const MonteCarloSettings& ms = cfg.montecarlo;
    MonteCarloRun run;
    Geometry g = cfg.geometry;
    if (ms.own_geometry) {
        g.L1 = ms.L1;
        g.L2 = ms.L2;
    }
    run.basis = build_basis(g, cfg.n_evanescent_listed);
    run.model = cfg.covariance;
    run.model.sigma2 = ms.sigma2;
    const int n_ev = tensor_ev_count(cfg.moments, run.basis.n_evanescent);
    run.tensor = obtain_tensor(run.basis, run.model, cfg.quadrature, n_ev, cache_path, no_assemble);
    run.moments = compute_moments(run.basis, run.tensor, run.model, cfg.moments);
    std::vector<CMatrix> C;
    for (const BlockMoments& b : run.moments.blocks) {
        C.push_back(b.C);
        const CMatrix W = weight_matrix(run.basis, b.j);
        run.Q_forward.push_back(W * b.U * W.inverse());
    }
    ZSpectrum zs(run.model);
    run.op = assemble_transport(run.basis, run.tensor, zs, run.Q_forward);

    MCConfig mc;
    mc.epsilon = epsilon;
    mc.Z_checkpoints = ms.checkpoints;
    mc.dz = ms.dz;
    mc.n_realizations = realizations;
    mc.seed = ms.seed;
    mc.source_record = find_record(run.basis, ms.source_j, ms.source_s, "montecarlo.source");
    const MeanFreePaths mfp = scattering_mean_free_paths(C);
    run.result = run_monte_carlo(run.basis, run.tensor, run.model, mc, mfp.S);
    run.report = estimate_and_compare(run.result, run.basis, run.Q_forward, run.op);
    return run;
}

// ---------------------------------------------------------------------------
// artifact writers
// ---------------------------------------------------------------------------

void write_mode_table(const ModeBasis& basis, const std::string& path) {
    CsvWriter w(path, {"j", "j1", "j2", "multiplicity", "lambda", "beta", "polarizations"});
    for (int j = 0; j < basis.n_propagating; ++j) {
        const ModeRecord& m = basis.lead(j);
        std::string pols;
        for (int r = basis.block_start[j]; r < basis.block_start[j + 1]; ++r)
            pols += std::string(pols.empty() ? "" : "+") + pol_name(basis.propagating[r]);
        w.row({j + 1LL, static_cast<long long>(m.j1), static_cast<long long>(m.j2),
               static_cast<long long>(basis.block_size(j)), m.lambda, m.beta, pols});
    }
}

void write_mode_records(const ModeBasis& basis, const std::string& path) {
    CsvWriter w(path, {"j", "j1", "j2", "s", "lambda", "beta", "kind", "alpha", "multiplicity"});
    auto emit = [&](const std::vector<ModeRecord>& list, const char* kind) {
        for (const ModeRecord& m : list)
            w.row({m.block + 1LL, static_cast<long long>(m.j1), static_cast<long long>(m.j2),
                   static_cast<long long>(m.pol()), m.lambda, m.beta, std::string(kind), m.alpha,
                   static_cast<long long>(m.multiplicity)});
    };
    emit(basis.propagating, "propagating");
    emit(basis.evanescent, "evanescent");
}

void write_coherent(const GeometryReport& r, const std::string& path) {
    CsvWriter w(path, {"j", "j1", "j2", "multiplicity", "beta", "S", "inv_mu_max", "L_eq"});
    for (int j = 0; j < r.basis.n_propagating; ++j) {
        const ModeRecord& m = r.basis.lead(j);
        const Eigen::VectorXd& mu = r.mfp.mu[j];
        w.row({j + 1LL, static_cast<long long>(m.j1), static_cast<long long>(m.j2),
               static_cast<long long>(r.basis.block_size(j)), m.beta, r.mfp.S[j],
               1.0 / mu(mu.size() - 1), r.spectrum.L_eq});
    }
}

void write_stationary(const GeometryReport& r, const std::string& path) {
    CsvWriter w(path, {"row", "col", "j_row", "s_row", "j_col", "s_col", "re", "im", "abs"});
    const ModeBasis& b = r.basis;
    for (int a = 0; a < b.n_modes(); ++a)
        for (int c = 0; c < b.n_modes(); ++c) {
            const ModeRecord& ma = b.propagating[a];
            const ModeRecord& mc = b.propagating[c];
            cdouble v = 0.0;
            if (ma.block == mc.block) {
                const int j0 = b.block_start[ma.block];
                v = r.spectrum.U_o[ma.block](a - j0, c - j0);
            }
            w.row({static_cast<long long>(a + 1), static_cast<long long>(c + 1), ma.block + 1LL,
                   static_cast<long long>(ma.pol()), mc.block + 1LL, static_cast<long long>(mc.pol()),
                   v.real(), v.imag(), std::abs(v)});
        }
}

namespace {

void write_block_matrices(const ModeBasis& basis, const std::vector<CMatrix>& M,
                          const std::string& path) {
    CsvWriter w(path, {"j", "s", "s_prime", "Re", "Im"});
    for (int j = 0; j < basis.n_propagating; ++j)
        for (int s = 0; s < M[j].rows(); ++s)
            for (int t = 0; t < M[j].cols(); ++t)
                w.row({j + 1LL, static_cast<long long>(basis.propagating[basis.block_start[j] + s].pol()),
                       static_cast<long long>(basis.propagating[basis.block_start[j] + t].pol()),
                       M[j](s, t).real(), M[j](s, t).imag()});
}

nlohmann::json geometry_summary(const GeometryReport& r) {
    const double maxS = *std::max_element(r.mfp.S.begin(), r.mfp.S.end());
    nlohmann::json j;
    j["L1"] = r.basis.geometry.L1;
    j["L2"] = r.basis.geometry.L2;
    j["N"] = r.basis.n_propagating;
    j["records"] = r.basis.n_modes();
    j["n_ev_used"] = r.moments.n_ev_used;
    j["max_S"] = maxS;
    j["min_S"] = *std::min_element(r.mfp.S.begin(), r.mfp.S.end());
    j["mid_residual_max"] = *std::max_element(r.mid.begin(), r.mid.end());
    if (r.op.matrix.size()) {
        j["L_eq"] = r.spectrum.L_eq;
        j["ratio"] = r.spectrum.L_eq / maxS;
        j["lambda_gap"] = r.spectrum.lambda_gap;
        j["kernel_dim"] = r.spectrum.kernel_dim;
        j["max_imag_over_norm"] = r.spectrum.max_imag / r.op.norm;
        j["max_real_over_norm"] = r.spectrum.max_real / r.op.norm;
        j["offdiagonal_ratio"] = offdiagonal_ratio(r.spectrum.U_o);
    }
    return j;
}

}  // namespace

// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig cfg, std::string out_dir, bool no_assemble)
    : cfg_(std::move(cfg)), out_(std::move(out_dir)), no_assemble_(no_assemble) {
    cfg_.validate();
    fs::create_directories(out_);
}

std::string Pipeline::path(const std::string& name) const { return (fs::path(out_) / name).string(); }

GeometryReport& Pipeline::main_report(bool with_transport) {
    if (!report_ || (with_transport && report_->op.matrix.size() == 0)) {
        Stopwatch sw;
        report_ = std::make_unique<GeometryReport>(analyze_geometry(
            cfg_, cfg_.geometry, path("coupling_tensor.json"), no_assemble_, with_transport));
        timings_["analysis"] += sw.seconds();
    }
    return *report_;
}

nlohmann::json Pipeline::modes() {
    Stopwatch sw;
    const ModeBasis basis = build_basis(cfg_);
    write_mode_table(basis, path("modes.csv"));
    write_mode_records(basis, path("mode_records.csv"));
    timings_["modes"] = sw.seconds();
    return {{"N", basis.n_propagating}, {"records", basis.n_modes()}, {"ties", basis.has_ties}};
}

nlohmann::json Pipeline::moments() {
    GeometryReport& r = main_report(false);
    Stopwatch sw;
    std::vector<CMatrix> Q, C;
    for (const BlockMoments& b : r.moments.blocks) {
        Q.push_back(b.Q);
        C.push_back(b.C);
    }
    write_block_matrices(r.basis, Q, path("moments_Qj.csv"));
    write_block_matrices(r.basis, C, path("moments_Cj.csv"));
    {
        CsvWriter w(path("mean_free_paths.csv"),
                    {"j", "j1", "j2", "mu1", "mu2", "S_j", "inv_mu_max", "mid_residual"});
        for (int j = 0; j < r.basis.n_propagating; ++j) {
            const Eigen::VectorXd& mu = r.mfp.mu[j];
            const ModeRecord& m = r.basis.lead(j);
            w.row({j + 1LL, static_cast<long long>(m.j1), static_cast<long long>(m.j2), mu(0),
                   mu.size() > 1 ? CsvCell(mu(1)) : CsvCell(std::string()), r.mfp.S[j],
                   1.0 / mu(mu.size() - 1), r.mid[j]});
        }
    }
    const std::vector<cdouble> A0 = source_amplitudes(r.basis, cfg_.source);
    const double maxS = *std::max_element(r.mfp.S.begin(), r.mfp.S.end());
    const double Zmax = cfg_.amplitude_Z_max > 0 ? cfg_.amplitude_Z_max : 3 * maxS;
    const AmplitudeTrajectory amp = mean_amplitude_evolution(r.basis, Q, A0, linear_grid(Zmax, cfg_.amplitude_n_Z));
    {
        CsvWriter w(path("mean_amplitudes.csv"), {"Z", "j", "s", "Re", "Im", "abs"});
        for (std::size_t i = 0; i < amp.Z.size(); ++i)
            for (int a = 0; a < r.basis.n_modes(); ++a) {
                const ModeRecord& m = r.basis.propagating[a];
                w.row({amp.Z[i], m.block + 1LL, static_cast<long long>(m.pol()), amp.A[i](a).real(),
                       amp.A[i](a).imag(), std::abs(amp.A[i](a))});
            }
    }
    timings_["moments_output"] = sw.seconds();
    nlohmann::json j = geometry_summary(r);
    j["c_asymmetry_max"] = 0.0;
    for (const BlockMoments& b : r.moments.blocks)
        j["c_asymmetry_max"] = std::max(j["c_asymmetry_max"].get<double>(), b.c_asymmetry);
    return j;
}

nlohmann::json Pipeline::transport() {
    GeometryReport& r = main_report(true);
    Stopwatch sw;
    {
        CsvWriter w(path("transport_spectrum.csv"), {"index", "eigenvalue", "eigenvalue_im"});
        for (std::size_t i = 0; i < r.spectrum.eigenvalues.size(); ++i)
            w.row({static_cast<long long>(i), r.spectrum.eigenvalues[i].real(),
                   r.spectrum.eigenvalues[i].imag()});
    }
    const std::vector<CMatrix> P0 = source_powers(r.basis, source_amplitudes(r.basis, cfg_.source));
    const double Zmax = cfg_.transport_Z_max > 0 ? cfg_.transport_Z_max : 3 * r.spectrum.L_eq;
    const PowerTrajectory tr = integrate_power(r.op, P0, linear_grid(Zmax, cfg_.transport_n_Z));
    {
        CsvWriter w(path("power_trajectory.csv"), {"Z", "j", "s", "s_prime", "Re", "Im"});
        for (std::size_t i = 0; i < tr.Z.size(); ++i)
            for (int j = 0; j < r.basis.n_propagating; ++j) {
                const CMatrix& P = tr.states[i][j];
                for (int s = 0; s < P.rows(); ++s)
                    for (int t = 0; t < P.cols(); ++t)
                        w.row({tr.Z[i], j + 1LL,
                               static_cast<long long>(r.basis.propagating[r.basis.block_start[j] + s].pol()),
                               static_cast<long long>(r.basis.propagating[r.basis.block_start[j] + t].pol()),
                               P(s, t).real(), P(s, t).imag()});
            }
    }
    {
        CsvWriter w(path("depolarization.csv"), {"Z", "j", "P11", "P22", "metric"});
        for (const DepolarizationRow& d : depolarization_report(tr))
            w.row({d.Z, d.j + 1LL, d.P11, d.P22, d.metric});
    }
    timings_["transport_output"] = sw.seconds();
    nlohmann::json j = geometry_summary(r);
    j["trace_drift"] = tr.max_trace_drift;
    j["min_block_eig"] = tr.min_block_eig;
    j["Z_max"] = Zmax;
    return j;
}

nlohmann::json Pipeline::equipartition() {
    GeometryReport& r = main_report(true);
    write_block_matrices(r.basis, r.spectrum.U_o, path("equipartition.csv"));
    nlohmann::json j = geometry_summary(r);
    j["clipped"] = r.spectrum.clipped;
    return j;
}

nlohmann::json Pipeline::montecarlo() {
    Stopwatch sw;
    const MonteCarloSettings& ms = cfg_.montecarlo;
    MonteCarloRun run = run_monte_carlo_study(cfg_, ms.epsilon, ms.realizations,
                                              path("coupling_tensor_mc.json"), no_assemble_);
    const ModeBasis& b = run.basis;
    std::vector<double> Zs;
    for (const MCCheckpoint& cp : run.result.checkpoints) Zs.push_back(cp.Z);
    std::vector<cdouble> A0(b.n_modes(), cdouble(1.0 / std::sqrt(static_cast<double>(b.n_modes()))));
    const AmplitudeTrajectory pred = mean_amplitude_evolution(b, run.Q_forward, A0, Zs);
    {
        CsvWriter w(path("mc_mean_amplitudes.csv"),
                    {"Z", "record", "j", "s", "re", "im", "se_re", "se_im", "pred_re", "pred_im"});
        for (std::size_t c = 0; c < Zs.size(); ++c) {
            const MCCheckpoint& cp = run.result.checkpoints[c];
            for (int a = 0; a < b.n_modes(); ++a)
                w.row({cp.Z, static_cast<long long>(a), b.propagating[a].block + 1LL,
                       static_cast<long long>(b.propagating[a].pol()), cp.mean_A(a).real(),
                       cp.mean_A(a).imag(), cp.se_re(a), cp.se_im(a), pred.A[c](a).real(),
                       pred.A[c](a).imag()});
        }
    }
    {
        CsvWriter w(path("mc_powers.csv"), {"Z", "j", "s", "s_prime", "Re", "Im", "se_re", "se_im"});
        for (const MCCheckpoint& cp : run.result.checkpoints)
            for (int j = 0; j < b.n_propagating; ++j)
                for (int s = 0; s < cp.P[j].rows(); ++s)
                    for (int t = 0; t < cp.P[j].cols(); ++t)
                        w.row({cp.Z, j + 1LL, static_cast<long long>(b.propagating[b.block_start[j] + s].pol()),
                               static_cast<long long>(b.propagating[b.block_start[j] + t].pol()), cp.P[j](s, t).real(), cp.P[j](s, t).imag(),
                               cp.P_se_re[j](s, t), cp.P_se_im[j](s, t)});
    }
    {
        CsvWriter w(path("mc_comparison.csv"),
                    {"Z", "quantity", "j", "s", "s_prime", "empirical", "predicted", "se", "z"});
        for (const ComparisonRow& r : run.report.rows) {
            // amplitude rows index records, power rows index blocks
            const bool amp = r.what[0] == 'a';
            const ModeRecord& m0 = b.propagating[amp ? r.record : b.block_start[r.record] + r.s];
            const ModeRecord& m1 = b.propagating[amp ? r.record : b.block_start[r.record] + r.t];
            w.row({r.Z, std::string(r.what), m0.block + 1LL, static_cast<long long>(m0.pol()),
                   static_cast<long long>(m1.pol()), r.empirical, r.predicted, r.se, r.zscore});
        }
    }
    nlohmann::json j;
    j["L1"] = b.geometry.L1;
    j["L2"] = b.geometry.L2;
    j["N"] = b.n_propagating;
    j["records"] = b.n_modes();
    j["epsilon"] = ms.epsilon;
    j["sigma2"] = ms.sigma2;
    j["realizations"] = ms.realizations;
    j["seed"] = ms.seed;
    j["scalar_processes"] = run.result.n_scalar;
    j["threshold"] = run.report.threshold;
    j["max_abs_z"] = run.report.max_abs_z;
    j["pass"] = run.report.pass;
    j["amp_discrepancy"] = run.report.amp_discrepancy;
    j["power_discrepancy"] = run.report.power_discrepancy;
    j["max_drift"] = run.result.max_drift;
    j["mean_drift"] = run.result.mean_drift;
    j["standardized_bias"] = run.report.standardized_bias;
    if (!ms.epsilon_sweep.empty()) {
        CsvWriter w(path("mc_sweep.csv"), {"epsilon", "realizations", "standardized_bias", "amp_discrepancy",
                                          "amp_noise", "power_discrepancy", "power_noise", "max_abs_z",
                                          "threshold", "mean_drift"});
        auto add = [&](double e, int R, const MonteCarloRun& r) {
            w.row({e, static_cast<long long>(R), r.report.standardized_bias, r.report.amp_discrepancy,
                   r.report.amp_noise, r.report.power_discrepancy, r.report.power_noise,
                   r.report.max_abs_z, r.report.threshold, r.result.mean_drift});
            return nlohmann::json{{"epsilon", e},
                                  {"realizations", R},
                                  {"standardized_bias", r.report.standardized_bias},
                                  {"power_discrepancy", r.report.power_discrepancy},
                                  {"amp_discrepancy", r.report.amp_discrepancy}};
        };
        nlohmann::json sweep = nlohmann::json::array();
        sweep.push_back(add(ms.epsilon, ms.realizations, run));
        for (double e : ms.epsilon_sweep) {
            MonteCarloRun sr = run_monte_carlo_study(cfg_, e, ms.sweep_realizations,
                                                     path("coupling_tensor_mc.json"), no_assemble_);
            sweep.push_back(add(e, ms.sweep_realizations, sr));
        }
        j["sweep"] = sweep;
    }
    timings_["montecarlo"] = sw.seconds();
    return j;
}

nlohmann::json Pipeline::reproduce_figures() {
    nlohmann::json out;
    const Geometry geoms[2] = {{3.03, 5.84, cfg_.geometry.k}, {4.08, 5.77, cfg_.geometry.k}};
    for (int g = 0; g < 2; ++g) {
        Stopwatch sw;
        const std::string tag = "geom" + std::to_string(g + 1);
        GeometryReport r = analyze_geometry(cfg_, geoms[g], path("coupling_tensor_" + tag + ".json"),
                                            no_assemble_, true);
        write_coherent(r, path("coherent_" + tag + ".csv"));
        write_stationary(r, path("stationary_" + tag + ".csv"));
        out[tag] = geometry_summary(r);
        timings_[tag] = sw.seconds();
    }
    return out;
}

void Pipeline::write_summary(const std::string& command, const nlohmann::json& result,
                             const std::string& error) const {
    nlohmann::json s;
    const std::string resolved = dump_config(cfg_);
    s["command"] = command;
    s["version"] = kVersion;
    s["config_hash"] = content_hash(resolved);
    s["config"] = resolved;
    s["threads"] = num_threads();
    s["result"] = result;
    s["timings_s"] = timings_;
    s["status"] = error.empty() ? "ok" : "error";
    if (!error.empty()) s["error"] = error;
    std::ofstream os(path("summary.json"));
    os << s.dump(2) << '\n';
}

}  // namespace rwg
