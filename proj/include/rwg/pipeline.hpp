// pipeline.hpp - orchestration shared by the command line tool and the Python module
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rwg/config.hpp"
#include "rwg/montecarlo.hpp"
#include "rwg/transport.hpp"

namespace rwg {

inline constexpr const char* kVersion = "1.0.0";

ModeBasis build_basis(const RunConfig& cfg);
ModeBasis build_basis(const Geometry& g, int n_evanescent_listed);

// Number of evanescent pairs the tensor must cover for these options.
int tensor_ev_count(const MomentOptions& opt, int listed);

// Loads the tensor cached at cache_path when it matches the basis, model and
// coverage; otherwise assembles it (and writes the cache), unless no_assemble.
CouplingTensor obtain_tensor(const ModeBasis& basis, const CovarianceModel& model,
                             const TensorQuadrature& quad, int n_ev, const std::string& cache_path,
                             bool no_assemble, bool* from_cache = nullptr);

// Initial amplitudes over the flattened propagating records.
std::vector<cdouble> source_amplitudes(const ModeBasis& basis, const SourceChoice& src);
// Block powers of a source (diagonal blocks of A A*).
std::vector<CMatrix> source_powers(const ModeBasis& basis, const std::vector<cdouble>& A);

std::vector<double> linear_grid(double hi, int n);

// Off-diagonal / diagonal Frobenius mass of U_o over the flattened records.
double offdiagonal_ratio(const std::vector<CMatrix>& U);

struct GeometryReport {
    ModeBasis basis;
    CouplingTensor tensor;
    ModeMoments moments;
    MeanFreePaths mfp;
    std::vector<double> mid;
    TransportOperator op;
    SpectralResult spectrum;
};

GeometryReport analyze_geometry(const RunConfig& cfg, const Geometry& g,
                                const std::string& cache_path, bool no_assemble,
                                bool with_transport = true);

struct MonteCarloRun {
    ModeBasis basis;
    CovarianceModel model;
    CouplingTensor tensor;
    ModeMoments moments;
    std::vector<CMatrix> Q_forward;
    TransportOperator op;
    MCResult result;
    ComparisonReport report;
};

MonteCarloRun run_monte_carlo_study(const RunConfig& cfg, double epsilon, int realizations,
                                    const std::string& cache_path, bool no_assemble);

// Subcommands. Each writes its artifacts into out_dir and returns the
// subcommand section of summary.json.
class Pipeline {
public:
    Pipeline(RunConfig cfg, std::string out_dir, bool no_assemble);

    nlohmann::json modes();
    nlohmann::json moments();
    nlohmann::json transport();
    nlohmann::json equipartition();
    nlohmann::json montecarlo();
    nlohmann::json reproduce_figures();

    // summary.json with provenance, the resolved config and timings
    void write_summary(const std::string& command, const nlohmann::json& result,
                       const std::string& error = "") const;
    const std::map<std::string, double>& timings() const { return timings_; }

private:
    std::string path(const std::string& name) const;
    GeometryReport& main_report(bool with_transport);

    RunConfig cfg_;
    std::string out_;
    bool no_assemble_;
    std::map<std::string, double> timings_;
    std::unique_ptr<GeometryReport> report_;
};

// one row per wavenumber index j
void write_mode_table(const ModeBasis& basis, const std::string& path);
// one row per (j1, j2, s) record, propagating then evanescent
void write_mode_records(const ModeBasis& basis, const std::string& path);
void write_coherent(const GeometryReport& r, const std::string& path);
void write_stationary(const GeometryReport& r, const std::string& path);

}  // namespace rwg
