// config.hpp - run configuration loaded from YAML
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rwg/coupling.hpp"
#include "rwg/medium.hpp"
#include "rwg/modes.hpp"
#include "rwg/moments.hpp"

namespace rwg {

// Invalid configuration; the message names the offending field.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class SourceKind { single_mode, uniform, file };

struct SourceChoice {
    SourceKind kind = SourceKind::single_mode;
    int j = 1;      // wavenumber index, 1-based as in the mode tables
    int s = 1;      // 1 = TE, 2 = TM
    std::string path;  // CSV with columns j,s,re,im
};

struct MonteCarloSettings {
    bool own_geometry = true;  // use L1/L2 below instead of the main geometry
    double L1 = 1.3;
    double L2 = 2.1;
    double epsilon = 0.05;
    double sigma2 = 0.01;  // variance used for the ensemble (see README)
    int realizations = 10000;
    std::uint64_t seed = 20240917;
    double dz = 0.1;
    std::vector<double> checkpoints;  // empty: fractions of min S
    int source_j = 1;  // single-mode start of the power test (1-based j, s)
    int source_s = 1;
    std::vector<double> epsilon_sweep;  // optional: extra runs for the convergence check
    int sweep_realizations = 2000;
};

struct RunConfig {
    Geometry geometry{3.03, 5.84, 2.0 * kPi};
    CovarianceModel covariance = CovarianceModel::gaussian(1.0, 1.0);
    TensorQuadrature quadrature;
    MomentOptions moments;
    SourceChoice source;
    int n_evanescent_listed = 1024;  // evanescent pairs enumerated (upper bound for n_ev)

    double amplitude_Z_max = 0.0;  // 0: 3 max_j S_j
    int amplitude_n_Z = 61;
    double transport_Z_max = 0.0;  // 0: 3 L_eq
    int transport_n_Z = 61;

    MonteCarloSettings montecarlo;
    std::string output_dir = "out";
    int threads = 0;  // 0: hardware concurrency

    void validate() const;
};

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& yaml_text);
// Fully resolved configuration as YAML (embedded in summary.json).
std::string dump_config(const RunConfig& cfg);

}  // namespace rwg
