// modes.hpp - TE/TM vector eigenmodes of the ideal rectangular waveguide
#pragma once

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

#include "rwg/quadrature.hpp"

namespace rwg {

using cdouble = std::complex<double>;
constexpr double kPi = 3.14159265358979323846;

// Lengths in units of the wavelength; k = 2*pi for unit wavelength.
struct Geometry {
    double L1 = 1.0;
    double L2 = 1.0;
    double k = 2.0 * kPi;

    void validate() const;
    std::string describe() const;
};

enum class Polarization { TE = 1, TM = 2 };
enum class ModeKind { propagating, evanescent };

struct ModeRecord {
    int j1 = 0;
    int j2 = 0;
    Polarization s = Polarization::TE;
    double lambda = 0.0;
    double beta = 0.0;
    ModeKind kind = ModeKind::propagating;
    double alpha = 0.0;
    int multiplicity = 1;
    int block = 0;  // wavenumber index within its list (0-based)

    double kx = 0.0;  // pi j1 / L1
    double ky = 0.0;  // pi j2 / L2

    bool te() const { return s == Polarization::TE; }
    bool tm() const { return s == Polarization::TM; }
    int pol() const { return static_cast<int>(s); }
    // amplitudes of the two trig products in phi = (A1 cos sin, A2 sin cos)
    double amp1() const { return te() ? alpha * ky : alpha * kx; }
    double amp2() const { return te() ? -alpha * kx : alpha * ky; }
    // divergence = div_amp() * sin(kx x1) sin(ky x2); zero for TE
    double div_amp() const { return te() ? 0.0 : -alpha * lambda; }
};

// Modes are stored flattened (one record per (j, s)). Records sharing a
// wavenumber index j are contiguous and form a block of size multiplicity.
struct ModeBasis {
    Geometry geometry;
    std::vector<ModeRecord> propagating;
    std::vector<ModeRecord> evanescent;
    int n_propagating = 0;  // N: number of (j1, j2) pairs with lambda < k^2
    int n_evanescent = 0;   // number of evanescent (j1, j2) pairs listed
    std::vector<int> block_start;     // into propagating, size N + 1
    std::vector<int> ev_block_start;  // into evanescent

    int block_size(int j) const { return block_start[j + 1] - block_start[j]; }
    const ModeRecord& lead(int j) const { return propagating[block_start[j]]; }
    int n_modes() const { return static_cast<int>(propagating.size()); }
    bool has_ties = false;
};

ModeBasis enumerate_modes(const Geometry& geometry, int n_evanescent);

std::array<double, 2> eval_mode(const ModeRecord& m, double x1, double x2);
double mode_divergence(const ModeRecord& m, double x1, double x2);
double mode_curl(const ModeRecord& m, double x1, double x2);  // d1 phi2 - d2 phi1
std::array<double, 2> mode_grad_divergence(const ModeRecord& m, double x1, double x2);

struct QuadratureGrid {
    GaussRule r1;
    GaussRule r2;
};

QuadratureGrid make_quadrature_grid(const Geometry& g, int n1, int n2);
// order 4 * max index + 8 per axis, as used for basis checks
QuadratureGrid default_quadrature_grid(const ModeBasis& basis);

double mode_inner_product(const ModeRecord& a, const ModeRecord& b, const QuadratureGrid& quad);

// --------------------------------------------------------------------------
// Sources
// --------------------------------------------------------------------------

using VecField = std::function<std::array<double, 2>(double, double)>;
using ScalarField = std::function<double(double, double)>;

struct SourceSpec {
    VecField J;          // transverse current, may be empty (zero)
    ScalarField Jz;      // longitudinal current, may be empty (zero)
    VecField grad_Jz;    // optional; central differences of Jz otherwise
    double c_o = 1.0;
};

// Uniform samples on [0,L1]x[0,L2] (n1 x n2 nodes, row major in x1) evaluated
// by bilinear interpolation.
ScalarField grid_sampler(const Geometry& g, int n1, int n2, std::vector<double> values);

struct SourceAmplitudes {
    std::vector<cdouble> A_o;  // forward amplitudes at z = 0+, per propagating record
    std::vector<cdouble> B_o;  // backward amplitudes at z = 0-, per propagating record
    std::vector<cdouble> E_o;  // evanescent amplitudes on the z > 0 side, per evanescent record
};

SourceAmplitudes project_source(const ModeBasis& basis, const SourceSpec& src,
                                const QuadratureGrid& quad);

double ideal_flux(const SourceAmplitudes& amps);

}  // namespace rwg
