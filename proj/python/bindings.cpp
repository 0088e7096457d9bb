#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rwg/config.hpp"
#include "rwg/pipeline.hpp"

namespace py = pybind11;
using namespace rwg;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

RunConfig config_from(const std::string& path, const std::string& yaml) {
    if (!path.empty()) return load_config(path);
    return parse_config(yaml);
}

py::dict mode_table(const ModeBasis& b) {
    const int n = b.n_modes();
    py::array_t<int> j(n), j1(n), j2(n), s(n);
    py::array_t<double> lambda(n), beta(n), alpha(n);
    for (int i = 0; i < n; ++i) {
        const ModeRecord& m = b.propagating[i];
        j.mutable_at(i) = m.block + 1;
        j1.mutable_at(i) = m.j1;
        j2.mutable_at(i) = m.j2;
        s.mutable_at(i) = m.pol();
        lambda.mutable_at(i) = m.lambda;
        beta.mutable_at(i) = m.beta;
        alpha.mutable_at(i) = m.alpha;
    }
    py::dict d;
    d["N"] = b.n_propagating;
    d["j"] = j;
    d["j1"] = j1;
    d["j2"] = j2;
    d["s"] = s;
    d["lambda"] = lambda;
    d["beta"] = beta;
    d["alpha"] = alpha;
    return d;
}

}  // namespace

PYBIND11_MODULE(_rwg, m) {
    m.doc() = "Random waveguide mode coupling: moments, transport and Monte Carlo";
    m.attr("__version__") = kVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("modes", [](double L1, double L2, double wavelength) {
        return mode_table(enumerate_modes(Geometry{L1, L2, 2 * kPi / wavelength}, 0));
    }, py::arg("L1"), py::arg("L2"), py::arg("wavelength") = 1.0,
       "Propagating mode records of an L1 x L2 cross-section (1-based j, s = 1 TE / 2 TM).");

    m.def("analyze", [](double L1, double L2, const std::string& config, const std::string& yaml) {
        const RunConfig cfg = config_from(config, yaml);
        GeometryReport r;
        {
            py::gil_scoped_release release;
            r = analyze_geometry(cfg, Geometry{L1, L2, cfg.geometry.k}, "", false, true);
        }
        py::dict d = mode_table(r.basis);
        d["S"] = r.mfp.S;
        d["mid_residual"] = r.mid;
        d["L_eq"] = r.spectrum.L_eq;
        d["lambda_gap"] = r.spectrum.lambda_gap;
        d["eigenvalues"] = r.spectrum.eigenvalues;
        d["offdiagonal_ratio"] = offdiagonal_ratio(r.spectrum.U_o);
        std::vector<double> diag;
        for (const CMatrix& B : r.spectrum.U_o)
            for (int i = 0; i < B.rows(); ++i) diag.push_back(B(i, i).real());
        d["U_o_diagonal"] = diag;
        return d;
    }, py::arg("L1"), py::arg("L2"), py::kw_only(), py::arg("config") = "", py::arg("yaml") = "",
       "Coupling, moments and transport spectrum for one geometry.");

    m.def("run", [](const std::string& command, const std::string& out_dir, const std::string& config,
                    const std::string& yaml, bool no_assemble) {
        RunConfig cfg = config_from(config, yaml);
        nlohmann::json result;
        {
            py::gil_scoped_release release;
            Pipeline p(cfg, out_dir, no_assemble);
            if (command == "modes") result = p.modes();
            else if (command == "moments") result = p.moments();
            else if (command == "transport") result = p.transport();
            else if (command == "equipartition") result = p.equipartition();
            else if (command == "montecarlo") result = p.montecarlo();
            else if (command == "reproduce-figures") result = p.reproduce_figures();
            else throw std::invalid_argument("unknown command: " + command);
            p.write_summary(command, result);
        }
        return to_python(result);
    }, py::arg("command"), py::arg("out_dir"), py::kw_only(), py::arg("config") = "", py::arg("yaml") = "",
       py::arg("no_assemble") = false,
       "Run a subcommand as the command line tool does and return its summary section.");

    m.def("resolved_config", [](const std::string& config, const std::string& yaml) {
        return dump_config(config_from(config, yaml));
    }, py::kw_only(), py::arg("config") = "", py::arg("yaml") = "");
}
