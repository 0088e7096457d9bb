#include "rwg/config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace rwg {

namespace {

void fail(const std::string& field, const std::string& what) {
    throw ConfigError(field + ": " + what);
}

template <class T>
T get(const YAML::Node& n, const std::string& field, T fallback) {
    if (!n) return fallback;
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        fail(field, "cannot parse value '" + YAML::Dump(n) + "'");
    }
    return fallback;
}

std::vector<double> get_list(const YAML::Node& n, const std::string& field) {
    std::vector<double> v;
    if (!n) return v;
    if (!n.IsSequence()) fail(field, "expected a list of numbers");
    for (std::size_t i = 0; i < n.size(); ++i)
        v.push_back(get<double>(n[i], field + "[" + std::to_string(i) + "]", 0.0));
    return v;
}

// Rejects keys that are not part of the schema, so typos do not pass silently.
void check_keys(const YAML::Node& n, const std::string& section, std::set<std::string> allowed) {
    if (!n) return;
    if (!n.IsMap()) fail(section, "expected a mapping");
    for (const auto& kv : n) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) fail(section.empty() ? key : section + "." + key, "unknown key");
    }
}

}  // namespace

void RunConfig::validate() const {
    if (!(geometry.L1 > 0) || !std::isfinite(geometry.L1)) fail("geometry.L1", "must be positive");
    if (!(geometry.L2 > 0) || !std::isfinite(geometry.L2)) fail("geometry.L2", "must be positive");
    if (!(geometry.k > 0) || !std::isfinite(geometry.k)) fail("geometry.k", "must be positive");
    if (!(covariance.ell > 0)) fail("covariance.ell", "must be positive");
    if (!(covariance.sigma2 >= 0)) fail("covariance.sigma2", "must be non-negative");
    if (quadrature.order1 < 0) fail("quadrature.order1", "must be >= 0 (0 = automatic)");
    if (quadrature.order2 < 0) fail("quadrature.order2", "must be >= 0 (0 = automatic)");
    if (!(quadrature.refine_tol > 0)) fail("quadrature.tolerance", "must be positive");
    if (moments.n_ev < -1) fail("evanescent.n_ev", "must be 'auto' or >= 0");
    if (moments.n_ev > n_evanescent_listed)
        fail("evanescent.n_ev", "exceeds evanescent.listed (" + std::to_string(n_evanescent_listed) + ")");
    if (moments.n_ev_max > n_evanescent_listed)
        fail("evanescent.n_ev_max", "exceeds evanescent.listed");
    if (moments.n_ev_start < 1) fail("evanescent.n_ev_start", "must be >= 1");
    if (!(moments.n_ev_tol > 0)) fail("evanescent.tolerance", "must be positive");
    if (source.j < 1) fail("source.j", "must be >= 1");
    if (source.s != 1 && source.s != 2) fail("source.s", "must be 1 (TE) or 2 (TM)");
    if (source.kind == SourceKind::file && source.path.empty()) fail("source.path", "required for kind 'file'");
    if (amplitude_Z_max < 0) fail("moments.Z_max", "must be >= 0");
    if (amplitude_n_Z < 2) fail("moments.n_Z", "must be >= 2");
    if (transport_Z_max < 0) fail("transport.Z_max", "must be >= 0");
    if (transport_n_Z < 2) fail("transport.n_Z", "must be >= 2");
    const MonteCarloSettings& m = montecarlo;
    if (!(m.L1 > 0)) fail("montecarlo.L1", "must be positive");
    if (!(m.L2 > 0)) fail("montecarlo.L2", "must be positive");
    if (!(m.epsilon > 0 && m.epsilon < 1)) fail("montecarlo.epsilon", "must be in (0, 1)");
    for (double e : m.epsilon_sweep)
        if (!(e > 0 && e < 1)) fail("montecarlo.epsilon_sweep", "values must be in (0, 1)");
    if (!(m.sigma2 >= 0)) fail("montecarlo.sigma2", "must be non-negative");
    if (m.realizations < 2) fail("montecarlo.realizations", "must be >= 2");
    if (m.sweep_realizations < 2) fail("montecarlo.sweep_realizations", "must be >= 2");
    if (!(m.dz > 0)) fail("montecarlo.dz", "must be positive");
    for (double z : m.checkpoints)
        if (!(z >= 0)) fail("montecarlo.checkpoints", "values must be >= 0");
    if (m.source_j < 1) fail("montecarlo.source_j", "must be >= 1");
    if (m.source_s != 1 && m.source_s != 2) fail("montecarlo.source_s", "must be 1 (TE) or 2 (TM)");
    if (threads < 0) fail("threads", "must be >= 0");
}

RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config: YAML parse error: ") + e.what());
    }
    RunConfig c;
    if (!root || root.IsNull()) {
        c.validate();
        return c;
    }
    check_keys(root, "", {"geometry", "covariance", "quadrature", "evanescent", "moments", "source",
                          "transport", "montecarlo", "output", "threads"});

    const YAML::Node g = root["geometry"];
    check_keys(g, "geometry", {"L1", "L2", "k", "wavelength"});
    c.geometry.L1 = get(g["L1"], "geometry.L1", c.geometry.L1);
    c.geometry.L2 = get(g["L2"], "geometry.L2", c.geometry.L2);
    if (g && g["wavelength"]) {
        const double lam = get(g["wavelength"], "geometry.wavelength", 1.0);
        if (!(lam > 0)) fail("geometry.wavelength", "must be positive");
        c.geometry.k = 2 * kPi / lam;
    }
    c.geometry.k = get(g["k"], "geometry.k", c.geometry.k);

    const YAML::Node cv = root["covariance"];
    check_keys(cv, "covariance", {"kind", "ell", "sigma2"});
    const std::string kind = get<std::string>(cv["kind"], "covariance.kind", "gaussian-isotropic");
    if (kind == "custom-separable")
        fail("covariance.kind", "custom-separable kernels are only available through the library API");
    if (kind != "gaussian-isotropic" && kind != "gaussian")
        fail("covariance.kind", "unknown kind '" + kind + "' (expected gaussian-isotropic)");
    c.covariance.ell = get(cv["ell"], "covariance.ell", c.covariance.ell);
    c.covariance.sigma2 = get(cv["sigma2"], "covariance.sigma2", c.covariance.sigma2);

    const YAML::Node q = root["quadrature"];
    check_keys(q, "quadrature", {"order1", "order2", "tolerance", "max_order"});
    c.quadrature.order1 = get(q["order1"], "quadrature.order1", c.quadrature.order1);
    c.quadrature.order2 = get(q["order2"], "quadrature.order2", c.quadrature.order2);
    c.quadrature.refine_tol = get(q["tolerance"], "quadrature.tolerance", c.quadrature.refine_tol);
    c.quadrature.max_order = get(q["max_order"], "quadrature.max_order", c.quadrature.max_order);

    const YAML::Node ev = root["evanescent"];
    check_keys(ev, "evanescent", {"enabled", "n_ev", "n_ev_start", "n_ev_max", "tolerance", "listed"});
    c.moments.evanescent = get(ev["enabled"], "evanescent.enabled", c.moments.evanescent);
    if (ev && ev["n_ev"]) {
        const std::string v = get<std::string>(ev["n_ev"], "evanescent.n_ev", "auto");
        if (v == "auto")
            c.moments.n_ev = -1;
        else
            c.moments.n_ev = get<int>(ev["n_ev"], "evanescent.n_ev", -1);
    }
    c.moments.n_ev_start = get(ev["n_ev_start"], "evanescent.n_ev_start", c.moments.n_ev_start);
    c.moments.n_ev_max = get(ev["n_ev_max"], "evanescent.n_ev_max", c.moments.n_ev_max);
    c.moments.n_ev_tol = get(ev["tolerance"], "evanescent.tolerance", c.moments.n_ev_tol);
    c.n_evanescent_listed = get(ev["listed"], "evanescent.listed", c.n_evanescent_listed);

    const YAML::Node mo = root["moments"];
    check_keys(mo, "moments", {"backward_reactive", "printed_theta_normalization", "Z_max", "n_Z"});
    c.moments.backward_reactive = get(mo["backward_reactive"], "moments.backward_reactive",
                                      c.moments.backward_reactive);
    c.moments.printed_theta_normalization =
        get(mo["printed_theta_normalization"], "moments.printed_theta_normalization",
            c.moments.printed_theta_normalization);
    c.amplitude_Z_max = get(mo["Z_max"], "moments.Z_max", c.amplitude_Z_max);
    c.amplitude_n_Z = get(mo["n_Z"], "moments.n_Z", c.amplitude_n_Z);

    const YAML::Node s = root["source"];
    check_keys(s, "source", {"kind", "j", "s", "path"});
    const std::string sk = get<std::string>(s["kind"], "source.kind", "single-mode");
    if (sk == "single-mode")
        c.source.kind = SourceKind::single_mode;
    else if (sk == "uniform")
        c.source.kind = SourceKind::uniform;
    else if (sk == "file")
        c.source.kind = SourceKind::file;
    else
        fail("source.kind", "unknown preset '" + sk + "' (single-mode, uniform, file)");
    c.source.j = get(s["j"], "source.j", c.source.j);
    c.source.s = get(s["s"], "source.s", c.source.s);
    c.source.path = get<std::string>(s["path"], "source.path", "");

    const YAML::Node t = root["transport"];
    check_keys(t, "transport", {"Z_max", "n_Z"});
    c.transport_Z_max = get(t["Z_max"], "transport.Z_max", c.transport_Z_max);
    c.transport_n_Z = get(t["n_Z"], "transport.n_Z", c.transport_n_Z);

    const YAML::Node m = root["montecarlo"];
    check_keys(m, "montecarlo", {"L1", "L2", "use_main_geometry", "epsilon", "sigma2", "realizations",
                                 "seed", "dz", "checkpoints", "source_j", "source_s", "epsilon_sweep",
                                 "sweep_realizations"});
    MonteCarloSettings& ms = c.montecarlo;
    ms.own_geometry = !get(m["use_main_geometry"], "montecarlo.use_main_geometry", false);
    ms.L1 = get(m["L1"], "montecarlo.L1", ms.L1);
    ms.L2 = get(m["L2"], "montecarlo.L2", ms.L2);
    ms.epsilon = get(m["epsilon"], "montecarlo.epsilon", ms.epsilon);
    ms.sigma2 = get(m["sigma2"], "montecarlo.sigma2", ms.sigma2);
    ms.realizations = get(m["realizations"], "montecarlo.realizations", ms.realizations);
    ms.seed = get<std::uint64_t>(m["seed"], "montecarlo.seed", ms.seed);
    ms.dz = get(m["dz"], "montecarlo.dz", ms.dz);
    if (m) ms.checkpoints = get_list(m["checkpoints"], "montecarlo.checkpoints");
    ms.source_j = get(m["source_j"], "montecarlo.source_j", ms.source_j);
    ms.source_s = get(m["source_s"], "montecarlo.source_s", ms.source_s);
    if (m) ms.epsilon_sweep = get_list(m["epsilon_sweep"], "montecarlo.epsilon_sweep");
    ms.sweep_realizations = get(m["sweep_realizations"], "montecarlo.sweep_realizations",
                                ms.sweep_realizations);

    const YAML::Node o = root["output"];
    check_keys(o, "output", {"dir"});
    c.output_dir = get<std::string>(o ? o["dir"] : YAML::Node(), "output.dir", c.output_dir);
    c.threads = get(root["threads"], "threads", c.threads);

    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
    YAML::Emitter e;
    e.SetDoublePrecision(17);
    e << YAML::BeginMap;
    e << YAML::Key << "geometry" << YAML::Value << YAML::BeginMap << YAML::Key << "L1" << YAML::Value
      << c.geometry.L1 << YAML::Key << "L2" << YAML::Value << c.geometry.L2 << YAML::Key << "k"
      << YAML::Value << c.geometry.k << YAML::EndMap;
    e << YAML::Key << "covariance" << YAML::Value << YAML::BeginMap << YAML::Key << "kind"
      << YAML::Value << "gaussian-isotropic" << YAML::Key << "ell" << YAML::Value << c.covariance.ell
      << YAML::Key << "sigma2" << YAML::Value << c.covariance.sigma2 << YAML::EndMap;
    e << YAML::Key << "quadrature" << YAML::Value << YAML::BeginMap << YAML::Key << "order1"
      << YAML::Value << c.quadrature.order1 << YAML::Key << "order2" << YAML::Value
      << c.quadrature.order2 << YAML::Key << "tolerance" << YAML::Value << c.quadrature.refine_tol
      << YAML::Key << "max_order" << YAML::Value << c.quadrature.max_order << YAML::EndMap;
    e << YAML::Key << "evanescent" << YAML::Value << YAML::BeginMap << YAML::Key << "enabled"
      << YAML::Value << c.moments.evanescent << YAML::Key << "n_ev" << YAML::Value;
    if (c.moments.n_ev < 0)
        e << "auto";
    else
        e << c.moments.n_ev;
    e << YAML::Key << "n_ev_start" << YAML::Value << c.moments.n_ev_start << YAML::Key << "n_ev_max"
      << YAML::Value << c.moments.n_ev_max << YAML::Key << "tolerance" << YAML::Value
      << c.moments.n_ev_tol << YAML::Key << "listed" << YAML::Value << c.n_evanescent_listed
      << YAML::EndMap;
    e << YAML::Key << "moments" << YAML::Value << YAML::BeginMap << YAML::Key << "backward_reactive"
      << YAML::Value << c.moments.backward_reactive << YAML::Key << "printed_theta_normalization"
      << YAML::Value << c.moments.printed_theta_normalization << YAML::Key << "Z_max" << YAML::Value
      << c.amplitude_Z_max << YAML::Key << "n_Z" << YAML::Value << c.amplitude_n_Z << YAML::EndMap;
    const char* sk = c.source.kind == SourceKind::single_mode ? "single-mode"
                     : c.source.kind == SourceKind::uniform   ? "uniform"
                                                               : "file";
    e << YAML::Key << "source" << YAML::Value << YAML::BeginMap << YAML::Key << "kind" << YAML::Value
      << sk << YAML::Key << "j" << YAML::Value << c.source.j << YAML::Key << "s" << YAML::Value
      << c.source.s << YAML::Key << "path" << YAML::Value << c.source.path << YAML::EndMap;
    e << YAML::Key << "transport" << YAML::Value << YAML::BeginMap << YAML::Key << "Z_max"
      << YAML::Value << c.transport_Z_max << YAML::Key << "n_Z" << YAML::Value << c.transport_n_Z
      << YAML::EndMap;
    const MonteCarloSettings& m = c.montecarlo;
    e << YAML::Key << "montecarlo" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "use_main_geometry" << YAML::Value << !m.own_geometry;
    e << YAML::Key << "L1" << YAML::Value << m.L1 << YAML::Key << "L2" << YAML::Value << m.L2;
    e << YAML::Key << "epsilon" << YAML::Value << m.epsilon << YAML::Key << "sigma2" << YAML::Value
      << m.sigma2;
    e << YAML::Key << "realizations" << YAML::Value << m.realizations << YAML::Key << "seed"
      << YAML::Value << m.seed << YAML::Key << "dz" << YAML::Value << m.dz;
    e << YAML::Key << "checkpoints" << YAML::Value << YAML::Flow << m.checkpoints;
    e << YAML::Key << "source_j" << YAML::Value << m.source_j;
    e << YAML::Key << "source_s" << YAML::Value << m.source_s;
    e << YAML::Key << "epsilon_sweep" << YAML::Value << YAML::Flow << m.epsilon_sweep;
    e << YAML::Key << "sweep_realizations" << YAML::Value << m.sweep_realizations;
    e << YAML::EndMap;
    e << YAML::Key << "output" << YAML::Value << YAML::BeginMap << YAML::Key << "dir" << YAML::Value
      << c.output_dir << YAML::EndMap;
    e << YAML::Key << "threads" << YAML::Value << c.threads;
    e << YAML::EndMap;
    return e.c_str();
}

}  // namespace rwg
