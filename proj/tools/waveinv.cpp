// waveinv command-line entry point: solve, linearize, probe, ray, sweep, validate.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "waveinv/errors.hpp"
#include "waveinv/parallel.hpp"
#include "waveinv/pipeline.hpp"

using namespace waveinv;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string verb, config, out = "out";
    std::vector<std::string> overrides;
    int threads = 0;
    bool json_out = false;
    double cfl = 0;
};

void write_json(const json& j, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw config_error("OutputUnwritable", "cannot write " + path);
    os << j.dump(2) << "\n";
}

ExperimentConfig load(const Options& o) {
    auto ov = o.overrides;
    if (o.cfl > 0) ov.push_back("grid.cfl=" + std::to_string(o.cfl));
    json doc = load_config_document(o.config, ov);
    return parse_config(doc, fs::path(o.config).parent_path().string());
}

const Site& first_site(const ExperimentConfig& c) {
    if (c.sites.empty()) throw config_error("SchemaError", "this command needs at least one interaction site");
    return c.sites[0];
}

json cmd_solve(const ExperimentConfig& c, const std::string& out) {
    const Site& s = first_site(c);
    SourceSet set = make_source_set(s.sources, c.eps, c.grid, c.dom);
    Field f = compose(set);
    auto t0 = std::chrono::steady_clock::now();
    Field u = source_to_solution(c.model_ref, f, c.dom);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_wvf(u, out + "/u.wvf");
    int kz = static_cast<int>(std::lround(s.cfg.z[0] / c.grid.dt()));
    write_slice_csv(u, kz, out + "/u_slice.csv");
    write_model(c.model_ref, c.grid, out + "/model");
    Region om = Region::cylinder(c.dom, 0);
    return {{"command", "solve"},
            {"grid", to_json(c.grid)},
            {"eps", c.eps},
            {"max_abs", u.max_abs()},
            {"norm_H0_omega", sobolev_norm(u, 0, om)},
            {"slice_level", kz},
            {"seconds", secs}};
}

json cmd_linearize(const ExperimentConfig& c, const std::string& out) {
    const Site& s = first_site(c);
    SourceSet set = make_source_set(s.sources, c.eps, c.grid, c.dom);
    LinearizationResult r = linearize(c.model_ref, set);
    write_wvf(r.u123, out + "/u123.wvf");
    write_wvf(r.u123_direct, out + "/u123_direct.wvf");
    json j = {{"command", "linearize"}, {"eps", r.eps},           {"rel_error", r.rel_error},
              {"pair_norms", r.pair_norms}, {"seconds", r.seconds}, {"interaction", to_json(s.cfg)}};
    write_json(j, out + "/diagnostics.json");
    return j;
}

json cmd_probe(const ExperimentConfig& c, const std::string& out) {
    json sites = json::array();
    for (const auto& s : c.sites) {
        Layout lay;
        lay.dom = c.dom;
        lay.grid = c.grid;
        lay.cfg = s.cfg;
        lay.sources = s.sources;
        lay.probe = s.probe;
        auto h = run_h_channel(lay, c.model_ref, c.model_alt, {s.probe});
        auto v = run_v_channel(lay, c.model_ref, s.probe, true);
        sites.push_back({{"interaction", to_json(s.cfg)},
                         {"h",
                          {{"estimate", h.estimate[0]},
                           {"truth", h.truth},
                           {"reference", to_json(h.ref[0])},
                           {"difference", to_json(h.diff[0])},
                           {"seconds", h.seconds}}},
                         {"V",
                          {{"recovery", to_json(v.v)},
                           {"truth", v.truth},
                           {"antiderivative", to_json(v.anti)},
                           {"free", to_json(v.fre)},
                           {"remainder", to_json(v.rem)},
                           {"seconds", v.seconds}}}});
    }
    json j = {{"command", "probe"}, {"sites", sites}};
    write_json(j, out + "/probe.json");
    return j;
}

json cmd_ray(const ExperimentConfig& c, const std::string& out) {
    DiscrepancySummary d = sup_discrepancy(c.model_ref.V, c.model_alt.V, c.dom, c.rays, true);
    Region dia = Region::diamond(c.dom, 0);
    double M = std::max(lipschitz_bound(c.model_ref.V, dia, c.grid), lipschitz_bound(c.model_alt.V, dia, c.grid));
    write_ray_csv(d, out + "/ray.csv");
    json j = {{"command", "ray"},
              {"sup", d.sup},
              {"argmax_y", d.argmax_y},
              {"argmax_z", d.argmax_z},
              {"pairs", d.pairs},
              {"y_samples", d.y_samples},
              {"y_spacing", d.y_spacing},
              {"gap_correction", d.gap_correction},
              {"M", M},
              {"bound", M > 0 ? pointwise_bound(2 * d.sup, M) : 0.0}};
    write_json(j, out + "/ray.json");
    return j;
}

json cmd_sweep(const ExperimentConfig& c, const std::string& out) {
    StabilityReport r = run_stability_sweep(c);
    write_report(r, out, c.timings_in_report);
    return {{"command", "sweep"}, {"rows", r.rows.size()}, {"C_trilinear", r.C_trilinear}, {"out", out}};
}

int run(const Options& o) {
    ExperimentConfig c = load(o);
    if (o.verb == "validate") {
        json j = validate_config(c);
        j["command"] = "validate";
        if (o.json_out) std::cout << j.dump() << "\n";
        std::cerr << "config valid\n";
        return 0;
    }
    fs::create_directories(o.out);
    json j;
    if (o.verb == "solve")
        j = cmd_solve(c, o.out);
    else if (o.verb == "linearize")
        j = cmd_linearize(c, o.out);
    else if (o.verb == "probe")
        j = cmd_probe(c, o.out);
    else if (o.verb == "ray")
        j = cmd_ray(c, o.out);
    else if (o.verb == "sweep")
        j = cmd_sweep(c, o.out);
    else
        throw config_error("UnknownVerb", "unknown command " + o.verb);
    if (o.json_out) std::cout << j.dump() << "\n";
    std::cerr << o.verb << " done, outputs in " << o.out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"waveinv: semilinear wave inverse-problem laboratory"};
    Options o;
    app.require_subcommand(1, 1);
    for (const char* verb : {"solve", "linearize", "probe", "ray", "sweep", "validate"}) {
        CLI::App* sub = app.add_subcommand(verb);
        sub->add_option("--config", o.config, "experiment config (JSON)")->required();
        sub->add_option("--out", o.out, "output directory");
        sub->add_option("--override", o.overrides, "KEY=VALUE dotted override (repeatable)");
        sub->add_option("--threads", o.threads, "worker threads (default WAVEINV_THREADS or all cores)");
        sub->add_flag("--json", o.json_out, "print a JSON record on stdout");
        sub->add_option("--cfl", o.cfl, "Courant ratio override");
        sub->callback([&o, verb] { o.verb = verb; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    if (o.threads > 0) set_threads(o.threads);
    try {
        return run(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        json err = {{"error", e.code()}, {"message", e.what()},
                    {"kind", e.kind() == ErrorKind::Config ? "config" : "domain"}};
        std::cout << err.dump() << "\n";
        return e.kind() == ErrorKind::Config ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::cout << json{{"error", "Internal"}, {"message", e.what()}, {"kind", "domain"}}.dump() << "\n";
        return 1;
    }
}
