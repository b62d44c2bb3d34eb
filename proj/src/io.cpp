#include "waveinv/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "waveinv/errors.hpp"

namespace waveinv {

namespace {

double num(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number()) throw config_error("SchemaError", std::string("missing number '") + key + "'");
    return j[key].get<double>();
}

double num_or(const json& j, const char* key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (j[key].is_null()) return dflt;
    if (!j[key].is_number()) throw config_error("SchemaError", std::string("'") + key + "' must be a number");
    return j[key].get<double>();
}

json cplx_pair(cplx c) { return json::array({c.real(), c.imag()}); }

}  // namespace

Point point_from_json(const json& j) {
    if (!j.is_array() || j.empty()) throw config_error("SchemaError", "point must be a numeric array");
    Point p;
    for (const auto& v : j) {
        if (!v.is_number()) throw config_error("SchemaError", "point must be a numeric array");
        p.push_back(v.get<double>());
    }
    return p;
}

json to_json(const DomainSpec& d) {
    return {{"T", d.T}, {"rho", d.rho}, {"rho1", d.rho1}, {"rho2", d.rho2}, {"t1", d.t1}, {"t2", d.t2}};
}

DomainSpec domain_from_json(const json& j) {
    DomainSpec d{num(j, "T"), num(j, "rho"), num(j, "rho1"), num(j, "rho2"), num(j, "t1"), num(j, "t2")};
    d.validate();
    return d;
}

json to_json(const SpacetimeGrid& g) {
    return {{"d", g.d}, {"L", g.L}, {"n_space", g.n_space}, {"T", g.T}, {"cfl", g.cfl}, {"n_time", g.n_time},
            {"dx", g.dx()}, {"dt", g.dt()}};
}

json to_json(const InteractionConfig& c) {
    json xs = json::array();
    for (const auto& x : c.x) xs.push_back(x);
    json xi = json::array();
    for (const auto& v : c.xi) xi.push_back(v.c);
    return {{"x", xs},          {"y", c.y},          {"z", c.z},         {"r", c.r},
            {"r0", c.r0},       {"s_in", c.s_in},    {"s_out", c.s_out}, {"frame_angle", c.frame_angle},
            {"xi", xi},         {"eta", c.eta.c},    {"kappa", c.kappa}};
}

json to_json(const SourceSpec& s) {
    return {{"center", s.center}, {"direction", s.direction.c}, {"sigma", s.sigma}, {"lambda", s.lambda}, {"k", s.k}};
}

SourceSpec source_from_json(const json& j) {
    SourceSpec s;
    s.center = point_from_json(j.at("center"));
    s.direction.c = point_from_json(j.at("direction"));
    s.sigma = num(j, "sigma");
    s.lambda = num(j, "lambda");
    s.k = static_cast<int>(num_or(j, "k", 1));
    return s;
}

json to_json(const ProbeResult& r) {
    json p = json::array();
    for (auto c : r.pairings) p.push_back(cplx_pair(c));
    return {{"taus", r.taus},
            {"pairings", p},
            {"fitted_order", r.fitted_order},
            {"fitted_amplitude", cplx_pair(r.fitted_amplitude)},
            {"fit_residual", r.fit_residual}};
}

json to_json(const Bump& b) {
    json j = {{"center", b.center}, {"radius", b.radius_space}, {"radius_time", b.radius_time},
              {"plateau", b.plateau}, {"amplitude", b.amplitude}, {"ramp", b.ramp}};
    if (std::isfinite(b.t_on)) j["t_on"] = b.t_on;
    if (std::isfinite(b.t_off)) j["t_off"] = b.t_off;
    return j;
}

json to_json(const Coefficient& c) {
    json bumps = json::array();
    for (const auto& b : c.bumps) bumps.push_back(to_json(b));
    json j = {{"base", c.base}, {"bumps", bumps}};
    if (c.samples) j["sampled"] = true;
    return j;
}

Coefficient coefficient_from_json(const json& j, const std::string& base_dir) {
    Coefficient c;
    if (j.is_number()) {
        c.base = j.get<double>();
        return c;
    }
    if (!j.is_object()) throw config_error("SchemaError", "coefficient must be a number or an object");
    c.base = num_or(j, "base", 0.0);
    if (j.contains("bumps")) {
        if (!j["bumps"].is_array()) throw config_error("SchemaError", "'bumps' must be an array");
        for (const auto& bj : j["bumps"]) {
            Bump b;
            b.center = point_from_json(bj.at("center"));
            b.radius_space = num_or(bj, "radius", 1.0);
            b.radius_time = num_or(bj, "radius_time", 0.0);
            b.plateau = num_or(bj, "plateau", 0.0);
            b.amplitude = num_or(bj, "amplitude", 1.0);
            b.t_on = num_or(bj, "t_on", -std::numeric_limits<double>::infinity());
            b.t_off = num_or(bj, "t_off", std::numeric_limits<double>::infinity());
            b.ramp = num_or(bj, "ramp", 1.0);
            if (b.plateau < 0 || b.plateau >= 1 || b.ramp <= 0)
                throw config_error("SchemaError", "bump needs 0 <= plateau < 1 and ramp > 0");
            c.bumps.push_back(b);
        }
    }
    if (j.contains("file")) {
        std::filesystem::path p = j["file"].get<std::string>();
        if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
        c.samples = std::make_shared<Field>(read_wvf(p.string()));
    }
    return c;
}

json to_json(const VRecovery& v) {
    return {{"estimate", v.estimate},     {"literal", v.literal}, {"correction", v.correction},
            {"corrected", v.corrected},   {"I_in", {v.I_in[0], v.I_in[1], v.I_in[2]}},
            {"verified", v.verified}};
}

void write_model(const Model& m, const SpacetimeGrid& g, const std::string& dir) {
    std::filesystem::create_directories(dir);
    Window w = Window::full(g);
    auto sample = [&](const Coefficient& c) {
        int nt = c.time_dependent() ? g.n_time : 1;
        Field f(g, w, 0, nt);
        for (int k = 0; k < nt; ++k) c.fill_slice(g, k, w, f.slice(k));
        return f;
    };
    write_wvf(sample(m.V), dir + "/V.wvf");
    write_wvf(sample(m.h), dir + "/h.wvf");
    json meta = {{"V", to_json(m.V)}, {"h", to_json(m.h)}, {"h_floor", m.h_floor}, {"grid", to_json(g)},
                 {"V_time_dependent", m.V.time_dependent()}, {"h_time_dependent", m.h.time_dependent()}};
    std::ofstream(dir + "/model.json") << meta.dump(2) << "\n";
}

}  // namespace waveinv
