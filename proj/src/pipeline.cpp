#include "waveinv/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "waveinv/errors.hpp"

namespace waveinv {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Point embed(double t, double x1, double x2, int d, double angle) {
    Point p(d + 1, 0.0);
    p[0] = t;
    p[1] = x1;
    p[2] = x2;
    return rotate_spatial(p, angle);
}

double omega_out(double r, double r0, double lambda_max) {
    auto k = solve_kappa(r, r0);
    return lambda_max * r * r / std::max({k[0], k[1], k[2]});
}

std::array<SourceSpec, 3> make_sources(const InteractionConfig& cfg, double sigma, double lambda_max, int s) {
    double km = std::max({cfg.kappa[0], cfg.kappa[1], cfg.kappa[2]});
    std::array<SourceSpec, 3> out;
    for (int j = 0; j < 3; ++j) {
        out[j].center = cfg.x[j];
        out[j].direction = cfg.xi[j];
        out[j].sigma = sigma;
        out[j].lambda = lambda_max * cfg.kappa[j] / km;
        out[j].k = j + 1;
        out[j].s = s;
    }
    return out;
}

ProbeSpec make_probe(const InteractionConfig& cfg, double cutoff, const std::vector<double>& factors,
                     double lambda_max, int s) {
    ProbeSpec p;
    p.z = cfg.z;
    p.zeta = cfg.eta;
    p.cutoff_width = cutoff;
    p.s = s;
    double w = omega_out(cfg.r, cfg.r0, lambda_max);
    for (double f : factors) p.tau_ladder.push_back(f / w);
    std::sort(p.tau_ladder.begin(), p.tau_ladder.end(), std::greater<>());
    return p;
}

bool same_coefficient(const Coefficient& a, const Coefficient& b) {
    if (&a == &b) return true;
    if (a.base != b.base || a.samples != b.samples || a.bumps.size() != b.bumps.size()) return false;
    for (std::size_t i = 0; i < a.bumps.size(); ++i) {
        const Bump &x = a.bumps[i], &y = b.bumps[i];
        if (x.center != y.center || x.radius_space != y.radius_space || x.radius_time != y.radius_time ||
            x.plateau != y.plateau || x.amplitude != y.amplitude || x.t_on != y.t_on || x.t_off != y.t_off ||
            x.ramp != y.ramp)
            return false;
    }
    return true;
}

std::array<Packet, 3> realize_packets(const std::array<SourceSpec, 3>& specs, const SpacetimeGrid& g,
                                      const DomainSpec& dom) {
    std::array<Packet, 3> pk;
    for (int j = 0; j < 3; ++j) realize_packet(specs[j], g, dom, &pk[j]);
    return pk;
}

}  // namespace

Layout design_layout(const LayoutParams& p) {
    if (p.d != 2 && p.d != 3) throw config_error("SchemaError", "layout.d must be 2 or 3");
    if (!(p.r > 0 && p.r < 1) || !(p.r0 >= 0 && p.r0 < 1))
        throw config_error("SchemaError", "layout needs 0 < r < 1 and 0 <= r0 < 1");
    if (!(p.dx > 0) || !(p.lambda_max > 0) || !(p.lambda_sigma >= 4) || !(p.cutoff > 0) || !(p.d_out > 0))
        throw config_error("SchemaError", "layout needs dx, lambda_max, cutoff, d_out > 0 and lambda_sigma >= 4");
    if (p.tau_factors.size() < 2) throw config_error("SchemaError", "layout.tau_factors needs at least 2 entries");
    Layout L;
    L.params = p;
    double rg = p.r_geom > 0 ? p.r_geom : p.r;
    std::vector<double> rs = p.r_sigma.empty() ? std::vector<double>{p.r} : p.r_sigma;
    double sigma = 0;
    for (double q : rs) {
        auto k = solve_kappa(q, p.r0);
        double km = std::max({k[0], k[1], k[2]});
        double lmin = p.lambda_max * std::min({k[0], k[1], k[2]}) / km;
        sigma = std::max(sigma, p.lambda_sigma / lmin);
    }
    const double S4 = 4 * sigma, Rphi = p.cutoff * p.cutoff_margin;
    const double ag = std::sqrt(1 - rg * rg);
    const double vx[3] = {1.0, ag, ag}, vy[3] = {0.0, rg, -rg};
    double rho = -1, s_in = -1;
    for (double R = p.rho_min; R < 5000 && rho < 0; R += 1.0) {
        double Y = R + p.d_out;
        for (double s = S4; s < 4 * R + S4; s += 0.5) {
            bool ok = true;
            for (int j = 0; j < 3 && ok; ++j)
                ok = std::hypot(Y - s * vx[j], -s * vy[j]) + S4 < R - 0.5;
            if (ok) {
                rho = R;
                s_in = s;
                break;
            }
        }
    }
    if (rho < 0) throw domain_error("ConfigInfeasible", "no layout radius found");
    const double a0 = std::sqrt(1 - p.r0 * p.r0), Y = rho + p.d_out;
    double s_out = -1;
    for (double s = 1; s < 4 * rho; s += 0.5)
        if (std::hypot(Y - s * a0, s * p.r0) + Rphi < rho - 0.5) {
            s_out = s;
            break;
        }
    if (s_out < 0) throw domain_error("ConfigInfeasible", "probe window does not fit inside Omega");
    const double t_y = S4 + 1 + s_in;
    const double T = t_y + s_out + Rphi + 2;
    const int n = 2 * static_cast<int>(std::ceil((rho + T + 1) / p.dx)) + 1;
    L.dom = DomainSpec{T, rho, 0.9 * rho, 0.8 * rho, 0.05 * T, 0.1 * T};
    L.grid = SpacetimeGrid::make(p.d, 0.5 * (n - 1) * p.dx, n, T, p.cfl);
    L.grid.validate(&L.dom);
    Point y = embed(t_y, Y, 0.0, p.d, p.frame_angle);
    Point z = embed(t_y + s_out, Y - s_out * a0, s_out * p.r0, p.d, p.frame_angle);
    L.cfg = build_interaction(L.dom, y, z, p.r, s_in, p.frame_angle);
    L.sigma = sigma;
    L.sources = make_sources(L.cfg, sigma, p.lambda_max, p.s);
    for (const auto& s : L.sources) validate_source(s, L.dom);
    L.probe = make_probe(L.cfg, p.cutoff, p.tau_factors, p.lambda_max, p.s);
    L.probe.validate(L.grid, &L.dom);
    L.omega_out = omega_out(p.r, L.cfg.r0, p.lambda_max);
    return L;
}

Layout relayout(const Layout& base, double r) {
    Layout L = base;
    L.params.r = r;
    L.cfg = build_interaction(base.dom, base.cfg.y, base.cfg.z, r, base.cfg.s_in, base.cfg.frame_angle);
    L.sources = make_sources(L.cfg, base.sigma, base.params.lambda_max, base.params.s);
    for (const auto& s : L.sources) validate_source(s, L.dom);
    L.probe = make_probe(L.cfg, base.probe.cutoff_width, base.params.tau_factors, base.params.lambda_max,
                         base.params.s);
    L.probe.validate(L.grid, &L.dom);
    L.omega_out = omega_out(r, L.cfg.r0, base.params.lambda_max);
    return L;
}

LayoutParams layout_params_from_json(const json& j) {
    LayoutParams p;
    auto get = [&](const char* k, auto& v) {
        if (j.contains(k)) v = j[k].get<std::decay_t<decltype(v)>>();
    };
    get("d", p.d);
    get("r", p.r);
    get("r0", p.r0);
    get("r_geom", p.r_geom);
    get("r_sigma", p.r_sigma);
    get("lambda_max", p.lambda_max);
    get("lambda_sigma", p.lambda_sigma);
    get("d_out", p.d_out);
    get("cutoff", p.cutoff);
    get("cutoff_margin", p.cutoff_margin);
    get("tau_factors", p.tau_factors);
    get("dx", p.dx);
    get("cfl", p.cfl);
    get("frame_angle", p.frame_angle);
    get("s", p.s);
    get("rho_min", p.rho_min);
    return p;
}

json to_json(const Layout& l) {
    json src = json::array();
    for (const auto& s : l.sources) src.push_back(to_json(s));
    return {{"domain", to_json(l.dom)}, {"grid", to_json(l.grid)},       {"interaction", to_json(l.cfg)},
            {"sources", src},           {"sigma", l.sigma},               {"omega_out", l.omega_out},
            {"probe", {{"z", l.probe.z}, {"zeta", l.probe.zeta.c}, {"cutoff_width", l.probe.cutoff_width},
                       {"tau_ladder", l.probe.tau_ladder}}}};
}

HChannelResult run_h_channel(const Layout& lay, const Model& A, const Model& B, const std::vector<ProbeSpec>& probes) {
    auto t0 = std::chrono::steady_clock::now();
    const SpacetimeGrid& g = lay.grid;
    auto pk = realize_packets(lay.sources, g, lay.dom);
    Evolution ev(g);
    std::array<int, 3> ua{}, ub{};
    for (int j = 0; j < 3; ++j) {
        Member m;
        m.V = &A.V;
        m.packets.push_back({&pk[j], 1.0});
        ua[j] = ev.add(m);
    }
    ub = ua;
    if (!same_coefficient(A.V, B.V))
        for (int j = 0; j < 3; ++j) {
            Member m;
            m.V = &B.V;
            m.packets.push_back({&pk[j], 1.0});
            ub[j] = ev.add(m);
        }
    Member UA, UB;
    UA.V = &A.V;
    UA.h_prod = &A.h;
    UA.prod = ua;
    UB.V = &B.V;
    UB.h_prod = &B.h;
    UB.prod = ub;
    int ia = ev.add(UA), ib = ev.add(UB);
    std::vector<std::unique_ptr<PairingAccumulator>> acc;
    std::vector<Evolution::Observer> obs;
    for (const auto& p : probes) {
        p.validate(g, &lay.dom);
        acc.push_back(std::make_unique<PairingAccumulator>(p, g, std::vector<std::pair<int, double>>{{ia, 1.0}}));
        acc.push_back(std::make_unique<PairingAccumulator>(
            p, g, std::vector<std::pair<int, double>>{{ia, 1.0}, {ib, -1.0}}));
    }
    for (auto& a : acc) obs.push_back(a->observer());
    ev.run(obs);
    HChannelResult r;
    double hy = A.h.value(lay.cfg.y);
    r.truth = hy - B.h.value(lay.cfg.y);
    for (std::size_t i = 0; i < probes.size(); ++i) {
        r.ref.push_back(acc[2 * i]->result());
        r.diff.push_back(acc[2 * i + 1]->result());
        r.estimate.push_back(h_difference_from_pairings(r.ref.back(), r.diff.back(), hy, probes[i].noise_floor));
    }
    r.seconds = seconds_since(t0);
    return r;
}

VChannelResult run_v_channel(const Layout& lay, const Model& m, const ProbeSpec& p, bool verification) {
    auto t0 = std::chrono::steady_clock::now();
    const SpacetimeGrid& g = lay.grid;
    p.validate(g, &lay.dom);
    auto pk = realize_packets(lay.sources, g, lay.dom);
    Evolution ev(g);
    std::array<int, 3> fr{}, li{};
    for (int j = 0; j < 3; ++j) {
        Member mb;
        mb.packets.push_back({&pk[j], 1.0});
        fr[j] = ev.add(mb);
    }
    Member Uf;
    Uf.h_prod = &m.h;
    Uf.prod = fr;
    int iuf = ev.add(Uf);
    for (int j = 0; j < 3; ++j) {
        Member mb;
        mb.V = &m.V;
        mb.packets.push_back({&pk[j], 1.0});
        li[j] = ev.add(mb);
    }
    Member U;
    U.V = &m.V;
    U.h_prod = &m.h;
    U.prod = li;
    int iu = ev.add(U);
    PairingAccumulator anti(p, g, {{iuf, 1.0}}, true), fre(p, g, {{iuf, 1.0}}), rem(p, g, {{iu, 1.0}, {iuf, -1.0}});
    ev.run({anti.observer(), fre.observer(), rem.observer()});
    VChannelResult r;
    r.anti = anti.result();
    r.fre = fre.result();
    r.rem = rem.result();
    r.v = v_estimate_from_pairings(r.anti, r.fre, r.rem, p.noise_floor);
    if (verification) apply_verification(r.v, m.V, lay.cfg);
    r.truth = truncated_integral(m.V, lay.cfg.y, lay.cfg.z);
    r.seconds = seconds_since(t0);
    return r;
}

// ---------------------------------------------------------------- config

void apply_override(json& doc, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw config_error("BadOverride", "override must be KEY=VALUE: " + kv);
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    json v;
    try {
        v = json::parse(val);
    } catch (const json::parse_error&) {
        v = val;
    }
    json* cur = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (cur->is_array()) {
            cur = &(*cur)[std::stoul(parts[i])];
        } else {
            cur = &(*cur)[parts[i]];
        }
    }
    if (cur->is_array())
        (*cur)[std::stoul(parts.back())] = v;
    else
        (*cur)[parts.back()] = v;
}

json load_config_document(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw config_error("MissingConfig", "cannot open config " + path);
    json doc;
    try {
        doc = json::parse(is);
    } catch (const json::parse_error& e) {
        throw config_error("SchemaError", std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return doc;
}

namespace {

// Replaces "y" / "z" bump centers by the first site's points plus an optional offset.
json resolve_centers(json c, const std::vector<Site>& sites) {
    if (!c.is_object() || !c.contains("bumps")) return c;
    for (auto& b : c["bumps"]) {
        if (!b.contains("center") || !b["center"].is_string()) continue;
        if (sites.empty()) throw config_error("SchemaError", "symbolic bump center needs an interaction site");
        std::string s = b["center"].get<std::string>();
        Point p;
        if (s == "y")
            p = sites[0].cfg.y;
        else if (s == "z")
            p = sites[0].cfg.z;
        else
            throw config_error("SchemaError", "unknown symbolic center '" + s + "'");
        if (b.contains("offset")) {
            Point o = point_from_json(b["offset"]);
            if (o.size() != p.size()) throw config_error("SchemaError", "bump offset dimension");
            for (std::size_t i = 0; i < p.size(); ++i) p[i] += o[i];
        }
        b["center"] = p;
    }
    return c;
}

Model model_from_json(const json& j, const std::vector<Site>& sites, const std::string& dir) {
    Model m;
    m.V = coefficient_from_json(resolve_centers(j.value("V", json(0.0)), sites), dir);
    m.h = coefficient_from_json(resolve_centers(j.value("h", json(1.0)), sites), dir);
    m.h_floor = j.value("h_floor", 0.0);
    return m;
}

Coefficient add_coeff(const Coefficient& a, const Coefficient& b, double s) {
    return a - b.scaled(-s);
}

}  // namespace

ExperimentConfig parse_config(const json& doc, const std::string& base_dir) {
    ExperimentConfig c;
    c.doc = doc;
    c.base_dir = base_dir;
    try {
        if (!doc.is_object()) throw config_error("SchemaError", "config must be a JSON object");
        if (doc.value("schema", 0) != 1) throw config_error("SchemaError", "unsupported or missing \"schema\" (expected 1)");
        c.s = doc.value("s", 4);
        if (c.s < 0) throw config_error("SchemaError", "s must be >= 0");
        c.seed = doc.value("seed", std::uint64_t(0));
        if (doc.contains("layout") && (doc.contains("domain") || doc.contains("sites")))
            throw config_error("SchemaError", "give either \"layout\" or \"domain\"/\"sites\", not both");
        const json src = doc.value("sources", json::object());
        if (doc.contains("layout")) {
            LayoutParams lp = layout_params_from_json(doc["layout"]);
            lp.s = c.s;
            Layout lay = design_layout(lp);
            c.dom = lay.dom;
            c.grid = lay.grid;
            if (doc.contains("grid") && doc["grid"].contains("cfl")) {
                c.grid = SpacetimeGrid::make(lay.grid.d, lay.grid.L, lay.grid.n_space, lay.grid.T,
                                             doc["grid"]["cfl"].get<double>());
            }
            Site s{lay.cfg, lay.sources, lay.probe};
            s.probe.noise_floor = doc.value("probe", json::object()).value("noise_floor", s.probe.noise_floor);
            c.sites.push_back(s);
        } else {
            if (!doc.contains("domain")) throw config_error("SchemaError", "missing \"domain\"");
            if (!doc.contains("grid")) throw config_error("SchemaError", "missing \"grid\"");
            c.dom = domain_from_json(doc["domain"]);
            const json& gj = doc["grid"];
            int d = gj.value("d", 2);
            int n = gj.value("n_space", 129);
            if (d != 2 && d != 3) throw config_error("SchemaError", "grid.d must be 2 or 3");
            if (n < 5) throw config_error("SchemaError", "grid.n_space must be >= 5");
            double L = gj.contains("L") ? gj["L"].get<double>() : c.dom.rho + c.dom.T + 1.0;
            c.grid = SpacetimeGrid::make(d, L, n, c.dom.T, gj.value("cfl", 0.5));
            const json pj = doc.value("probe", json::object());
            double lambda_max = src.value("lambda_max", 1.3);
            for (const auto& sj : doc.value("sites", json::array())) {
                Point y = point_from_json(sj.at("y")), z = point_from_json(sj.at("z"));
                if (static_cast<int>(y.size()) != d + 1) throw config_error("SchemaError", "site dimension differs from grid.d");
                double r = sj.at("r").get<double>();
                InteractionConfig ic = build_interaction(c.dom, y, z, r, sj.at("s_in").get<double>(),
                                                         sj.value("frame_angle", 0.0));
                double sigma = src.at("sigma").get<double>();
                Site s{ic, make_sources(ic, sigma, lambda_max, c.s),
                       make_probe(ic, pj.value("cutoff_width", 24.0),
                                  pj.value("tau_factors", std::vector<double>{2.0, 1.5, 1.0, 0.67}), lambda_max, c.s)};
                s.probe.noise_floor = pj.value("noise_floor", s.probe.noise_floor);
                c.sites.push_back(s);
            }
        }
        c.grid.validate(&c.dom);
        if (src.contains("eps")) {
            if (src["eps"].is_number()) {
                double e = src["eps"].get<double>();
                c.eps = {e, e, e};
            } else {
                auto v = src["eps"].get<std::vector<double>>();
                if (v.size() != 3) throw config_error("SchemaError", "sources.eps needs 3 entries");
                c.eps = {v[0], v[1], v[2]};
            }
        }
        c.eps_ladder = src.value("eps_ladder", std::vector<double>{});
        c.model_ref = model_from_json(doc.value("model_ref", json::object()), c.sites, base_dir);
        if (doc.contains("perturbation")) {
            const json& pj = doc["perturbation"];
            c.pert_h = coefficient_from_json(resolve_centers(pj.value("h", json(0.0)), c.sites), base_dir);
            c.pert_V = coefficient_from_json(resolve_centers(pj.value("V", json(0.0)), c.sites), base_dir);
            c.has_perturbation = true;
        }
        if (doc.contains("model_alt"))
            c.model_alt = model_from_json(doc["model_alt"], c.sites, base_dir);
        else
            c.model_alt = alt_model(c, 1.0);
        const json sw = doc.value("sweep", json::object());
        c.amplitudes = sw.value("amplitudes", std::vector<double>{});
        c.random_triples = sw.value("random_triples", 0);
        c.timings_in_report = sw.value("timings", false);
        const json rj = doc.value("rays", json::object());
        c.rays.n_dirs = rj.value("n_dirs", c.rays.n_dirs);
        c.rays.n_t = rj.value("n_t", c.rays.n_t);
        c.rays.n_r = rj.value("n_r", c.rays.n_r);
        c.rays.n_ang = rj.value("n_ang", c.rays.n_ang);
        c.rays.step = rj.value("step", c.rays.step);
    } catch (const json::exception& e) {
        throw config_error("SchemaError", e.what());
    }
    return c;
}

Model alt_model(const ExperimentConfig& cfg, double amplitude) {
    Model m = cfg.model_ref;
    if (!cfg.has_perturbation) return m;
    if (amplitude == 0.0) return m;
    m.h = add_coeff(cfg.model_ref.h, cfg.pert_h, amplitude);
    m.V = add_coeff(cfg.model_ref.V, cfg.pert_V, amplitude);
    return m;
}

namespace {

// sup |f| over lattice points (spacing dx) of a region
double lattice_sup(const Coefficient& f, const Region& reg, const SpacetimeGrid& g) {
    double h = g.dx();
    double t_lo = reg.dom.inset(reg.level), t_hi = reg.dom.T - t_lo;
    double R = reg.radius_at(0.5 * (t_lo + t_hi));
    int nt = static_cast<int>(std::floor((t_hi - t_lo) / h)) + 1;
    int nx = static_cast<int>(std::floor(2 * R / h)) + 1;
    double best = 0;
    Point p(g.d + 1);
    std::size_t per = std::size_t(nx) * nx * (g.d == 3 ? nx : 1);
    for (int it = 0; it < nt; ++it)
        for (std::size_t c = 0; c < per; ++c) {
            std::size_t rest = c;
            p[0] = t_lo + it * h;
            for (int a = 0; a < g.d; ++a) {
                p[a + 1] = -R + (rest % nx) * h;
                rest /= nx;
            }
            if (!reg.contains(p[0], spatial_norm(p), h, h)) continue;
            best = std::max(best, std::abs(f.value(p)));
        }
    return best;
}

double unit(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

// Source triples of every site plus seeded random jitters of their centers.
std::vector<std::array<SourceSpec, 3>> source_triples(const ExperimentConfig& cfg) {
    std::vector<std::array<SourceSpec, 3>> out;
    for (const auto& s : cfg.sites) out.push_back(s.sources);
    std::mt19937_64 rng(cfg.seed);
    for (int i = 0; i < cfg.random_triples && !cfg.sites.empty(); ++i) {
        auto tri = cfg.sites[i % cfg.sites.size()].sources;
        for (auto& sp : tri)
            for (double& c : sp.center) c += (unit(rng) - 0.5) * sp.sigma;
        bool ok = true;
        for (const auto& sp : tri) {
            try {
                validate_source(sp, cfg.dom);
            } catch (const Error&) {
                ok = false;
            }
        }
        if (ok) out.push_back(tri);
    }
    return out;
}

}  // namespace

double measure_delta(const ExperimentConfig& cfg, const Model& A, const Model& B) {
    const SpacetimeGrid& g = cfg.grid;
    Region om = Region::cylinder(cfg.dom, 0);
    Window w = omega_window(g, cfg.dom);
    std::vector<std::array<double, 3>> eps_list{cfg.eps};
    for (double e : cfg.eps_ladder) eps_list.push_back({e, e, e});
    static constexpr int sub[7][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    double delta = 0;
    for (const auto& tri : source_triples(cfg)) {
        auto pk = realize_packets(tri, g, cfg.dom);
        for (const auto& eps : eps_list)
            for (const auto& sb : sub) {
                Evolution ev(g);
                Member ma, mb;
                ma.V = &A.V;
                ma.h_self = &A.h;
                mb.V = &B.V;
                mb.h_self = &B.h;
                for (int j = 0; j < 3; ++j)
                    if (sb[j]) {
                        ma.packets.push_back({&pk[j], eps[j]});
                        mb.packets.push_back({&pk[j], eps[j]});
                    }
                int ia = ev.add(ma), ib = ev.add(mb);
                Field D(g, w);
                ev.run({record_into(D, {{ia, 1.0}, {ib, -1.0}})});
                delta = std::max(delta, sobolev_norm(restrict_field(D, om), cfg.s, om));
            }
    }
    return delta;
}

Fit fit_exponent(const std::vector<std::pair<double, double>>& rows) {
    Fit f;
    std::vector<std::pair<double, double>> pts;
    for (auto [d, e] : rows) {
        if (!(d > 0) || !(e > 0) || !std::isfinite(d) || !std::isfinite(e))
            throw domain_error("NonPositiveEntry", "fit_exponent needs positive finite (delta, err) rows");
        pts.push_back({std::log(d), std::log(e)});
    }
    f.n = static_cast<int>(pts.size());
    if (f.n < 3) throw domain_error("InsufficientRows", "fit_exponent needs at least 3 rows");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double den = f.n * sxx - sx * sx;
    if (den == 0) throw domain_error("InsufficientRows", "fit_exponent needs distinct delta values");
    f.slope = (f.n * sxy - sx * sy) / den;
    f.intercept = (sy - f.slope * sx) / f.n;
    double res = 0;
    for (auto [x, y] : pts) {
        double e = y - (f.intercept + f.slope * x);
        res += e * e;
    }
    f.residual = std::sqrt(res / f.n);
    f.ok = true;
    return f;
}

StabilityReport run_stability_sweep(const ExperimentConfig& cfg) {
    if (cfg.amplitudes.empty()) throw config_error("SchemaError", "sweep.amplitudes is empty");
    if (cfg.sites.empty()) throw config_error("SchemaError", "sweep needs at least one interaction site");
    StabilityReport rep;
    rep.s = cfg.s;
    const int s = cfg.s;
    const double mu0 = 0.4 * 2.0 / ((3 * s + 7) * (6 * s + 5));
    rep.targets = {{"trilinear", 0.4},
                   {"h", 2.0 / (15.0 * (s + 2))},
                   {"I_omega1", 2.0 / ((3 * s + 7) * (6 * s + 5))},
                   {"I", mu0},
                   {"V", mu0 / 2}};
    const Model& A = cfg.model_ref;
    const auto triples = source_triples(cfg);
    for (double amp : cfg.amplitudes) {
        SweepRow row;
        row.amplitude = amp;
        auto t0 = std::chrono::steady_clock::now();
        try {
            Model B = alt_model(cfg, amp);
            row.delta = measure_delta(cfg, A, B);
            row.h_sup = lattice_sup(A.h - B.h, Region::diamond(cfg.dom, 1), cfg.grid);
            row.V_sup = lattice_sup(A.V - B.V, Region::diamond(cfg.dom, 2), cfg.grid);
            row.omega1 = std::pow(row.delta, 0.4) + row.h_sup;
            row.tau_theory = std::pow(row.delta, 2.0 / (15.0 * (s + 2)));
            row.r_theory = std::pow(row.omega1, 1.0 / ((3.0 * s + 7) * (6.0 * s + 5)));
            row.tau_used = cfg.sites[0].probe.tau_ladder.back();
            row.r_used = cfg.sites[0].cfg.r;
            if (row.delta > 0) {
                double e = std::pow(row.delta, 0.2);
                double c = -1.0 / (6.0 * e * e * e);
                Region om = Region::cylinder(cfg.dom, 0);
                for (std::size_t t = 0; t < triples.size(); ++t) {
                    SourceSet set = make_source_set(triples[t], {e, e, e}, cfg.grid, cfg.dom);
                    Evolution ev(cfg.grid);
                    int pa = add_polarization_members(ev, A, set);
                    int pb = add_polarization_members(ev, B, set);
                    std::vector<std::pair<int, double>> ca, cd;
                    for (auto [id, k] : triple_combination(pa)) {
                        ca.push_back({id, c * k});
                        cd.push_back({id, c * k});
                    }
                    for (auto [id, k] : triple_combination(pb)) cd.push_back({id, -c * k});
                    Field D(cfg.grid, omega_window(cfg.grid, cfg.dom));
                    std::vector<Evolution::Observer> obs{record_into(D, cd)};
                    std::unique_ptr<PairingAccumulator> pr, pd;
                    bool probe_site = t < cfg.sites.size();
                    if (probe_site) {
                        pr = std::make_unique<PairingAccumulator>(cfg.sites[t].probe, cfg.grid, ca);
                        pd = std::make_unique<PairingAccumulator>(cfg.sites[t].probe, cfg.grid, cd);
                        obs.push_back(pr->observer());
                        obs.push_back(pd->observer());
                    }
                    ev.run(obs);
                    D.check_finite("trilinear discrepancy");
                    row.trilinear = std::max(row.trilinear, sobolev_norm(restrict_field(D, om), s, om));
                    if (probe_site) {
                        const Site& st = cfg.sites[t];
                        double hy = A.h.value(st.cfg.y);
                        double rec = h_difference_from_pairings(pr->result(), pd->result(), hy, st.probe.noise_floor);
                        double tru = hy - B.h.value(st.cfg.y);
                        if (t == 0 || std::abs(rec - tru) > row.h_error) {
                            row.h_error = std::abs(rec - tru);
                            row.h_recovered = rec;
                            row.h_truth = tru;
                        }
                    }
                }
            }
            Coefficient dV = A.V - B.V;
            if (row.V_sup > 0 || !same_coefficient(A.V, B.V)) {
                row.sup_I = sup_discrepancy(A.V, B.V, cfg.dom, cfg.rays).sup;
                Region dia = Region::diamond(cfg.dom, 0);
                row.M = std::max(lipschitz_bound(A.V, dia, cfg.grid), lipschitz_bound(B.V, dia, cfg.grid));
                row.V_bound = row.M > 0 ? pointwise_bound(2 * row.sup_I, row.M) : 0.0;
            }
        } catch (const Error& e) {
            row.status = e.code();
        }
        row.seconds = seconds_since(t0);
        rep.rows.push_back(row);
    }
    std::vector<std::pair<double, double>> tri, he, si, vb;
    for (const auto& r : rep.rows) {
        if (r.status != "ok") continue;
        auto keep = [&](auto& v, double e) {
            if (r.delta > 0 && e > 0) v.push_back({r.delta, e});
        };
        keep(tri, r.trilinear);
        keep(he, r.h_error);
        keep(si, r.sup_I);
        keep(vb, r.V_bound);
        if (r.delta > 0) rep.C_trilinear = std::max(rep.C_trilinear, r.trilinear / std::pow(r.delta, 0.4));
    }
    // rows with zero error or zero delta carry no slope information
    auto fit_rows = [](const std::vector<std::pair<double, double>>& v) {
        std::set<double> ds;
        for (auto [d, e] : v) ds.insert(d);
        if (ds.size() < 3) return Fit{0, 0, 0, static_cast<int>(v.size()), false};
        return fit_exponent(v);
    };
    rep.fit_trilinear = fit_rows(tri);
    rep.fit_h = fit_rows(he);
    rep.fit_I = fit_rows(si);
    rep.fit_V = fit_rows(vb);
    return rep;
}

namespace {
json fit_json(const Fit& f) {
    if (!f.ok) return {{"ok", false}, {"n", f.n}};
    return {{"ok", true}, {"n", f.n}, {"slope", f.slope}, {"intercept", f.intercept}, {"residual", f.residual}};
}
}  // namespace

json to_json(const StabilityReport& r, bool timings) {
    json rows = json::array();
    for (const auto& w : r.rows) {
        json j = {{"amplitude", w.amplitude},
                  {"delta", w.delta},
                  {"trilinear", w.trilinear},
                  {"h_error", w.h_error},
                  {"h_recovered", w.h_recovered},
                  {"h_truth", w.h_truth},
                  {"sup_I", w.sup_I},
                  {"M", w.M},
                  {"V_bound", w.V_bound},
                  {"V_sup", w.V_sup},
                  {"h_sup", w.h_sup},
                  {"annotations",
                   {{"tau_theory", w.tau_theory},
                    {"r_theory", w.r_theory},
                    {"omega1", w.omega1},
                    {"tau_used", w.tau_used},
                    {"r_used", w.r_used}}},
                  {"status", w.status}};
        if (timings) j["seconds"] = w.seconds;
        rows.push_back(j);
    }
    return {{"s", r.s},
            {"rows", rows},
            {"fits",
             {{"trilinear", fit_json(r.fit_trilinear)},
              {"h_error", fit_json(r.fit_h)},
              {"sup_I", fit_json(r.fit_I)},
              {"V_bound", fit_json(r.fit_V)}}},
            {"C_trilinear", r.C_trilinear},
            {"targets", r.targets}};
}

void write_report(const StabilityReport& r, const std::string& dir, bool timings) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream os(dir + "/report.json");
        if (!os) throw config_error("OutputUnwritable", "cannot write " + dir + "/report.json");
        os << to_json(r, timings).dump(2) << "\n";
    }
    {
        std::ofstream os(dir + "/report.csv");
        os.precision(17);
        os << "amplitude,delta,trilinear,h_error,sup_I,M,V_bound,V_sup,h_sup,tau_theory,r_theory,omega1,tau_used,r_used,status\n";
        for (const auto& w : r.rows)
            os << w.amplitude << "," << w.delta << "," << w.trilinear << "," << w.h_error << "," << w.sup_I << ","
               << w.M << "," << w.V_bound << "," << w.V_sup << "," << w.h_sup << "," << w.tau_theory << ","
               << w.r_theory << "," << w.omega1 << "," << w.tau_used << "," << w.r_used << "," << w.status << "\n";
    }
    {
        std::ofstream os(dir + "/plots.gp");
        os << "set datafile separator ','\n"
              "set logscale xy\n"
              "set key left top\n"
              "set xlabel 'delta'\n"
              "set ylabel 'error'\n"
              "set terminal pngcairo size 900,600\n"
              "set output 'report.png'\n"
              "plot 'report.csv' every ::1 using 2:3 with linespoints title 'trilinear', \\\n"
              "     'report.csv' every ::1 using 2:4 with linespoints title 'h error', \\\n"
              "     'report.csv' every ::1 using 2:5 with linespoints title 'sup I', \\\n"
              "     'report.csv' every ::1 using 2:7 with linespoints title 'V bound'\n";
    }
}

json validate_config(const ExperimentConfig& cfg) {
    cfg.dom.validate();
    cfg.grid.validate(&cfg.dom);
    json sites = json::array();
    for (const auto& s : cfg.sites) {
        for (const auto& sp : s.sources) validate_source(sp, cfg.dom);
        s.probe.validate(cfg.grid, &cfg.dom);
        for (double k : s.cfg.kappa)
            if (k < 0.5 || k > 4.5) throw domain_error("ConfigInfeasible", "kappa outside [1/2, 9/2]");
        sites.push_back(to_json(s.cfg));
    }
    cfg.model_ref.validate(cfg.grid);
    cfg.model_alt.validate(cfg.grid);
    return {{"valid", true}, {"domain", to_json(cfg.dom)}, {"grid", to_json(cfg.grid)}, {"sites", sites},
            {"eps", cfg.eps}, {"s", cfg.s}};
}

}  // namespace waveinv
