// Acceptance suite: one PASS/FAIL line per criterion. Tolerances are pinned here.
// Usage: acceptance [--out FILE] [--strict] [criterion ids...]
// Without --strict the exit status is 0 whenever every criterion was evaluated.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "waveinv/errors.hpp"
#include "waveinv/pipeline.hpp"

using namespace waveinv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < x.size(); ++i) rows.push_back({x[i], y[i]});
    Fit f = fit_exponent(rows);
    return f.ok ? f.slope : std::nan("");
}

// Small r = 0.3 layout used by the linearization and sweep criteria.
Layout small_layout() {
    LayoutParams p;
    p.r = 0.3;
    p.d_out = 5;
    p.cutoff = 4;
    p.cutoff_margin = 1;
    return design_layout(p);
}

// Big r = 0.6 layout used by the probe criteria.
Layout big_layout() { return design_layout(LayoutParams{}); }

// ---- 1. manufactured solution, u* = exp(-|x|^2/2) (t/T)^4

struct Manufactured {
    double T = 2.0, V = 0.5, h = 1.0;
    double u(double t, double x, double y) const { return std::exp(-(x * x + y * y) / 2) * std::pow(t / T, 4); }
    double f(double t, double x, double y, double Vc, double hc) const {
        double g = std::exp(-(x * x + y * y) / 2);
        double r2 = x * x + y * y;
        double utt = g * 12 * t * t / std::pow(T, 4);
        double lap = (r2 - 2) * g * std::pow(t / T, 4);
        double uu = u(t, x, y);
        return utt - lap + Vc * uu + hc * uu * uu * uu;
    }
};

double manufactured_error(int n, int which, double* secs) {
    Manufactured ms;
    SpacetimeGrid g = SpacetimeGrid::make(2, 8.0, n, ms.T, 0.5);
    double Vc = which == 2 ? 0.0 : ms.V, hc = which == 0 ? ms.h : 0.0;
    Field f(g);
    for (int k = 0; k < g.n_time; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) f.slice(k)[f.local(i, j, 0)] = ms.f(g.t(k), g.x(i), g.x(j), Vc, hc);
    auto t0 = std::chrono::steady_clock::now();
    Field u;
    if (which == 0) {
        Model m;
        m.V = Coefficient(Vc);
        m.h = Coefficient(hc);
        u = solve_semilinear(m, f);
    } else if (which == 1) {
        u = solve_linear(Coefficient(Vc), f);
    } else {
        u = solve_free(f);
    }
    *secs += seconds_since(t0);
    double err = 0;
    for (int k = 0; k < g.n_time; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                err = std::max(err, std::abs(u.slice(k)[u.local(i, j, 0)] - ms.u(g.t(k), g.x(i), g.x(j))));
    return err;
}

Outcome solver_order() {
    Outcome o{true, ""};
    const char* names[3] = {"semilinear", "linear", "free"};
    for (int w = 0; w < 3; ++w) {
        double secs = 0;
        double e1 = manufactured_error(129, w, &secs), e2 = manufactured_error(257, w, &secs);
        double ratio = e1 / e2;
        bool ok = ratio >= 3.5 && ratio <= 4.5 && secs <= 120;
        o.pass = o.pass && ok;
        o.detail += fmt("%s ratio %.3f (%.2fs); ", names[w], ratio, secs);
    }
    o.detail += "need [3.5, 4.5], <= 120 s per pair";
    return o;
}

// ---- 2. finite propagation speed

Outcome propagation_speed() {
    SpacetimeGrid g = SpacetimeGrid::make(2, 20.0, 129, 12.0, 0.5);
    Bump b;
    // about 13 lattice points per radius; coarser bumps leak a discrete precursor ahead of the cone
    b.center = {5.0, 0.0, 0.0};
    b.radius_space = 4.0;
    b.radius_time = 3.0;
    Field f(g);
    for (int k = 0; k < g.n_time; ++k)
        for (int i = 0; i < g.n_space; ++i)
            for (int j = 0; j < g.n_space; ++j) {
                double p[3] = {g.t(k), g.x(i), g.x(j)};
                f.slice(k)[f.local(i, j, 0)] = b.value(p, 2);
            }
    Model m;
    m.V = Coefficient(0.5);
    m.h = Coefficient(1.0);
    std::vector<Field> us{solve_semilinear(m, f), solve_linear(m.V, f), solve_free(f)};
    const char* names[3] = {"semilinear", "linear", "free"};
    Outcome o{true, ""};
    for (int w = 0; w < 3; ++w) {
        const Field& u = us[w];
        double peak = u.max_abs(), outside = 0;
        for (int k = 0; k < g.n_time; ++k) {
            double R = b.radius_space + std::max(0.0, g.t(k) - (b.center[0] - b.radius_time)) + 2 * g.dx();
            for (int i = 0; i < g.n_space; ++i)
                for (int j = 0; j < g.n_space; ++j)
                    if (std::hypot(g.x(i), g.x(j)) > R)
                        outside = std::max(outside, std::abs(u.slice(k)[u.local(i, j, 0)]));
        }
        double rel = outside / peak;
        o.pass = o.pass && rel <= 1e-10;
        o.detail += fmt("%s %.2e; ", names[w], rel);
    }
    o.detail += "need <= 1e-10 x peak";
    return o;
}

// ---- 3. polarization oracle

Outcome polarization_oracle() {
    Layout L = small_layout();
    Model m;
    m.h = Coefficient(1.0);
    std::vector<double> eps{0.005, 0.01, 0.02, 0.04}, rel;
    for (double e : eps) {
        SourceSet set = make_source_set(L.sources, {e, e, e}, L.grid, L.dom);
        rel.push_back(linearize(m, set).rel_error);
    }
    double sl = slope(eps, rel);
    Outcome o;
    o.pass = rel[2] <= 0.05 && sl >= 1.7 && sl <= 2.3;
    o.detail = fmt("rel %.3g %.3g %.3g %.3g, default eps 0.02 -> %.4f (need <= 0.05), slope %.3f (need [1.7, 2.3])",
                   rel[0], rel[1], rel[2], rel[3], rel[2], sl);
    return o;
}

// ---- 4. second-order vanishing

Outcome second_order() {
    Layout L = small_layout();
    Model zero;
    Model cubic;
    cubic.h = Coefficient(1.0);
    double e0 = 0.02;
    SourceSet s0 = make_source_set(L.sources, {e0, e0, e0}, L.grid, L.dom);
    auto p0 = pair_polarization_norms(zero, s0);
    double coef0 = std::max({p0[0], p0[1], p0[2]}) / (e0 * e0);
    std::vector<double> eps{0.01, 0.02, 0.04}, pn;
    for (double e : eps) {
        SourceSet s = make_source_set(L.sources, {e, e, e}, L.grid, L.dom);
        auto p = pair_polarization_norms(cubic, s);
        pn.push_back(std::max({p[0], p[1], p[2]}));
    }
    double sl = slope(eps, pn);
    Outcome o;
    o.pass = coef0 <= 1e-8 && sl >= 2.7;
    o.detail = fmt("h = 0 pair coefficient %.2e (need <= 1e-8), h = 1 pair norms %.3g %.3g %.3g slope %.3f (need >= 2.7)",
                   coef0, pn[0], pn[1], pn[2], sl);
    return o;
}

// ---- 5. kappa system

Outcome kappa_system() {
    double worst_res = 0, kmin = 1e300, kmax = -1e300;
    for (int i = 1; i <= 50; ++i)
        for (int j = 1; j <= 50; ++j) {
            double r = 0.7 * i / 50, r0 = 0.7 * j / 50;
            auto k = solve_kappa(r, r0);
            worst_res = std::max(worst_res, kappa_residual(r, r0, k));
            for (double v : k) {
                kmin = std::min(kmin, v);
                kmax = std::max(kmax, v);
            }
        }
    auto k = solve_kappa(0.6, 0.6);
    double dev = std::max({std::abs(k[0] - 2.88), std::abs(k[1] - 1.8), std::abs(k[2] - 1.44)});
    Outcome o;
    o.pass = worst_res <= 1e-12 && kmin >= 0.5 && kmax <= 4.5 && dev <= 1e-12;
    o.detail = fmt("max residual %.2e, kappa range [%.4f, %.4f], (0.6, 0.6) -> (%.12g, %.12g, %.12g) dev %.1e", worst_res,
                   kmin, kmax, k[0], k[1], k[2], dev);
    return o;
}

// ---- 6 and 10a. h-channel

Bump h_bump(const Point& c) {
    Bump b;
    b.center = c;
    b.radius_space = 19;
    b.radius_time = 57;
    b.plateau = 0.6;
    b.amplitude = 0.1;
    return b;
}

struct HRun {
    HChannelResult hit, miss;
    bool done = false;
};

HRun& h_runs() {
    static HRun r;
    if (r.done) return r;
    Layout L = big_layout();
    Model A;
    A.h = Coefficient(1.0);
    Model B = A;
    B.h.bumps.push_back(h_bump(L.cfg.y));
    std::vector<ProbeSpec> ps;
    for (double w : {18.0, 24.0, 30.0}) {
        ProbeSpec q = L.probe;
        q.cutoff_width = w;
        ps.push_back(q);
    }
    r.hit = run_h_channel(L, A, B, ps);
    // same bump rotated a quarter turn about the t-axis: it meets no interaction point
    Model C = A;
    C.h.bumps.push_back(h_bump(rotate_spatial(L.cfg.y, std::numbers::pi / 2)));
    r.miss = run_h_channel(L, A, C, {L.probe});
    r.done = true;
    return r;
}

Outcome h_channel() {
    HRun& r = h_runs();
    double est = r.hit.estimate[1], truth = r.hit.truth;
    double rel = std::abs(est - truth) / std::abs(truth);
    double miss = std::abs(r.miss.estimate[0]);
    Outcome o;
    o.pass = rel <= 0.2 && miss <= 1e-3;
    o.detail = fmt("estimate %.4f truth %.4f rel %.3f (need <= 0.2); missing bump |estimate| %.2e (need <= 1e-3); %.1fs",
                   est, truth, rel, miss, r.hit.seconds + r.miss.seconds);
    return o;
}

// ---- 7. V-channel

Coefficient v_bump(const Layout& L) {
    Coefficient V;
    Bump v;
    v.center = L.cfg.ray_out.at(0.5 * L.cfg.s_out);
    v.radius_space = 60;
    v.amplitude = 0.0025;
    v.t_on = L.cfg.y[0] + 2 * L.sigma;
    v.ramp = 15;
    V.bumps.push_back(v);
    return V;
}

Outcome v_channel() {
    Layout L = big_layout();
    Model m;
    m.h = Coefficient(1.0);
    m.V = v_bump(L);
    auto r = run_v_channel(L, m, L.probe, true);
    double rel = std::abs(r.v.estimate - r.truth) / std::abs(r.truth);
    Outcome o;
    o.pass = rel <= 0.2;
    o.detail = fmt("estimate %.4f quadrature %.4f rel %.3f (need <= 0.2); %.1fs", r.v.estimate, r.truth, rel, r.seconds);
    return o;
}

Outcome v_channel_r_scaling() {
    LayoutParams p;
    p.r = 0.6;
    p.r_sigma = {0.6, 0.3};
    Layout L = design_layout(p);
    Model m;
    m.h = Coefficient(1.0);
    m.V = v_bump(L);
    double res[2];
    double secs = 0;
    int i = 0;
    for (double r : {0.6, 0.3}) {
        Layout Lr = relayout(L, r);
        auto vr = run_v_channel(Lr, m, Lr.probe, true);
        res[i++] = vr.v.estimate - vr.truth;
        secs += vr.seconds;
    }
    double ratio = std::abs(res[0]) / std::abs(res[1]);
    Outcome o;
    o.pass = ratio >= 2.5 && ratio <= 6;
    o.detail = fmt("residual r=0.6 %.4g, r=0.3 %.4g, |res(0.6)|/|res(0.3)| %.3g (need [2.5, 6], r^2 predicts 4); %.1fs",
                   res[0], res[1], ratio, secs);
    return o;
}

// ---- 8 and 11. stability sweep

ExperimentConfig sweep_config() {
    std::string path = std::string(WAVEINV_SOURCE_DIR) + "/configs/sweep_small.json";
    return parse_config(load_config_document(path, {}), std::string(WAVEINV_SOURCE_DIR) + "/configs");
}

const StabilityReport& first_sweep() {
    static StabilityReport r;
    static bool done = false;
    if (!done) {
        r = run_stability_sweep(sweep_config());
        done = true;
    }
    return r;
}

Outcome trilinear_bound() {
    const StabilityReport& r = first_sweep();
    std::vector<double> d, e;
    for (const auto& row : r.rows)
        if (row.status == "ok" && row.delta > 0 && row.trilinear > 0) {
            d.push_back(row.delta);
            e.push_back(row.trilinear);
        }
    Outcome o;
    if (d.size() < 3) {
        o.detail = "fewer than 3 usable rows";
        return o;
    }
    std::vector<std::pair<double, double>> rows;
    for (std::size_t i = 0; i < d.size(); ++i) rows.push_back({d[i], e[i]});
    Fit f = fit_exponent(rows);
    double C = 0, worst = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        C = std::max(C, e[i] / std::pow(d[i], 0.4));
        double fit = std::exp(f.intercept + f.slope * std::log(d[i]));
        worst = std::max(worst, std::max(e[i] / fit, fit / e[i]));
    }
    bool bound = true;
    for (std::size_t i = 0; i < d.size(); ++i) bound = bound && e[i] <= C * std::pow(d[i], 0.4) * (1 + 1e-12);
    double span = std::log10(*std::max_element(d.begin(), d.end()) / *std::min_element(d.begin(), d.end()));
    o.pass = bound && span >= 1.5 && worst <= 2 && f.slope >= 0.4;
    o.detail = fmt("%zu rows, delta span %.2f decades (need >= 1.5), C %.4g, free slope %.3f (need >= 0.4), worst row/fit "
                   "factor %.3f (need <= 2)",
                   d.size(), span, C, f.slope, worst);
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const StabilityReport& a = first_sweep();
    StabilityReport b = run_stability_sweep(sweep_config());
    fs::path base = fs::temp_directory_path() / ("waveinv_acceptance_" + std::to_string(::getpid()));
    write_report(a, (base / "a").string(), false);
    write_report(b, (base / "b").string(), false);
    bool same = true;
    for (const char* f : {"report.json", "report.csv", "plots.gp"}) {
        std::string x = slurp(base / "a" / f), y = slurp(base / "b" / f);
        same = same && !x.empty() && x == y;
    }
    fs::remove_all(base);
    return {same, same ? "report.json, report.csv, plots.gp bitwise identical" : "reports differ"};
}

// ---- 9. pointwise chain on random pairs

Outcome pointwise_chain() {
    DomainSpec dom{80, 38, 34, 30, 4, 8};
    SpacetimeGrid g = SpacetimeGrid::make(2, 120, 241, 80, 0.5);
    RaySampling rs;
    rs.n_dirs = 32;
    rs.n_t = 17;
    rs.n_r = 6;
    rs.n_ang = 48;
    rs.step = 0.25;
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> U(0, 1);
    auto random_bump = [&]() {
        Bump b;
        b.radius_space = 4 + 6 * U(rng);
        b.radius_time = b.radius_space * (1 + U(rng));
        b.plateau = 0.5 * U(rng);
        b.amplitude = (U(rng) < 0.5 ? -1 : 1) * (0.05 + 0.45 * U(rng));
        // center in D_2 outside the closed ball B(rho + radius)
        for (;;) {
            double t = dom.t2 + 12 + (dom.T - 2 * dom.t2 - 24) * U(rng);
            double rmax = std::min(t - dom.t2 + dom.rho2, dom.rho2 + dom.T - dom.t2 - t);
            double rmin = dom.rho + b.radius_space;
            if (rmax <= rmin) continue;
            double r = rmin + (rmax - rmin) * U(rng), a = 2 * std::numbers::pi * U(rng);
            b.center = {t, r * std::cos(a), r * std::sin(a)};
            return b;
        }
    };
    int fails = 0;
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Coefficient V, W;
        V.bumps.push_back(random_bump());
        W.bumps.push_back(random_bump());
        Coefficient diff = V - W;
        auto s = sup_discrepancy(V, W, dom, rs);
        double M = lipschitz_bound(diff, Region::diamond(dom, 2), g);
        // sup |V - W| over the lattice of D_2; the difference vanishes off the two bump supports
        double sup = 0;
        for (const Coefficient* c : {&V, &W}) {
            const Bump& b = c->bumps[0];
            for (int k = 0; k < g.n_time; ++k) {
                double t = g.t(k);
                if (t < dom.t2 || t > dom.T - dom.t2 || std::abs(t - b.center[0]) > b.radius_time) continue;
                for (int i = 0; i < g.n_space; ++i) {
                    if (std::abs(g.x(i) - b.center[1]) > b.radius_space) continue;
                    for (int j = 0; j < g.n_space; ++j) {
                        if (std::abs(g.x(j) - b.center[2]) > b.radius_space) continue;
                        Point p{t, g.x(i), g.x(j)};
                        if (in_diamond(p, dom, 2)) sup = std::max(sup, std::abs(diff.value(p)));
                    }
                }
            }
        }
        double lhs = sup * sup, rhs = 4 * std::sqrt(2.0) * M * 2 * s.sup * 1.1;
        worst = std::max(worst, lhs / rhs);
        if (lhs > rhs) ++fails;
    }
    Outcome o;
    o.pass = fails == 0;
    o.detail = fmt("%d of 100 pairs violate sup^2 <= 4 sqrt2 M (2 sup I) 1.1, worst lhs/rhs %.3f", fails, worst);
    return o;
}

// ---- 10. probe robustness

Outcome probe_robustness() {
    HRun& r = h_runs();
    double mid = r.hit.estimate[1];
    double dev = std::max(std::abs(r.hit.estimate[0] - mid), std::abs(r.hit.estimate[2] - mid)) / std::abs(mid);

    // conormal input with symbol theta^(-m) along psi, m = -3 mu + 1/2
    ProbeSpec p;
    p.s = 4;
    const double m = p.principal_order();
    p.cutoff_width = 80;
    p.zeta.c = {-1, -1, 0};
    p.tau_ladder = {1.0, 1 / 1.08, 1 / 1.16, 1 / 1.25};
    SpacetimeGrid g = SpacetimeGrid::make(2, 84, 211, 168, 0.5);
    p.z = {g.t(g.n_time / 2), 0.0, 0.0};
    Window w = Window::ball(g, p.z, p.cutoff_width);
    int k0 = 0;
    while (g.t(k0) < p.z[0] - p.cutoff_width) ++k0;
    int k1 = k0;
    while (k1 < g.n_time && g.t(k1) <= p.z[0] + p.cutoff_width) ++k1;
    Field f(g, w, k0, k1 - k0);
    const double dth = 0.002;
    std::map<long long, double> table;
    auto F = [&](double psi) {
        long long key = std::llround(psi / g.dt());
        auto it = table.find(key);
        if (it != table.end()) return it->second;
        double s = 0;
        for (double th = 0.6; th <= 1.8; th += dth) s += std::pow(th, -m) * std::cos(th * psi) * dth;
        table[key] = s;
        return s;
    };
    for (int k = k0; k < k1; ++k)
        for (int i = 0; i < w.cnt[0]; ++i)
            for (int j = 0; j < w.cnt[1]; ++j) {
                double pt[3] = {g.t(k), g.x(i + w.lo[0]), g.x(j + w.lo[1])};
                f.slice(k)[f.local(i + w.lo[0], j + w.lo[1], 0)] = F(p.phase(pt, 2));
            }
    ProbeResult pr = probe_field(f, p);
    Outcome o;
    o.pass = dev <= 0.1 && std::abs(pr.fitted_order - m) <= 0.5;
    o.detail = fmt("h estimate %.4f %.4f %.4f at cutoff 18/24/30, max change %.3f (need <= 0.1); conormal order %.3f vs "
                   "%.1f (need +-0.5)",
                   r.hit.estimate[0], r.hit.estimate[1], r.hit.estimate[2], dev, pr.fitted_order, m);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    std::string out_path;
    bool strict = false;
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        std::string a = argv[i];
        if (a == "--out" && i + 1 < argc)
            out_path = argv[++i];
        else if (a == "--strict")
            strict = true;
        else
            only.insert(std::stoi(a));
    }
    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"1 solver order", solver_order},
        {"2 finite propagation speed", propagation_speed},
        {"3 polarization oracle", polarization_oracle},
        {"4 second-order vanishing", second_order},
        {"5 kappa system", kappa_system},
        {"6 h-channel recovery", h_channel},
        {"7a V-channel recovery", v_channel},
        {"7b V-channel r-halving", v_channel_r_scaling},
        {"8 trilinear bound", trilinear_bound},
        {"9 pointwise chain", pointwise_chain},
        {"10 probe robustness", probe_robustness},
        {"11 determinism", determinism},
    };
    std::ofstream out;
    if (!out_path.empty()) out.open(out_path);
    int failed = 0, errors = 0;
    for (auto& [name, fn] : criteria) {
        if (!only.empty() && !only.count(std::stoi(name))) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
            ++errors;
        }
        if (!o.pass) ++failed;
        std::string line = fmt("%s %-28s %s [%.1fs]", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                               seconds_since(t0));
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (out) out << line << "\n";
    }
    std::printf("%d failed, %d errors\n", failed, errors);
    if (out) out << failed << " failed, " << errors << " errors\n";
    if (errors) return 2;
    return strict && failed ? 1 : 0;
}
