#include "waveinv/linearization.hpp"

#include <chrono>
#include <cmath>

#include "waveinv/errors.hpp"

namespace waveinv {

Window omega_window(const SpacetimeGrid& g, const DomainSpec& dom) {
    return Window::ball(g, Point(g.d + 1, 0.0), dom.rho + g.dx());
}

namespace {

// Subsets in the order {1},{2},{3},{1,2},{1,3},{2,3},{1,2,3}.
constexpr std::array<std::array<int, 3>, 7> kSubsets{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0},
                                                      {1, 0, 1}, {0, 1, 1}, {1, 1, 1}}};

// Adds the 7 polarization members; returns the index of the first.
int add_polarization(Evolution& ev, const Model& m, const SourceSet& set) {
    int first = -1;
    for (const auto& sub : kSubsets) {
        Member mb;
        mb.V = &m.V;
        mb.h_self = &m.h;
        for (int j = 0; j < 3; ++j)
            if (sub[j]) mb.packets.push_back({&set.packets[j], set.eps[j]});
        int id = ev.add(mb);
        if (first < 0) first = id;
    }
    return first;
}

// W(1,2,3) = P(123) - sum P(ij) + sum P(i)
std::vector<std::pair<int, double>> triple_combo(int p) {
    return {{p + 6, 1.0}, {p + 3, -1.0}, {p + 4, -1.0}, {p + 5, -1.0}, {p, 1.0}, {p + 1, 1.0}, {p + 2, 1.0}};
}

std::vector<std::pair<int, double>> pair_combo(int p, int which) {
    static constexpr int a[3] = {0, 0, 1}, b[3] = {1, 2, 2};
    return {{p + 3 + which, 1.0}, {p + a[which], -1.0}, {p + b[which], -1.0}};
}

// Adds u1, u2, u3 and the direct u123; returns the index of u1.
int add_direct(Evolution& ev, const Model& m, const SourceSet& set) {
    int first = -1;
    for (int j = 0; j < 3; ++j) {
        Member mb;
        mb.V = &m.V;
        mb.packets.push_back({&set.packets[j], 1.0});
        int id = ev.add(mb);
        if (first < 0) first = id;
    }
    Member d;
    d.V = &m.V;
    d.h_prod = &m.h;
    d.prod = {first, first + 1, first + 2};
    ev.add(d);
    return first;
}

}  // namespace

int add_polarization_members(Evolution& ev, const Model& m, const SourceSet& set) {
    return add_polarization(ev, m, set);
}

std::vector<std::pair<int, double>> triple_combination(int first) { return triple_combo(first); }

namespace {

Region omega(const SourceSet& set) { return Region::cylinder(set.dom, 0); }

void check_eps(const SourceSet& set) {
    for (double e : set.eps)
        if (!(e > 0)) throw config_error("InvalidEpsilon", "extraction needs eps_j > 0");
}

}  // namespace

Field polarization_W(const Model& m, const SourceSet& set) {
    const SpacetimeGrid& g = set.fields[0].grid();
    m.validate(g);
    Evolution ev(g);
    int p = add_polarization(ev, m, set);
    Field W(g, omega_window(g, set.dom));
    ev.run({record_into(W, triple_combo(p))});
    W.check_finite("W");
    return restrict_field(W, omega(set));
}

Field extract_u123(const Model& m, const SourceSet& set) {
    check_eps(set);
    Field W = polarization_W(m, set);
    double c = -1.0 / (6.0 * set.eps[0] * set.eps[1] * set.eps[2]);
    for (double& v : W.data()) v *= c;
    return W;
}

Field u123_direct(const Model& m, const SourceSet& set) {
    const SpacetimeGrid& g = set.fields[0].grid();
    Evolution ev(g);
    int p = add_direct(ev, m, set);
    Field u(g, omega_window(g, set.dom));
    ev.run({record_into(u, {{p + 3, 1.0}})});
    u.check_finite("u123_direct");
    return restrict_field(u, omega(set));
}

std::array<double, 3> pair_polarization_norms(const Model& m, const SourceSet& set,
                                              std::array<double, 3>* single_norms) {
    const SpacetimeGrid& g = set.fields[0].grid();
    Evolution ev(g);
    int p = add_polarization(ev, m, set);
    int q = add_direct(ev, m, set);
    Window w = omega_window(g, set.dom);
    std::array<Field, 3> pw{Field(g, w), Field(g, w), Field(g, w)};
    std::array<Field, 3> sw{Field(g, w), Field(g, w), Field(g, w)};
    std::vector<Evolution::Observer> obs;
    for (int i = 0; i < 3; ++i) {
        obs.push_back(record_into(pw[i], pair_combo(p, i)));
        obs.push_back(record_into(sw[i], {{q + i, set.eps[i]}}));
    }
    ev.run(obs);
    std::array<double, 3> out{};
    std::array<double, 3> sn{};
    for (int i = 0; i < 3; ++i) {
        out[i] = sobolev_norm(pw[i], 0, omega(set));
        sn[i] = sobolev_norm(sw[i], 0, omega(set));
    }
    if (single_norms) *single_norms = sn;
    return out;
}

double second_order_vanishes(const Model& m, const SourceSet& set) {
    std::array<double, 3> sn{};
    auto pn = pair_polarization_norms(m, set, &sn);
    static constexpr int a[3] = {0, 0, 1}, b[3] = {1, 2, 2};
    double worst = 0;
    for (int i = 0; i < 3; ++i) {
        double den = std::max(sn[a[i]], sn[b[i]]);
        if (den > 0) worst = std::max(worst, pn[i] / den);
    }
    return worst;
}

FreeSplit split_free_remainder(const Coefficient& V, const Field& f, double tol) {
    const SpacetimeGrid& g = f.grid();
    Evolution ev(g);
    Member fr;
    fr.field = &f;
    Member li = fr;
    li.V = &V;
    ev.add(fr);
    ev.add(li);
    FreeSplit out{Field(g), Field(g), 0};
    ev.run({record_into(out.fre, {{0, 1.0}}), record_into(out.rem, {{1, 1.0}, {0, -1.0}})});
    out.fre.check_finite("u_fre");
    // identity check: (box + V) u_rem = -V u_fre
    Field src(g);
    Window w = Window::full(g);
    std::vector<double> vs(w.size());
    for (int k = 0; k < g.n_time; ++k) {
        V.fill_slice(g, k, w, vs.data());
        const double* u = out.fre.slice(k);
        double* s = src.slice(k);
        for (std::size_t q = 0; q < vs.size(); ++q) s[q] = -vs[q] * u[q];
    }
    Field check = solve_linear(V, src);
    double num = 0, den = 0;
    for (std::size_t q = 0; q < check.data().size(); ++q) {
        num = std::max(num, std::abs(check.data()[q] - out.rem.data()[q]));
        den = std::max(den, std::abs(out.rem.data()[q]));
    }
    out.identity_gap = den > 0 ? num / den : num;
    if (out.identity_gap > tol)
        throw domain_error("SplitIdentity", "u_rem does not satisfy (box + V) u_rem = -V u_fre");
    return out;
}

LinearizationResult linearize(const Model& m, const SourceSet& set) {
    check_eps(set);
    auto t0 = std::chrono::steady_clock::now();
    const SpacetimeGrid& g = set.fields[0].grid();
    m.validate(g);
    Evolution ev(g);
    int p = add_polarization(ev, m, set);
    int q = add_direct(ev, m, set);
    Window w = omega_window(g, set.dom);
    LinearizationResult r;
    r.eps = set.eps;
    r.u123 = Field(g, w);
    r.u123_direct = Field(g, w);
    std::array<Field, 3> pw{Field(g, w), Field(g, w), Field(g, w)};
    std::vector<Evolution::Observer> obs;
    double c = -1.0 / (6.0 * set.eps[0] * set.eps[1] * set.eps[2]);
    auto tri = triple_combo(p);
    for (auto& [id, coef] : tri) coef *= c;
    obs.push_back(record_into(r.u123, tri));
    obs.push_back(record_into(r.u123_direct, {{q + 3, 1.0}}));
    for (int i = 0; i < 3; ++i) {
        r.u_first[i] = Field(g, w);
        obs.push_back(record_into(r.u_first[i], {{q + i, 1.0}}));
        obs.push_back(record_into(pw[i], pair_combo(p, i)));
    }
    ev.run(obs);
    Region om = omega(set);
    r.u123 = restrict_field(r.u123, om);
    r.u123_direct = restrict_field(r.u123_direct, om);
    for (int i = 0; i < 3; ++i) {
        r.u_first[i] = restrict_field(r.u_first[i], om);
        r.pair_norms[i] = sobolev_norm(pw[i], 0, om);
    }
    r.u123.check_finite("u123");
    double dn = sobolev_norm(r.u123_direct, 0, om);
    double en = sobolev_norm(add(r.u123, r.u123_direct, 1.0, -1.0), 0, om);
    r.rel_error = dn > 0 ? en / dn : en;
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

double trilinear_discrepancy(const Model& mA, const Model& mB, const SourceSet& set, double delta, int s) {
    if (!(delta > 0)) throw config_error("InvalidDelta", "delta must be positive");
    SourceSet sd = set;
    double e = std::pow(delta, 0.2);
    sd.eps = {e, e, e};
    const SpacetimeGrid& g = set.fields[0].grid();
    Evolution ev(g);
    int pa = add_polarization(ev, mA, sd);
    int pb = add_polarization(ev, mB, sd);
    Field D(g, omega_window(g, set.dom));
    double c = -1.0 / (6.0 * e * e * e);
    std::vector<std::pair<int, double>> combo;
    for (auto [id, coef] : triple_combo(pa)) combo.push_back({id, c * coef});
    for (auto [id, coef] : triple_combo(pb)) combo.push_back({id, -c * coef});
    ev.run({record_into(D, combo)});
    D.check_finite("trilinear discrepancy");
    return sobolev_norm(D, s, omega(sd));
}

}  // namespace waveinv
