#include "waveinv/sources.hpp"

#include <cmath>

#include "waveinv/errors.hpp"

namespace waveinv {

void validate_source(const SourceSpec& spec, const DomainSpec& dom) {
    int d = static_cast<int>(spec.center.size()) - 1;
    if (d < 2 || d > 3 || spec.direction.c.size() != spec.center.size())
        throw config_error("InvalidSource", "center and direction must share dimension 2 or 3");
    if (spec.sigma <= 0 || spec.lambda * spec.sigma < 4.0)
        throw config_error("InvalidSource", "need lambda * sigma >= 4");
    double R = 4.0 * spec.sigma;
    double t = spec.center[0];
    if (t - R <= 0 || t + R >= dom.T || spatial_norm(spec.center) + R >= dom.rho)
        throw config_error("SourceOutsideOmega", "4 sigma ball of source " + std::to_string(spec.k) +
                                                     " is not inside Omega");
}

double packet_profile(const SourceSpec& spec, const double* p, int d) {
    double r2 = 0, ph = 0;
    for (int a = 0; a <= d; ++a) {
        double u = p[a] - spec.center[a];
        r2 += u * u;
        ph += u * spec.direction.c[a];
    }
    double R = 4.0 * spec.sigma;
    if (r2 > R * R) return 0.0;
    return std::exp(-r2 / (2 * spec.sigma * spec.sigma)) * std::cos(spec.lambda * ph);
}

bool Packet::active(double t) const { return std::abs(t - spec.center[0]) <= support_radius(); }

void Packet::accumulate(const SpacetimeGrid& g, int k, const Window& win, double w, double* out) const {
    double t = g.t(k);
    if (!active(t)) return;
    Window b = Window::ball(g, spec.center, support_radius());
    double p[4] = {t, 0, 0, 0};
    for (int i = std::max(b.lo[0], win.lo[0]); i < std::min(b.lo[0] + b.cnt[0], win.lo[0] + win.cnt[0]); ++i)
        for (int j = std::max(b.lo[1], win.lo[1]); j < std::min(b.lo[1] + b.cnt[1], win.lo[1] + win.cnt[1]); ++j)
            for (int l = std::max(b.lo[2], win.lo[2]); l < std::min(b.lo[2] + b.cnt[2], win.lo[2] + win.cnt[2]);
                 ++l) {
                p[1] = g.x(i);
                p[2] = g.x(j);
                if (g.d == 3) p[3] = g.x(l);
                double v = packet_profile(spec, p, g.d);
                if (v != 0.0)
                    out[(std::size_t(i - win.lo[0]) * win.cnt[1] + (j - win.lo[1])) * win.cnt[2] + (l - win.lo[2])] +=
                        w * scale * v;
            }
}

Field realize_packet(const SourceSpec& spec, const SpacetimeGrid& g, const DomainSpec& dom, Packet* packet) {
    validate_source(spec, dom);
    if (static_cast<int>(spec.center.size()) != g.d + 1)
        throw config_error("InvalidSource", "source dimension does not match the grid");
    double R = 4.0 * spec.sigma;
    Window w = Window::ball(g, spec.center, R);
    int ka = std::max(0, static_cast<int>(std::floor((spec.center[0] - R) / g.dt())) - 1);
    int kb = std::min(g.n_time - 1, static_cast<int>(std::ceil((spec.center[0] + R) / g.dt())) + 1);
    Field f(g, w, ka, kb - ka + 1);
    Packet pk{spec, 1.0};
    for (int k = ka; k <= kb; ++k) pk.accumulate(g, k, w, 1.0, f.slice(k));
    double nrm = sobolev_norm(f, spec.s, Region::cylinder(dom, 0));
    if (!(nrm > 0)) throw domain_error("DegenerateSource", "packet vanishes on the lattice");
    for (double& v : f.data()) v /= nrm;
    pk.scale = 1.0 / nrm;
    if (packet) *packet = pk;
    return f;
}

SourceSet make_source_set(const std::array<SourceSpec, 3>& specs, const std::array<double, 3>& eps,
                          const SpacetimeGrid& g, const DomainSpec& dom) {
    SourceSet s;
    s.specs = specs;
    s.eps = eps;
    s.dom = dom;
    for (int j = 0; j < 3; ++j) s.fields[j] = realize_packet(specs[j], g, dom, &s.packets[j]);
    return s;
}

Field compose(const SourceSet& set) {
    const SpacetimeGrid& g = set.fields[0].grid();
    for (const auto& f : set.fields)
        if (!(f.grid() == g)) throw config_error("GridMismatch", "sources live on different grids");
    Field out(g);
    for (int j = 0; j < 3; ++j)
        if (set.eps[j] != 0.0) axpy(out, set.eps[j], set.fields[j]);
    return out;
}

}  // namespace waveinv
