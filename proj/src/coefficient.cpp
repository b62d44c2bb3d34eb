#include "waveinv/coefficient.hpp"

#include <algorithm>
#include <cmath>

#include "waveinv/errors.hpp"

namespace waveinv {

namespace {
double fpos(double u) { return u > 0 ? std::exp(-1.0 / u) : 0.0; }
}  // namespace

double smooth_step(double x) {
    if (x <= 0) return 0.0;
    if (x >= 1) return 1.0;
    double a = fpos(x), b = fpos(1 - x);
    return a / (a + b);
}

double Bump::gate(double t) const {
    double g = 1.0;
    if (std::isfinite(t_on)) g *= smooth_step((t - t_on) / ramp);
    if (std::isfinite(t_off)) g *= smooth_step((t_off - t) / ramp);
    return g;
}

bool Bump::active(double t) const {
    if (std::isfinite(t_on) && t <= t_on) return false;
    if (std::isfinite(t_off) && t >= t_off) return false;
    if (radius_time > 0 && std::abs(t - center[0]) >= radius_time) return false;
    return true;
}

double Bump::value(const double* p, int d) const {
    double q2 = 0;
    if (radius_time > 0) {
        double u = (p[0] - center[0]) / radius_time;
        q2 += u * u;
    }
    if (radius_space > 0) {
        for (int a = 1; a <= d; ++a) {
            double u = (p[a] - center[a]) / radius_space;
            q2 += u * u;
        }
    }
    if (q2 >= 1.0) return 0.0;
    double q = std::sqrt(q2);
    double prof = q <= plateau ? 1.0 : 1.0 - smooth_step((q - plateau) / (1.0 - plateau));
    if (prof == 0.0) return 0.0;
    return amplitude * prof * gate(p[0]);
}

namespace {
double sample_interp(const Field& f, const Point& p) {
    const auto& g = f.grid();
    double h = g.dx();
    int d = g.d;
    // multilinear in space, linear in time when the samples are spacetime
    double fk = 0;
    int k0 = f.k0(), k1 = f.k0();
    if (f.nt() > 1) {
        double kt = p[0] / g.dt();
        k0 = std::clamp(static_cast<int>(std::floor(kt)), f.k0(), f.k0() + f.nt() - 1);
        k1 = std::min(k0 + 1, f.k0() + f.nt() - 1);
        fk = std::clamp(kt - k0, 0.0, 1.0);
    }
    int lo[3] = {0, 0, 0};
    double fr[3] = {0, 0, 0};
    for (int a = 0; a < d; ++a) {
        double u = (p[a + 1] + g.L) / h;
        int i = static_cast<int>(std::floor(u));
        i = std::clamp(i, 0, g.n_space - 2);
        lo[a] = i;
        fr[a] = std::clamp(u - i, 0.0, 1.0);
    }
    double acc = 0;
    int corners = 1 << d;
    for (int tt = 0; tt < 2; ++tt) {
        double wt = tt ? fk : 1 - fk;
        if (wt == 0) continue;
        int k = tt ? k1 : k0;
        for (int c = 0; c < corners; ++c) {
            double w = wt;
            int idx[3] = {0, 0, 0};
            for (int a = 0; a < d; ++a) {
                int bit = (c >> a) & 1;
                idx[a] = lo[a] + bit;
                w *= bit ? fr[a] : 1 - fr[a];
            }
            if (w != 0) acc += w * f.at(k, idx[0], idx[1], idx[2]);
        }
    }
    return acc;
}
}  // namespace

double Coefficient::value(const Point& p) const {
    double v = base;
    int d = static_cast<int>(p.size()) - 1;
    for (const auto& b : bumps) v += b.value(p.data(), d);
    if (samples) v += sample_interp(*samples, p);
    return v;
}

bool Coefficient::time_dependent() const {
    for (const auto& b : bumps)
        if (b.radius_time > 0 || std::isfinite(b.t_on) || std::isfinite(b.t_off)) return true;
    return samples && samples->nt() > 1;
}

void Coefficient::fill_slice(const SpacetimeGrid& g, int k, const Window& w, double* out) const {
    std::size_t n = w.size();
    std::fill(out, out + n, base);
    double t = g.t(k);
    double p[4] = {t, 0, 0, 0};
    for (const auto& b : bumps) {
        if (!b.active(t)) continue;
        Window bw = w;
        if (b.radius_space > 0) {
            Window ball = Window::ball(g, b.center, b.radius_space);
            for (int a = 0; a < g.d; ++a) {
                int lo = std::max(w.lo[a], ball.lo[a]);
                int hi = std::min(w.lo[a] + w.cnt[a], ball.lo[a] + ball.cnt[a]);
                if (hi <= lo) goto next_bump;
                bw.lo[a] = lo;
                bw.cnt[a] = hi - lo;
            }
        }
        for (int i = bw.lo[0]; i < bw.lo[0] + bw.cnt[0]; ++i)
            for (int j = bw.lo[1]; j < bw.lo[1] + bw.cnt[1]; ++j)
                for (int l = bw.lo[2]; l < bw.lo[2] + bw.cnt[2]; ++l) {
                    p[1] = g.x(i);
                    if (g.d >= 2) p[2] = g.x(j);
                    if (g.d == 3) p[3] = g.x(l);
                    double v = b.value(p, g.d);
                    if (v != 0.0)
                        out[(std::size_t(i - w.lo[0]) * w.cnt[1] + (j - w.lo[1])) * w.cnt[2] + (l - w.lo[2])] += v;
                }
    next_bump:;
    }
    if (samples) {
        int kk = samples->nt() > 1 ? k : samples->k0();
        for (int i = 0; i < w.cnt[0]; ++i)
            for (int j = 0; j < w.cnt[1]; ++j)
                for (int l = 0; l < w.cnt[2]; ++l)
                    out[(std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l] +=
                        samples->at(kk, i + w.lo[0], j + w.lo[1], l + w.lo[2]);
    }
}

Coefficient Coefficient::scaled(double c) const {
    Coefficient out = *this;
    out.base *= c;
    for (auto& b : out.bumps) b.amplitude *= c;
    if (samples) {
        auto f = std::make_shared<Field>(*samples);
        for (double& v : f->data()) v *= c;
        out.samples = f;
    }
    return out;
}

Coefficient operator-(const Coefficient& a, const Coefficient& b) {
    Coefficient out;
    out.base = a.base - b.base;
    out.bumps = a.bumps;
    for (auto bb : b.bumps) {
        bb.amplitude = -bb.amplitude;
        out.bumps.push_back(bb);
    }
    if (a.samples && b.samples) {
        auto f = std::make_shared<Field>(add(*a.samples, *b.samples, 1.0, -1.0));
        out.samples = f;
    } else if (a.samples) {
        out.samples = a.samples;
    } else if (b.samples) {
        auto f = std::make_shared<Field>(*b.samples);
        for (double& v : f->data()) v = -v;
        out.samples = f;
    }
    return out;
}

}  // namespace waveinv
