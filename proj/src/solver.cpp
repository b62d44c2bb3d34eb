#include "waveinv/solver.hpp"

#include <algorithm>
#include <cmath>

#include "waveinv/errors.hpp"
#include "waveinv/parallel.hpp"

namespace waveinv {

void Model::validate(const SpacetimeGrid& g) const {
    if (h_floor <= 0) return;
    Window w = Window::full(g);
    std::vector<double> buf(w.size());
    int step = h.time_dependent() ? 1 : g.n_time;
    for (int k = 0; k < g.n_time; k += step) {
        h.fill_slice(g, k, w, buf.data());
        for (double v : buf)
            if (std::abs(v) < h_floor) throw config_error("VanishingH", "min |h| falls below h_floor");
    }
}

Evolution::Evolution(const SpacetimeGrid& g) : g_(g), full_(Window::full(g)) { g_.validate(nullptr); }

int Evolution::add(Member m) {
    for (int a : m.prod)
        if (m.h_prod && (a < 0 || a >= static_cast<int>(members_.size())))
            throw config_error("BadMember", "product source refers to an unknown member");
    if (m.field && !(m.field->grid() == g_)) throw config_error("GridMismatch", "source field grid differs");
    members_.push_back(std::move(m));
    return static_cast<int>(members_.size()) - 1;
}

const double* Evolution::coeff_slice(const Coefficient* c, int k) {
    for (auto& e : cache_)
        if (e->c == c) {
            if (e->k != k && (e->k < 0 || c->time_dependent())) {
                c->fill_slice(g_, k, full_, e->v.data());
            }
            e->k = k;
            return e->v.data();
        }
    auto e = std::make_unique<Cache>();
    e->c = c;
    e->v.resize(full_.size());
    c->fill_slice(g_, k, full_, e->v.data());
    e->k = k;
    cache_.push_back(std::move(e));
    return cache_.back()->v.data();
}

double Evolution::source_peak(const Member& m) const {
    double p = 0;
    for (const auto& [pk, w] : m.packets) p += std::abs(w) * pk->scale;
    if (m.field) p += std::abs(m.field_weight) * m.field->max_abs();
    return p;
}

void Evolution::run(const std::vector<Observer>& observers) {
    const std::size_t N = full_.size();
    const int M = size();
    prev_.assign(M, std::vector<double>(N, 0.0));
    cur_.assign(M, std::vector<double>(N, 0.0));
    next_.assign(M, std::vector<double>(N, 0.0));
    std::vector<double> guard(M);
    for (int m = 0; m < M; ++m) {
        double gd = members_[m].guard;
        if (gd <= 0) {
            double pk = source_peak(members_[m]);
            gd = pk > 0 ? 1e6 * pk : std::numeric_limits<double>::infinity();
        }
        guard[m] = members_[m].h_prod ? std::numeric_limits<double>::infinity() : gd;
    }
    auto notify = [&](int k) {
        for (const auto& o : observers) o(k, *this);
    };
    notify(0);
    if (g_.n_time > 1) notify(1);

    const int n = g_.n_space;
    const int d = g_.d;
    const double h2 = 1.0 / (g_.dx() * g_.dx());
    const double dt2 = g_.dt() * g_.dt();
    const std::size_t sj = (d == 3) ? std::size_t(n) : 1;  // stride of axis 1
    const std::size_t si = (d == 3) ? std::size_t(n) * n : std::size_t(n);
    const int nl = d == 3 ? n : 1;
    std::vector<double> src(N);

    for (int k = 1; k + 1 < g_.n_time; ++k) {
        for (int m = 0; m < M; ++m) {
            const Member& mb = members_[m];
            std::fill(src.begin(), src.end(), 0.0);
            double t = g_.t(k);
            bool any = false;
            for (const auto& [pk, w] : mb.packets)
                if (pk->active(t)) {
                    pk->accumulate(g_, k, full_, w, src.data());
                    any = true;
                }
            if (mb.field && mb.field->has_level(k)) {
                const Field& f = *mb.field;
                const Window& fw = f.window();
                const double* fs = f.slice(k);
                for (int i = 0; i < fw.cnt[0]; ++i)
                    for (int j = 0; j < fw.cnt[1]; ++j)
                        for (int l = 0; l < fw.cnt[2]; ++l)
                            src[(std::size_t(i + fw.lo[0]) * full_.cnt[1] + (j + fw.lo[1])) * full_.cnt[2] +
                                (l + fw.lo[2])] +=
                                mb.field_weight * fs[(std::size_t(i) * fw.cnt[1] + j) * fw.cnt[2] + l];
                any = true;
            }
            const double* hp = mb.h_prod ? coeff_slice(mb.h_prod, k) : nullptr;
            const double* Vs = (mb.V && !mb.V->is_zero()) ? coeff_slice(mb.V, k) : nullptr;
            const double* hs = (mb.h_self && !mb.h_self->is_zero()) ? coeff_slice(mb.h_self, k) : nullptr;
            const double* ua = hp ? cur_[mb.prod[0]].data() : nullptr;
            const double* ub = hp ? cur_[mb.prod[1]].data() : nullptr;
            const double* uc = hp ? cur_[mb.prod[2]].data() : nullptr;
            const double pw = mb.prod_weight;
            const double* u = cur_[m].data();
            const double* up = prev_[m].data();
            double* un = next_[m].data();
            const double* sp = (any ? src.data() : nullptr);
            parallel_for(std::size_t(n - 2), [&](std::size_t ii) {
                std::size_t i = ii + 1;
                for (int j = 1; j < n - 1; ++j)
                    for (int l = (d == 3 ? 1 : 0); l < (d == 3 ? nl - 1 : 1); ++l) {
                        std::size_t q = i * si + std::size_t(j) * sj + l;
                        double c = u[q];
                        double lap = u[q + si] + u[q - si] + u[q + sj] + u[q - sj] - 2.0 * d * c;
                        if (d == 3) lap += u[q + 1] + u[q - 1];
                        double rhs = lap * h2;
                        if (Vs) rhs -= Vs[q] * c;
                        if (hs) rhs -= hs[q] * c * c * c;
                        if (sp) rhs += sp[q];
                        if (hp) rhs += pw * hp[q] * ua[q] * ub[q] * uc[q];
                        un[q] = 2.0 * c - up[q] + dt2 * rhs;
                    }
            });
            // walls stay at zero: next_ only ever holds interior updates
        }
        std::swap(prev_, cur_);
        std::swap(cur_, next_);
        for (int m = 0; m < M; ++m) {
            if (!std::isfinite(guard[m]) && (k % 16) != 0) continue;
            double mx = 0;
            for (double v : cur_[m]) {
                double a = std::abs(v);
                if (!(a <= mx)) mx = a;  // NaN propagates through this branch
            }
            if (!std::isfinite(mx)) throw domain_error("BlowUp", "non-finite solution values");
            if (mx > guard[m])
                throw domain_error("BlowUp", "sup|u| exceeded the guard (source amplitude outside the perturbative regime)");
        }
        notify(k + 1);
    }
}

Evolution::Observer record_into(Field& target, std::vector<std::pair<int, double>> combo) {
    return [&target, combo = std::move(combo)](int k, const Evolution& ev) {
        if (!target.has_level(k)) return;
        const Window& w = target.window();
        const Window& fw = ev.window();
        double* out = target.slice(k);
        for (int i = 0; i < w.cnt[0]; ++i)
            for (int j = 0; j < w.cnt[1]; ++j)
                for (int l = 0; l < w.cnt[2]; ++l) {
                    std::size_t q = (std::size_t(i + w.lo[0]) * fw.cnt[1] + (j + w.lo[1])) * fw.cnt[2] + (l + w.lo[2]);
                    double v = 0;
                    for (const auto& [m, c] : combo) v += c * ev.level(m)[q];
                    out[(std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l] = v;
                }
    };
}

namespace {
Field run_single(Member mb, const Field& f, const Window* out) {
    const SpacetimeGrid& g = f.grid();
    Evolution ev(g);
    mb.field = &f;
    ev.add(mb);
    Field u = out ? Field(g, *out) : Field(g);
    ev.run({record_into(u, {{0, 1.0}})});
    u.check_finite("solution");
    return u;
}
}  // namespace

Field solve_semilinear(const Model& m, const Field& f, const Window* out) {
    m.validate(f.grid());
    Member mb;
    mb.V = &m.V;
    mb.h_self = &m.h;
    return run_single(mb, f, out);
}

Field solve_linear(const Coefficient& V, const Field& f, const Window* out) {
    Member mb;
    mb.V = &V;
    return run_single(mb, f, out);
}

Field solve_free(const Field& f, const Window* out) { return run_single(Member{}, f, out); }

Field source_to_solution(const Model& m, const Field& f, const DomainSpec& dom) {
    Window w = Window::ball(f.grid(), Point(f.grid().d + 1, 0.0), dom.rho);
    return restrict_field(solve_semilinear(m, f, &w), Region::cylinder(dom, 0));
}

double discrete_energy(const Field& u, int k) {
    const SpacetimeGrid& g = u.grid();
    if (k < 1 || !u.has_level(k) || !u.has_level(k - 1))
        throw config_error("EnergyLevels", "energy needs levels k-1 and k");
    const Window& w = u.window();
    const double* a = u.slice(k - 1);
    const double* b = u.slice(k);
    double dx = g.dx(), dt = g.dt();
    double kin = 0, pot = 0;
    auto idx = [&](int i, int j, int l) { return (std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l; };
    for (int i = 0; i < w.cnt[0]; ++i)
        for (int j = 0; j < w.cnt[1]; ++j)
            for (int l = 0; l < w.cnt[2]; ++l) {
                double v = (b[idx(i, j, l)] - a[idx(i, j, l)]) / dt;
                kin += v * v;
                // staggered gradient product: conserved exactly by the leapfrog scheme
                if (i + 1 < w.cnt[0]) {
                    pot += (a[idx(i + 1, j, l)] - a[idx(i, j, l)]) * (b[idx(i + 1, j, l)] - b[idx(i, j, l)]) / (dx * dx);
                }
                if (j + 1 < w.cnt[1]) {
                    pot += (a[idx(i, j + 1, l)] - a[idx(i, j, l)]) * (b[idx(i, j + 1, l)] - b[idx(i, j, l)]) / (dx * dx);
                }
                if (g.d == 3 && l + 1 < w.cnt[2]) {
                    pot += (a[idx(i, j, l + 1)] - a[idx(i, j, l)]) * (b[idx(i, j, l + 1)] - b[idx(i, j, l)]) / (dx * dx);
                }
            }
    return 0.5 * (kin + pot) * std::pow(dx, g.d);
}

}  // namespace waveinv
