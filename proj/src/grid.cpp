#include "waveinv/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

#include "waveinv/errors.hpp"
#include "waveinv/parallel.hpp"

namespace waveinv {

SpacetimeGrid SpacetimeGrid::make(int d, double L, int n_space, double T, double cfl) {
    if (d != 2 && d != 3) throw config_error("Dimension", "d must be 2 or 3");
    if (n_space < 3 || L <= 0 || T <= 0 || cfl <= 0) throw config_error("Grid", "need n_space >= 3, L, T, cfl > 0");
    SpacetimeGrid g;
    g.d = d;
    g.L = L;
    g.n_space = n_space;
    g.T = T;
    g.cfl = cfl;
    double step = cfl * g.dx();
    g.n_time = static_cast<int>(std::ceil(T / step - 1e-9)) + 1;
    return g;
}

std::size_t SpacetimeGrid::slice_points() const {
    std::size_t n = 1;
    for (int a = 0; a < d; ++a) n *= n_space;
    return n;
}

void SpacetimeGrid::validate(const DomainSpec* dom) const {
    if (cfl > 1.0 / std::sqrt(double(d)) + 1e-12)
        throw domain_error("CflViolation", "cfl " + std::to_string(cfl) + " exceeds 1/sqrt(d)");
    if (dt() > 1.0 / std::sqrt(double(d)) * dx() * (1 + 1e-12))
        throw domain_error("CflViolation", "time step exceeds the stability bound");
    if (dom && !(L > dom->rho + T))
        throw config_error("Grid", "box half-extent L must exceed rho + T");
}

Window Window::full(const SpacetimeGrid& g) {
    Window w;
    for (int a = 0; a < g.d; ++a) w.cnt[a] = g.n_space;
    return w;
}

Window Window::ball(const SpacetimeGrid& g, const Point& c, double R) {
    Window w;
    double h = g.dx();
    for (int a = 0; a < g.d; ++a) {
        int lo = static_cast<int>(std::floor((c[a + 1] - R + g.L) / h));
        int hi = static_cast<int>(std::ceil((c[a + 1] + R + g.L) / h));
        lo = std::max(lo, 0);
        hi = std::min(hi, g.n_space - 1);
        if (hi < lo) hi = lo;
        w.lo[a] = lo;
        w.cnt[a] = hi - lo + 1;
    }
    return w;
}

Field::Field(const SpacetimeGrid& g) : Field(g, Window::full(g)) {}

Field::Field(const SpacetimeGrid& g, const Window& w, int k0, int nt) : g_(g), w_(w), k0_(k0) {
    nt_ = nt < 0 ? g.n_time - k0 : nt;
    data_.assign(std::size_t(nt_) * w_.size(), 0.0);
}

double Field::at(int k, int i, int j, int l) const {
    if (!has_level(k) || !w_.contains(i, j, l)) return 0.0;
    return slice(k)[local(i, j, l)];
}

void Field::check_finite(const std::string& what) const {
    for (double v : data_)
        if (!std::isfinite(v)) throw domain_error("NonFinite", what + " contains NaN or Inf");
}

double Field::max_abs() const {
    double m = 0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

bool Region::time_in(double t, double dt) const {
    if (kind == RegionKind::Full) return true;
    double ti = dom.inset(level);
    return t >= ti - 0.5 * dt && t <= dom.T - ti + 0.5 * dt;
}

double Region::radius_at(double t) const {
    if (kind == RegionKind::Full) return std::numeric_limits<double>::infinity();
    double ti = dom.inset(level), ri = dom.radius(level);
    if (kind == RegionKind::Cylinder) return ri;
    return std::min(t - ti + ri, ri + dom.T - ti - t);
}

bool Region::contains(double t, double r, double dt, double dx) const {
    if (kind == RegionKind::Full) return true;
    if (!time_in(t, dt)) return false;
    return r <= radius_at(t) + 0.5 * dx;
}

namespace {

// first derivative along a strided line; 2nd-order central inside,
// 2nd-order one-sided at the two ends
void diff_line(const double* u, double* out, int n, std::size_t stride, double h) {
    if (n == 1) {
        out[0] = 0.0;
        return;
    }
    if (n == 2) {
        double v = (u[stride] - u[0]) / h;
        out[0] = v;
        out[stride] = v;
        return;
    }
    double inv = 1.0 / (2 * h);
    out[0] = (-3 * u[0] + 4 * u[stride] - u[2 * stride]) * inv;
    for (int i = 1; i < n - 1; ++i) out[i * stride] = (u[(i + 1) * stride] - u[(i - 1) * stride]) * inv;
    std::size_t e = std::size_t(n - 1) * stride;
    out[e] = (3 * u[e] - 4 * u[e - stride] + u[e - 2 * stride]) * inv;
}

void diff_axis(const std::vector<double>& in, std::vector<double>& out, const Window& w, int axis, double h) {
    out.resize(in.size());
    std::array<std::size_t, 3> stride{std::size_t(w.cnt[1]) * w.cnt[2], std::size_t(w.cnt[2]), 1};
    int n = w.cnt[axis];
    std::size_t s = stride[axis];
    for (int i = 0; i < w.cnt[0]; ++i)
        for (int j = 0; j < w.cnt[1]; ++j)
            for (int l = 0; l < w.cnt[2]; ++l) {
                int idx[3] = {i, j, l};
                if (idx[axis] != 0) continue;
                std::size_t base = i * stride[0] + j * stride[1] + l;
                diff_line(in.data() + base, out.data() + base, n, s, h);
            }
}

double slice_hm_sq(const double* slice, const Window& w, int d, int m, double h, const std::vector<char>& mask) {
    std::size_t n = w.size();
    struct Item {
        std::vector<double> v;
        int last;
    };
    std::vector<Item> level{{std::vector<double>(slice, slice + n), 0}};
    auto sumsq = [&](const std::vector<double>& v) {
        double s = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask[i]) s += v[i] * v[i];
        return s;
    };
    double total = sumsq(level[0].v);
    for (int o = 1; o <= m; ++o) {
        std::vector<Item> next;
        for (const auto& it : level)
            for (int a = it.last; a < d; ++a) {
                Item ni;
                ni.last = a;
                diff_axis(it.v, ni.v, w, a, h);
                total += sumsq(ni.v);
                next.push_back(std::move(ni));
            }
        level = std::move(next);
    }
    return total * std::pow(h, d);
}

std::vector<char> region_mask(const Field& f, const Region& reg, int k) {
    const auto& g = f.grid();
    const auto& w = f.window();
    std::vector<char> mask(w.size(), 0);
    double t = g.t(k), dt = g.dt(), dx = g.dx();
    if (!reg.time_in(t, dt)) return mask;
    double R = reg.radius_at(t) + 0.5 * dx;
    for (int i = 0; i < w.cnt[0]; ++i)
        for (int j = 0; j < w.cnt[1]; ++j)
            for (int l = 0; l < w.cnt[2]; ++l) {
                double r2 = 0;
                int idx[3] = {i + w.lo[0], j + w.lo[1], l + w.lo[2]};
                for (int a = 0; a < g.d; ++a) {
                    double x = g.x(idx[a]);
                    r2 += x * x;
                }
                mask[(std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l] = std::sqrt(r2) <= R;
            }
    return mask;
}

}  // namespace

double sobolev_norm(const Field& f, int s, const Region& region) {
    if (s < 0) throw config_error("Sobolev", "s must be >= 0");
    if (f.empty()) return 0.0;
    const auto& g = f.grid();
    const auto& w = f.window();
    std::size_t n = w.size();
    std::vector<double> cur = f.data();
    double best = 0.0;
    for (int kt = 0; kt <= s; ++kt) {
        if (kt > 0) {
            if (f.nt() < 2) break;  // a single level carries no time derivative
            std::vector<double> nxt(cur.size());
            for (std::size_t p = 0; p < n; ++p) diff_line(cur.data() + p, nxt.data() + p, f.nt(), n, g.dt());
            cur.swap(nxt);
        }
        int m = s - kt;
        std::vector<double> per(f.nt(), 0.0);
        parallel_for(std::size_t(f.nt()), [&](std::size_t q) {
            int k = f.k0() + int(q);
            if (!region.time_in(g.t(k), g.dt())) return;
            auto mask = region_mask(f, region, k);
            per[q] = slice_hm_sq(cur.data() + q * n, w, g.d, m, g.dx(), mask);
        });
        for (double v : per) best = std::max(best, std::sqrt(v));
    }
    return best;
}

Field restrict_field(const Field& f, const Region& region) {
    Field out = f;
    bool any = false;
    for (int q = 0; q < f.nt(); ++q) {
        int k = f.k0() + q;
        auto mask = region_mask(f, region, k);
        double* s = out.slice(k);
        for (std::size_t p = 0; p < mask.size(); ++p) {
            if (mask[p])
                any = true;
            else
                s[p] = 0.0;
        }
    }
    if (!any) throw domain_error("EmptyRegion", "region does not intersect the field");
    return out;
}

Field add(const Field& a, const Field& b, double ca, double cb) {
    if (!(a.grid() == b.grid())) throw domain_error("GridMismatch", "fields live on different grids");
    Field out = a;
    for (double& v : out.data()) v *= ca;
    axpy(out, cb, b);
    return out;
}

void axpy(Field& y, double a, const Field& x) {
    if (!(y.grid() == x.grid())) throw domain_error("GridMismatch", "fields live on different grids");
    const auto& w = y.window();
    for (int q = 0; q < y.nt(); ++q) {
        int k = y.k0() + q;
        if (!x.has_level(k)) continue;
        double* ys = y.slice(k);
        for (int i = 0; i < w.cnt[0]; ++i)
            for (int j = 0; j < w.cnt[1]; ++j)
                for (int l = 0; l < w.cnt[2]; ++l) {
                    int gi = i + w.lo[0], gj = j + w.lo[1], gl = l + w.lo[2];
                    if (!x.window().contains(gi, gj, gl)) continue;
                    ys[(std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l] += a * x.slice(k)[x.local(gi, gj, gl)];
                }
    }
}

namespace {
void put64(std::ofstream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}
std::uint64_t get64(std::ifstream& is) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw config_error("WVF1", "truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
}
void putd(std::ofstream& os, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    put64(os, v);
}
double getd(std::ifstream& is) {
    std::uint64_t v = get64(is);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}
}  // namespace

void write_wvf(const Field& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw config_error("Output", "cannot write " + path);
    const auto& g = f.grid();
    os.write("WVF1", 4);
    put64(os, std::uint64_t(g.d));
    put64(os, std::uint64_t(g.n_space));
    put64(os, std::uint64_t(f.nt() == 1 ? 1 : g.n_time));
    putd(os, g.L);
    putd(os, g.T);
    int nt = f.nt() == 1 ? 1 : g.n_time;
    int n3 = g.d == 3 ? g.n_space : 1;
    for (int k = 0; k < nt; ++k) {
        int kk = f.nt() == 1 ? f.k0() : k;
        for (int i = 0; i < g.n_space; ++i)
            for (int j = 0; j < g.n_space; ++j)
                for (int l = 0; l < n3; ++l) putd(os, f.at(kk, i, j, l));
    }
}

Field read_wvf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw config_error("Input", "cannot read " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "WVF1", 4) != 0) throw config_error("WVF1", "bad magic in " + path);
    int d = int(get64(is));
    int n = int(get64(is));
    int nt = int(get64(is));
    double L = getd(is), T = getd(is);
    if ((d != 2 && d != 3) || n < 3 || nt < 1) throw config_error("WVF1", "bad header in " + path);
    SpacetimeGrid g;
    g.d = d;
    g.n_space = n;
    g.L = L;
    g.T = T;
    g.n_time = std::max(nt, 2);
    g.cfl = nt > 1 ? (T / (nt - 1)) / g.dx() : 0.5;
    Field f(g, Window::full(g), 0, nt);
    for (double& v : f.data()) v = getd(is);
    return f;
}

void write_slice_csv(const Field& f, int k, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw config_error("Output", "cannot write " + path);
    const auto& g = f.grid();
    const auto& w = f.window();
    os.precision(17);
    os << (g.d == 3 ? "x1,x2,x3,value\n" : "x1,x2,value\n");
    for (int i = 0; i < w.cnt[0]; ++i)
        for (int j = 0; j < w.cnt[1]; ++j)
            for (int l = 0; l < w.cnt[2]; ++l) {
                int gi = i + w.lo[0], gj = j + w.lo[1], gl = l + w.lo[2];
                os << g.x(gi) << "," << g.x(gj) << ",";
                if (g.d == 3) os << g.x(gl) << ",";
                os << f.at(k, gi, gj, gl) << "\n";
            }
}

}  // namespace waveinv
