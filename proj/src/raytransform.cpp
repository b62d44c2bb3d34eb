#include "waveinv/raytransform.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "waveinv/errors.hpp"
#include "waveinv/parallel.hpp"

namespace waveinv {

double truncated_integral(const Coefficient& f, const Point& y, const Point& z, double max_step) {
    if (y.size() != z.size()) throw domain_error("NotNullSeparated", "dimension mismatch");
    if (!null_future(y, z, 1e-8)) throw domain_error("NotNullSeparated", "(y, z) is not a future null pair");
    double s_end = z[0] - y[0];
    if (s_end == 0.0) return 0.0;
    int n = std::max(1, static_cast<int>(std::ceil(s_end / max_step)));
    double h = s_end / n;
    Point p(y.size());
    double acc = 0;
    for (int i = 0; i <= n; ++i) {
        double s = i * h;
        for (std::size_t a = 0; a < p.size(); ++a) p[a] = y[a] + (z[a] - y[a]) * (s / s_end);
        double w = (i == 0 || i == n) ? 0.5 : 1.0;
        acc += w * f.value(p);
    }
    return acc * h;
}

namespace {

std::vector<Point> directions(int d, int n) {
    std::vector<Point> out;
    if (d == 2) {
        for (int i = 0; i < n; ++i) {
            double a = 2 * std::numbers::pi * i / n;
            out.push_back({std::cos(a), std::sin(a)});
        }
    } else {
        // Fibonacci sphere
        double ga = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < n; ++i) {
            double zc = 1.0 - 2.0 * (i + 0.5) / n;
            double rr = std::sqrt(1 - zc * zc);
            out.push_back({rr * std::cos(ga * i), rr * std::sin(ga * i), zc});
        }
    }
    return out;
}

}  // namespace

DiscrepancySummary sup_discrepancy(const Coefficient& fA, const Coefficient& fB, const DomainSpec& dom,
                                   const RaySampling& rs, bool keep_samples) {
    Coefficient diff = fA - fB;
    const double t_lo = dom.t2, t_hi = dom.T - dom.t2;
    int d = 2;
    for (const auto& b : fA.bumps) d = static_cast<int>(b.center.size()) - 1;
    for (const auto& b : fB.bumps) d = static_cast<int>(b.center.size()) - 1;
    if (fA.samples) d = fA.samples->grid().d;
    if (fB.samples) d = fB.samples->grid().d;
    auto dirs = directions(d, rs.n_dirs);
    auto ydirs = directions(d, rs.n_ang);

    std::vector<Point> ys;
    double spacing = 0;
    for (int it = 0; it < rs.n_t; ++it) {
        double t = rs.n_t == 1 ? 0.5 * (t_lo + t_hi) : t_lo + (t_hi - t_lo) * it / (rs.n_t - 1);
        double rmax = std::min(t - dom.t2 + dom.rho2, dom.rho2 + dom.T - dom.t2 - t);
        if (rmax < dom.rho) continue;
        for (int ir = 0; ir < rs.n_r; ++ir) {
            double r = rs.n_r == 1 ? dom.rho : dom.rho + (rmax - dom.rho) * ir / (rs.n_r - 1);
            for (const auto& u : ydirs) {
                Point y(d + 1);
                y[0] = t;
                for (int a = 0; a < d; ++a) y[a + 1] = r * u[a];
                if (!in_diamond(y, dom, 2)) continue;
                ys.push_back(y);
            }
            if (rs.n_r > 1) spacing = std::max(spacing, (rmax - dom.rho) / (rs.n_r - 1));
            spacing = std::max(spacing, 2 * std::numbers::pi * r / std::max(1, rs.n_ang));
        }
        if (rs.n_t > 1) spacing = std::max(spacing, (t_hi - t_lo) / (rs.n_t - 1));
    }
    if (ys.empty()) throw domain_error("EmptyPairSet", "no sample point in D_2 \\ Omega");

    struct Best {
        double v = 0;
        Point z;
        std::size_t pairs = 0;
        bool hit = false;
    };
    std::vector<Best> best(ys.size() * dirs.size());
    parallel_for(best.size(), [&](std::size_t q) {
        const Point& y = ys[q / dirs.size()];
        const Point& u = dirs[q % dirs.size()];
        Best b;
        Point p = y;
        double prev = diff.value(p), acc = 0;
        int n = static_cast<int>(std::ceil((t_hi - y[0]) / rs.step));
        for (int i = 1; i <= n; ++i) {
            double s = std::min(i * rs.step, t_hi - y[0]);
            double h = s - std::min((i - 1) * rs.step, t_hi - y[0]);
            p[0] = y[0] + s;
            for (int a = 0; a < d; ++a) p[a + 1] = y[a + 1] + s * u[a];
            double cur = diff.value(p);
            acc += 0.5 * h * (prev + cur);
            prev = cur;
            if (in_cylinder(p, dom, 2)) {
                ++b.pairs;
                if (!b.hit || std::abs(acc) > b.v) {
                    b.v = std::abs(acc);
                    b.z = p;
                    b.hit = true;
                }
            }
        }
        best[q] = b;
    });

    DiscrepancySummary out;
    out.y_samples = ys.size();
    out.y_spacing = spacing;
    bool any = false;
    for (std::size_t q = 0; q < best.size(); ++q) {
        const auto& b = best[q];
        out.pairs += b.pairs;
        if (!b.hit) continue;
        if (keep_samples) out.samples.push_back({ys[q / dirs.size()], b.z, b.v});
        if (!any || b.v > out.sup) {
            out.sup = b.v;
            out.argmax_y = ys[q / dirs.size()];
            out.argmax_z = b.z;
            any = true;
        }
    }
    if (!any) throw domain_error("EmptyPairSet", "no null pair (y, z) with z in Omega_2");
    // crude Lipschitz constant of the integrand from its bumps
    double lip = 0;
    for (const auto& b : diff.bumps) {
        double rmin = b.radius_space > 0 ? b.radius_space : 1e300;
        if (b.radius_time > 0) rmin = std::min(rmin, b.radius_time);
        if (std::isfinite(b.t_on) || std::isfinite(b.t_off)) rmin = std::min(rmin, b.ramp);
        double w = rmin * (1 - b.plateau);
        if (w < 1e300) lip += 2.0 * std::abs(b.amplitude) / w;
    }
    out.gap_correction = lip * spacing * (t_hi - t_lo);
    return out;
}

double lipschitz_bound(const Coefficient& f, const Region& region, const SpacetimeGrid& g) {
    const double h = g.dx();
    const int d = g.d;
    double t_lo = 0, t_hi = g.T, R = g.L;
    if (region.kind != RegionKind::Full) {
        t_lo = region.dom.inset(region.level);
        t_hi = region.dom.T - t_lo;
        R = region.radius_at(0.5 * (t_lo + t_hi));
    }
    int nt = std::max(1, static_cast<int>(std::floor((t_hi - t_lo) / h))) + 1;
    int nx = std::max(1, static_cast<int>(std::floor(2 * R / h))) + 1;
    std::size_t total = std::size_t(nt) * nx * nx * (d == 3 ? nx : 1);
    std::vector<double> g1(nt, 0.0), g2(nt, 0.0);
    parallel_for(std::size_t(nt), [&](std::size_t it) {
        double gm = 0, hm = 0;
        Point p(d + 1), q(d + 1);
        std::size_t per = total / nt;
        for (std::size_t c = 0; c < per; ++c) {
            std::size_t rest = c;
            p[0] = t_lo + it * h;
            for (int a = 0; a < d; ++a) {
                p[a + 1] = -R + (rest % nx) * h;
                rest /= nx;
            }
            double r = spatial_norm(p);
            if (region.kind != RegionKind::Full && !region.contains(p[0], r, h, h)) continue;
            double f0 = f.value(p), g2s = 0;
            for (int a = 0; a <= d; ++a) {
                q = p;
                q[a] += h;
                double fp = f.value(q);
                q[a] -= 2 * h;
                double fm = f.value(q);
                double gr = (fp - fm) / (2 * h);
                g2s += gr * gr;
                hm = std::max(hm, std::abs(fp - 2 * f0 + fm) / (h * h));
            }
            gm = std::max(gm, std::sqrt(g2s));
        }
        g1[it] = gm;
        g2[it] = hm;
    });
    double M = *std::max_element(g1.begin(), g1.end());
    double H = *std::max_element(g2.begin(), g2.end());
    return M + std::sqrt(d + 1.0) * H * h;
}

double pointwise_bound(double sup_I, double M) {
    if (sup_I < 0 || M < 0) throw config_error("NegativeInput", "pointwise_bound needs sup_I >= 0 and M >= 0");
    return std::sqrt(4 * std::numbers::sqrt2 * M * sup_I);
}

void write_ray_csv(const DiscrepancySummary& s, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw config_error("OutputUnwritable", "cannot write " + path);
    os.precision(17);
    std::size_t d = s.samples.empty() ? 3 : s.samples[0].y.size();
    for (std::size_t a = 0; a < d; ++a) os << "y" << a << ",";
    for (std::size_t a = 0; a < d; ++a) os << "z" << a << ",";
    os << "I\n";
    for (const auto& r : s.samples) {
        for (double v : r.y) os << v << ",";
        for (double v : r.z) os << v << ",";
        os << r.value << "\n";
    }
}

}  // namespace waveinv
