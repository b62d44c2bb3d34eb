#include "waveinv/geometry.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "waveinv/errors.hpp"

namespace waveinv {

void DomainSpec::validate() const {
    if (!(rho > rho1 && rho1 > rho2 && rho2 > 0))
        throw config_error("DomainSpec", "need rho > rho1 > rho2 > 0");
    if (!(t1 > 0 && t1 < t2 && t2 < T / 2))
        throw config_error("DomainSpec", "need 0 < t1 < t2 < T/2");
}

double DomainSpec::radius(int level) const { return level == 0 ? rho : level == 1 ? rho1 : rho2; }
double DomainSpec::inset(int level) const { return level == 0 ? 0.0 : level == 1 ? t1 : t2; }

bool Covector::light_like(double tol) const {
    double s = c[0] * c[0];
    for (std::size_t i = 1; i < c.size(); ++i) s -= c[i] * c[i];
    return std::abs(s) <= tol * std::max(1.0, c[0] * c[0]);
}

Point LightRay::at(double s) const {
    Point p(base.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = base[i] + s * velocity[i];
    return p;
}

double spatial_norm(const Point& p) {
    double s = 0;
    for (std::size_t i = 1; i < p.size(); ++i) s += p[i] * p[i];
    return std::sqrt(s);
}

Point rotate_spatial(const Point& p, double angle) {
    Point q = p;
    if (p.size() < 3 || angle == 0.0) return q;
    double c = std::cos(angle), s = std::sin(angle);
    q[1] = c * p[1] - s * p[2];
    q[2] = s * p[1] + c * p[2];
    return q;
}

bool in_cylinder(const Point& p, const DomainSpec& dom, int level) {
    double ti = dom.inset(level);
    if (!(p[0] > ti && p[0] < dom.T - ti)) return false;
    return spatial_norm(p) < dom.radius(level);
}

bool in_diamond(const Point& p, const DomainSpec& dom, int level) {
    const double eps = 1e-12;
    double ti = dom.inset(level), ri = dom.radius(level), t = p[0];
    if (t < ti - eps || t > dom.T - ti + eps) return false;
    double x = spatial_norm(p);
    return x <= t - ti + ri + eps && x <= ri + dom.T - ti - t + eps;
}

Point musical_raise(const Covector& xi) {
    if (xi.c.empty() || !xi.light_like(1e-10))
        throw domain_error("NotLightLike", "musical_raise needs a light-like covector");
    double x0 = xi.c[0];
    if (x0 == 0.0) throw domain_error("NotLightLike", "zero time component");
    Point v(xi.c.size());
    v[0] = 1.0;
    for (std::size_t i = 1; i < v.size(); ++i) v[i] = -xi.c[i] / x0;
    return v;
}

std::array<Covector, 4> standard_covectors(double r, double r0, int d) {
    if (!(r > 0 && r < 1) || !(r0 >= 0 && r0 < 1))
        throw domain_error("CovectorDomain", "need 0 < r < 1 and 0 <= r0 < 1");
    if (d != 2 && d != 3) throw config_error("Dimension", "d must be 2 or 3");
    double a = std::sqrt(1 - r * r), a0 = std::sqrt(1 - r0 * r0);
    auto mk = [d](double c0, double c1, double c2) {
        Covector k;
        k.c = {c0, c1, c2};
        if (d == 3) k.c.push_back(0.0);
        return k;
    };
    return {mk(1, -1, 0), mk(-1, a, r), mk(-1, a, -r), mk(-1, -a0, r0)};
}

std::array<double, 3> solve_kappa(double r, double r0) {
    auto cv = standard_covectors(r, r0, 2);
    Eigen::Matrix3d A;
    Eigen::Vector3d b;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) A(i, j) = cv[j].c[i];
        b(i) = r * r * cv[3].c[i];
    }
    Eigen::FullPivLU<Eigen::Matrix3d> lu(A);
    if (!lu.isInvertible() || std::abs(A.determinant()) < 1e-14)
        throw domain_error("SingularKappa", "kappa system is singular");
    Eigen::Vector3d k = lu.solve(b);
    k += lu.solve(b - A * k);  // one refinement step
    return {k(0), k(1), k(2)};
}

double kappa_residual(double r, double r0, const std::array<double, 3>& k) {
    auto cv = standard_covectors(r, r0, 2);
    double res = 0;
    for (int i = 0; i < 3; ++i) {
        double s = r * r * cv[3].c[i];
        for (int j = 0; j < 3; ++j) s -= k[j] * cv[j].c[i];
        res = std::max(res, std::abs(s));
    }
    return res;
}

bool in_causal_future(const Point& a, const Point& b, double tol) {
    double dt = b[0] - a[0];
    double dx = 0;
    for (std::size_t i = 1; i < a.size(); ++i) dx += (b[i] - a[i]) * (b[i] - a[i]);
    return dt >= std::sqrt(dx) - tol;
}

bool null_future(const Point& a, const Point& b, double tol) {
    double dt = b[0] - a[0];
    if (dt <= tol) return false;
    double dx = 0;
    for (std::size_t i = 1; i < a.size(); ++i) dx += (b[i] - a[i]) * (b[i] - a[i]);
    return std::abs(std::sqrt(dx) - dt) <= tol * std::max(1.0, dt);
}

static std::string fmt_point(const Point& p) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? ", " : "") << p[i];
    os << ")";
    return os.str();
}

InteractionConfig build_interaction(const DomainSpec& dom, const Point& y, const Point& z,
                                    double r, double s_in, double frame_angle) {
    dom.validate();
    const int d = static_cast<int>(y.size()) - 1;
    if (d != 2 && d != 3) throw config_error("Dimension", "points must have 3 or 4 components");
    if (z.size() != y.size()) throw config_error("Dimension", "y and z differ in dimension");
    if (!(r > 0 && r < 1) || !(s_in > 0)) throw domain_error("ConfigInfeasible", "need 0 < r < 1, s_in > 0");
    if (!null_future(y, z)) throw domain_error("ConfigInfeasible", "z - y is not future-pointing null");

    InteractionConfig c;
    c.y = y;
    c.z = z;
    c.r = r;
    c.s_in = s_in;
    c.s_out = z[0] - y[0];
    c.frame_angle = frame_angle;

    Point w(y.size(), 0.0);
    w[0] = 1.0;
    for (int i = 1; i <= d; ++i) w[i] = (z[i] - y[i]) / c.s_out;
    Point wl = rotate_spatial(w, -frame_angle);
    if (d == 3 && std::abs(wl[3]) > 1e-8)
        throw domain_error("ConfigInfeasible", "out-ray leaves the interaction plane");
    double a0 = -wl[1], r0 = wl[2];
    if (a0 < -1e-12 || r0 < -1e-12 || r0 >= 1)
        throw domain_error("ConfigInfeasible", "out-ray direction outside the admissible quadrant");
    c.r0 = std::max(0.0, r0);

    auto cv = standard_covectors(r, c.r0, d);
    for (int k = 0; k < 3; ++k) c.xi[k].c = rotate_spatial(cv[k].c, frame_angle);
    c.eta.c = rotate_spatial(cv[3].c, frame_angle);
    c.kappa = solve_kappa(r, c.r0);
    if (kappa_residual(r, c.r0, c.kappa) > 1e-12)
        throw domain_error("SingularKappa", "kappa residual above 1e-12");

    for (int k = 0; k < 3; ++k) {
        Point v = musical_raise(c.xi[k]);
        Point xk(y.size());
        for (std::size_t i = 0; i < xk.size(); ++i) xk[i] = y[i] - s_in * v[i];
        c.x[k] = xk;
        c.rays_in[k] = LightRay{xk, v, s_in};
        if (!in_cylinder(xk, dom, 0))
            throw domain_error("ConfigInfeasible", "x" + std::to_string(k + 1) + " = " + fmt_point(xk) + " not in Omega");
    }
    c.ray_out = LightRay{y, w, c.s_out};
    if (!in_cylinder(z, dom, 0)) throw domain_error("ConfigInfeasible", "z not in Omega");
    if (in_cylinder(y, dom, 0) || !in_diamond(y, dom, 0))
        throw domain_error("ConfigInfeasible", "y must lie in the diamond and outside Omega");
    for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
            if (j != k && in_causal_future(c.x[k], c.x[j]))
                throw domain_error("ConfigInfeasible", "source points are causally dependent");
    return c;
}

bool in_S_plus(const Point& x, const Point& y, const Point& z, const DomainSpec& dom) {
    if (!null_future(x, y) || !null_future(y, z)) return false;
    if (!in_cylinder(x, dom, 0) || !in_cylinder(z, dom, 0)) return false;
    if (in_cylinder(y, dom, 0)) return false;
    return in_diamond(x, dom, 0) && in_diamond(y, dom, 0) && in_diamond(z, dom, 0);
}

}  // namespace waveinv
