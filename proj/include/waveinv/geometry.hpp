#pragma once
#include <array>
#include <vector>

namespace waveinv {

// Spacetime point or tuple, time component first: (t, x1, ..., xd).
using Point = std::vector<double>;

struct DomainSpec {
    double T = 0, rho = 0, rho1 = 0, rho2 = 0, t1 = 0, t2 = 0;
    void validate() const;  // throws config error on violated invariants
    double radius(int level) const;
    double inset(int level) const;
};

struct Covector {
    Point c;
    bool light_like(double tol = 1e-12) const;
};

struct LightRay {
    Point base;
    Point velocity;  // t-component 1, unit spatial part
    double s_max = 0;
    Point at(double s) const;
};

struct InteractionConfig {
    std::array<Point, 3> x;
    Point y, z;
    double r = 0, r0 = 0;
    double s_in = 0, s_out = 0;
    double frame_angle = 0;  // rotation of the standard planar layout about the t-axis
    std::array<Covector, 3> xi;
    Covector eta;
    std::array<double, 3> kappa{};
    std::array<LightRay, 3> rays_in;
    LightRay ray_out;
    int d() const { return static_cast<int>(y.size()) - 1; }
};

double spatial_norm(const Point& p);
Point rotate_spatial(const Point& p, double angle);

bool in_cylinder(const Point& p, const DomainSpec& dom, int level);
bool in_diamond(const Point& p, const DomainSpec& dom, int level);

Point musical_raise(const Covector& xi);
// xi_1..3 and eta of the planar layout; d = 3 appends a zero component.
std::array<Covector, 4> standard_covectors(double r, double r0, int d = 2);
std::array<double, 3> solve_kappa(double r, double r0);
// max-norm residual of r^2 eta - sum kappa_j xi_j
double kappa_residual(double r, double r0, const std::array<double, 3>& k);

InteractionConfig build_interaction(const DomainSpec& dom, const Point& y, const Point& z,
                                    double r, double s_in, double frame_angle = 0.0);
bool in_S_plus(const Point& x, const Point& y, const Point& z, const DomainSpec& dom);
// true if b lies in the closed causal future of a
bool in_causal_future(const Point& a, const Point& b, double tol = 1e-10);
// true if b - a is future-pointing and null
bool null_future(const Point& a, const Point& b, double tol = 1e-8);

}  // namespace waveinv
