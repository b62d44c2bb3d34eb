#pragma once
#include <limits>
#include <memory>
#include <vector>

#include "waveinv/geometry.hpp"
#include "waveinv/grid.hpp"

namespace waveinv {

// C-infinity step: 0 for x <= 0, 1 for x >= 1.
double smooth_step(double x);

// Smooth compactly supported bump. With radius_time > 0 the support is an
// ellipsoid in spacetime, otherwise a spatial ball (or all of space when
// radius_space <= 0). The profile equals 1 on the inner `plateau` fraction.
// An optional smooth gate switches it on at t_on and off at t_off.
struct Bump {
    Point center;
    double radius_space = 1.0;
    double radius_time = 0.0;
    double plateau = 0.0;
    double amplitude = 1.0;
    double t_on = -std::numeric_limits<double>::infinity();
    double t_off = std::numeric_limits<double>::infinity();
    double ramp = 1.0;

    double value(const double* p, int d) const;  // p = (t, x1, ..., xd)
    double gate(double t) const;
    bool active(double t) const;
    double peak() const { return amplitude; }
};

class Coefficient {
public:
    Coefficient() = default;
    explicit Coefficient(double c) : base(c) {}

    double base = 0.0;
    std::vector<Bump> bumps;
    // optional lattice samples (one level = static, full = spacetime); added to base
    std::shared_ptr<const Field> samples;

    double value(const Point& p) const;
    bool time_dependent() const;
    bool is_zero() const { return base == 0.0 && bumps.empty() && !samples; }
    // values at lattice level k on window w, row-major
    void fill_slice(const SpacetimeGrid& g, int k, const Window& w, double* out) const;
    Coefficient scaled(double c) const;  // c * this
};

Coefficient operator-(const Coefficient& a, const Coefficient& b);

}  // namespace waveinv
