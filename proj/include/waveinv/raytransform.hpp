#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "waveinv/coefficient.hpp"
#include "waveinv/geometry.hpp"
#include "waveinv/grid.hpp"

namespace waveinv {

// Integral of f along the null segment from y to z, parametrized with unit
// time component, by the composite trapezoid rule with step <= max_step.
double truncated_integral(const Coefficient& f, const Point& y, const Point& z, double max_step = 0.05);

struct RaySample {
    Point y, z;
    double value = 0;
};

struct DiscrepancySummary {
    double sup = 0;
    Point argmax_y, argmax_z;
    std::size_t pairs = 0;      // null pairs (y, z) evaluated
    std::size_t y_samples = 0;
    double y_spacing = 0;       // largest gap of the y sample lattice
    double gap_correction = 0;  // Lipschitz bound of the integrand times y_spacing times the ray length
    std::vector<RaySample> samples;  // best |I| per (y, direction), for CSV export
};

struct RaySampling {
    int n_dirs = 16;
    int n_t = 8;      // time samples of y
    int n_r = 4;      // radial samples of y
    int n_ang = 16;   // angular samples of y
    double step = 0.25;
};

// sup |I_{fA - fB}(y, z)| over y in D_2 \ Omega and z in Omega_2 on a deterministic lattice.
DiscrepancySummary sup_discrepancy(const Coefficient& fA, const Coefficient& fB, const DomainSpec& dom,
                                   const RaySampling& rs, bool keep_samples = false);

// max spacetime central-difference gradient over the region's lattice points plus
// sqrt(d+1) * max second difference * dx
double lipschitz_bound(const Coefficient& f, const Region& region, const SpacetimeGrid& g);

// sqrt(4 sqrt(2) M sup_I)
double pointwise_bound(double sup_I, double M);

void write_ray_csv(const DiscrepancySummary& s, const std::string& path);

}  // namespace waveinv
