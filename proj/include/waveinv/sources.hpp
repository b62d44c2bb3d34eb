#pragma once
#include <array>

#include "waveinv/geometry.hpp"
#include "waveinv/grid.hpp"

namespace waveinv {

struct SourceSpec {
    Point center;
    Covector direction;
    double sigma = 1.0;
    double lambda = 4.0;
    int k = 1;
    int s = 4;  // Sobolev order of the unit normalization; order mu = -s - 3/2
    double mu() const { return -s - 1.5; }
};

// Raises config errors if the 4 sigma ball leaves Omega or lambda sigma < 4.
void validate_source(const SourceSpec& spec, const DomainSpec& dom);

// Gaussian envelope times cos(lambda <p - center, direction>), cut at 4 sigma.
double packet_profile(const SourceSpec& spec, const double* p, int d);

// Analytic packet with its normalization constant, so solvers can evaluate
// sources on the fly without storing the field.
struct Packet {
    SourceSpec spec;
    double scale = 1.0;
    double support_radius() const { return 4.0 * spec.sigma; }
    // adds w * packet at level k on window win (row-major out)
    void accumulate(const SpacetimeGrid& g, int k, const Window& win, double w, double* out) const;
    bool active(double t) const;
};

// Realized field on the window of its support, normalized to unit H^s(Omega).
Field realize_packet(const SourceSpec& spec, const SpacetimeGrid& g, const DomainSpec& dom,
                     Packet* packet = nullptr);

struct SourceSet {
    std::array<SourceSpec, 3> specs;
    std::array<Field, 3> fields;
    std::array<Packet, 3> packets;
    std::array<double, 3> eps{0, 0, 0};
    DomainSpec dom;
};

SourceSet make_source_set(const std::array<SourceSpec, 3>& specs, const std::array<double, 3>& eps,
                          const SpacetimeGrid& g, const DomainSpec& dom);
Field compose(const SourceSet& set);

}  // namespace waveinv
