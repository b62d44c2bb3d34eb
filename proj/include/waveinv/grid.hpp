#pragma once
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "waveinv/geometry.hpp"

namespace waveinv {

struct SpacetimeGrid {
    int d = 2;
    double L = 1.0;
    int n_space = 129;
    double T = 1.0;
    double cfl = 0.5;
    int n_time = 2;

    // n_time = ceil(T / (cfl dx)) + 1, so dt = T / (n_time - 1) <= cfl dx.
    static SpacetimeGrid make(int d, double L, int n_space, double T, double cfl);
    double dx() const { return 2.0 * L / (n_space - 1); }
    double dt() const { return n_time > 1 ? T / (n_time - 1) : 0.0; }
    double x(int i) const { return -L + i * dx(); }
    double t(int k) const { return k * dt(); }
    std::size_t slice_points() const;
    // stability and box invariants; dom may be null
    void validate(const DomainSpec* dom) const;
    bool operator==(const SpacetimeGrid& o) const {
        return d == o.d && L == o.L && n_space == o.n_space && T == o.T && n_time == o.n_time;
    }
};

// Spatial index box [lo, lo + cnt) per axis; unused axes have cnt 1.
struct Window {
    std::array<int, 3> lo{0, 0, 0};
    std::array<int, 3> cnt{1, 1, 1};
    static Window full(const SpacetimeGrid& g);
    // smallest box covering the closed ball |x - c| <= R, clipped to the grid
    static Window ball(const SpacetimeGrid& g, const Point& c, double R);
    std::size_t size() const { return std::size_t(cnt[0]) * cnt[1] * cnt[2]; }
    bool contains(int i, int j, int k) const {
        return i >= lo[0] && i < lo[0] + cnt[0] && j >= lo[1] && j < lo[1] + cnt[1] && k >= lo[2] &&
               k < lo[2] + cnt[2];
    }
};

// Samples on a window of the lattice for time levels [k0, k0 + nt).
// Values outside the window are zero.
class Field {
public:
    Field() = default;
    explicit Field(const SpacetimeGrid& g);
    Field(const SpacetimeGrid& g, const Window& w, int k0 = 0, int nt = -1);

    const SpacetimeGrid& grid() const { return g_; }
    const Window& window() const { return w_; }
    int k0() const { return k0_; }
    int nt() const { return nt_; }
    bool has_level(int k) const { return k >= k0_ && k < k0_ + nt_; }
    double* slice(int k) { return data_.data() + std::size_t(k - k0_) * w_.size(); }
    const double* slice(int k) const { return data_.data() + std::size_t(k - k0_) * w_.size(); }
    std::size_t local(int i, int j, int l) const {
        return (std::size_t(i - w_.lo[0]) * w_.cnt[1] + (j - w_.lo[1])) * w_.cnt[2] + (l - w_.lo[2]);
    }
    // value at time level k and global spatial index (i, j, l); zero outside
    double at(int k, int i, int j = 0, int l = 0) const;
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }
    bool empty() const { return data_.empty(); }
    void check_finite(const std::string& what) const;
    double max_abs() const;

private:
    SpacetimeGrid g_;
    Window w_;
    int k0_ = 0, nt_ = 0;
    std::vector<double> data_;
};

enum class RegionKind { Full, Cylinder, Diamond };

struct Region {
    RegionKind kind = RegionKind::Full;
    int level = 0;
    DomainSpec dom;
    static Region full() { return {}; }
    static Region cylinder(const DomainSpec& d, int level) { return {RegionKind::Cylinder, level, d}; }
    static Region diamond(const DomainSpec& d, int level) { return {RegionKind::Diamond, level, d}; }
    // Boundaries are rounded outward by half a lattice step.
    bool time_in(double t, double dt) const;
    double radius_at(double t) const;  // spatial slice radius (infinite for Full)
    bool contains(double t, double r, double dt, double dx) const;
};

double sobolev_norm(const Field& f, int s, const Region& region);
Field restrict_field(const Field& f, const Region& region);

Field add(const Field& a, const Field& b, double ca = 1.0, double cb = 1.0);
void axpy(Field& y, double a, const Field& x);  // y += a x on y's window

void write_wvf(const Field& f, const std::string& path);
Field read_wvf(const std::string& path);
void write_slice_csv(const Field& f, int k, const std::string& path);

}  // namespace waveinv
