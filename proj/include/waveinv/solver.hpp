#pragma once
#include <array>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "waveinv/coefficient.hpp"
#include "waveinv/grid.hpp"
#include "waveinv/sources.hpp"

namespace waveinv {

struct Model {
    Coefficient V;
    Coefficient h;
    double h_floor = 0.0;
    // checks min |h| >= h_floor on the lattice levels of g (skipped when h_floor = 0)
    void validate(const SpacetimeGrid& g) const;
};

// One solution evolved by the engine:
// (box + V) u + h_self u^3 = sum packets + field + h_prod u_a u_b u_c.
struct Member {
    const Coefficient* V = nullptr;
    const Coefficient* h_self = nullptr;
    std::vector<std::pair<const Packet*, double>> packets;
    const Field* field = nullptr;
    double field_weight = 1.0;
    const Coefficient* h_prod = nullptr;
    std::array<int, 3> prod{-1, -1, -1};
    double prod_weight = 1.0;
    // sup |u| above this raises BlowUp; <= 0 means 1e6 times the source peak
    double guard = 0.0;
};

// Leapfrog evolution of several members in lockstep with zero past data and
// homogeneous Dirichlet walls. Observers see every time level once.
class Evolution {
public:
    explicit Evolution(const SpacetimeGrid& g);
    int add(Member m);
    using Observer = std::function<void(int k, const Evolution&)>;
    void run(const std::vector<Observer>& observers);

    const SpacetimeGrid& grid() const { return g_; }
    const Window& window() const { return full_; }
    int size() const { return static_cast<int>(members_.size()); }
    const double* level(int m) const { return cur_[m].data(); }

private:
    struct Cache {
        const Coefficient* c;
        std::vector<double> v;
        int k = -1;
    };
    const double* coeff_slice(const Coefficient* c, int k);
    double source_peak(const Member& m) const;

    SpacetimeGrid g_;
    Window full_;
    std::vector<Member> members_;
    std::vector<std::vector<double>> prev_, cur_, next_;
    std::vector<std::unique_ptr<Cache>> cache_;
};

// Observer storing sum_i c_i u_{m_i} on the target's window and levels.
Evolution::Observer record_into(Field& target, std::vector<std::pair<int, double>> combo);

Field solve_semilinear(const Model& m, const Field& f, const Window* out = nullptr);
Field solve_linear(const Coefficient& V, const Field& f, const Window* out = nullptr);
Field solve_free(const Field& f, const Window* out = nullptr);
// restrict(solve_semilinear(m, f), Omega)
Field source_to_solution(const Model& m, const Field& f, const DomainSpec& dom);

// Discrete leapfrog energy of levels (u^{k-1}, u^k) of a full-window field.
double discrete_energy(const Field& u, int k);

}  // namespace waveinv
