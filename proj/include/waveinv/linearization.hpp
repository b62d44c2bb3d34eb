#pragma once
#include <array>
#include <utility>

#include "waveinv/solver.hpp"
#include "waveinv/sources.hpp"

namespace waveinv {

struct LinearizationResult {
    std::array<Field, 3> u_first;
    Field u123;
    Field u123_direct;
    std::array<double, 3> eps{0, 0, 0};
    double rel_error = 0;               // H^0(Omega) relative gap between u123 and u123_direct
    std::array<double, 3> pair_norms{};  // H^0(Omega) norms of W(1,2), W(1,3), W(2,3)
    double seconds = 0;
};

// Adds the 7 polarization members (singles, pairs, triple) to ev; returns the first index.
int add_polarization_members(Evolution& ev, const Model& m, const SourceSet& set);
// Member weights giving W(1,2,3) = P(123) - sum P(ij) + sum P(i).
std::vector<std::pair<int, double>> triple_combination(int first);

// Window covering Omega's spatial ball; linearization outputs live on it.
Window omega_window(const SpacetimeGrid& g, const DomainSpec& dom);

// W(1,2,3) on Omega from the 7 nonlinear solves (singles, pairs, triple).
Field polarization_W(const Model& m, const SourceSet& set);
// -W(1,2,3) / (6 eps1 eps2 eps3) restricted to Omega.
Field extract_u123(const Model& m, const SourceSet& set);
// (box + V) u123 = h u1 u2 u3 with (box + V) u_j = f_j, restricted to Omega.
Field u123_direct(const Model& m, const SourceSet& set);
// Norms of the pair polarizations W(i,j) on Omega and of eps_j u_j.
std::array<double, 3> pair_polarization_norms(const Model& m, const SourceSet& set,
                                              std::array<double, 3>* single_norms = nullptr);
// max over pairs of |W(i,j)| / max(|eps_i u_i|, |eps_j u_j|)
double second_order_vanishes(const Model& m, const SourceSet& set);

struct FreeSplit {
    Field fre, rem;
    double identity_gap = 0;  // relative gap of the rem identity check
};
// u_fre = solve_free(f), u_rem = solve_linear(V, f) - u_fre; verifies
// u_rem = solve_linear(V, -V u_fre) up to tol (relative).
FreeSplit split_free_remainder(const Coefficient& V, const Field& f, double tol = 1e-2);

// All linearization fields in one lockstep run.
LinearizationResult linearize(const Model& m, const SourceSet& set);

// |extract_u123(mA) - extract_u123(mB)| in H^s(Omega) with eps = delta^(1/5).
double trilinear_discrepancy(const Model& mA, const Model& mB, const SourceSet& set, double delta, int s = 0);

}  // namespace waveinv
