#pragma once
#include <complex>
#include <memory>
#include <vector>

#include "waveinv/geometry.hpp"
#include "waveinv/grid.hpp"
#include "waveinv/linearization.hpp"
#include "waveinv/solver.hpp"

namespace waveinv {

using cplx = std::complex<double>;

struct ProbeSpec {
    Point z;
    Covector zeta;
    double cutoff_width = 24.0;  // support radius R of phi
    std::vector<double> tau_ladder;
    int s = 4;
    double noise_floor = 1e-12;
    double max_fit_residual = 0.5;

    double mu() const { return -s - 1.5; }
    double principal_order() const { return -3 * mu() + 0.5; }
    double remainder_order() const { return -3 * mu() + 1.5; }
    // Gaussian of standard deviation R/4 times a smooth taper on [0.75 R, R]; phi(z) = 1
    double window(const double* p, int d) const;
    double phase(const double* p, int d) const;  // <p - z, zeta>
    // config errors for an empty or non-decreasing ladder, phi leaving the grid or Omega
    void validate(const SpacetimeGrid& g, const DomainSpec* dom) const;
};

struct ProbeResult {
    std::vector<double> taus;
    std::vector<cplx> pairings;
    double fitted_order = 0;
    cplx fitted_amplitude{0, 0};
    double fit_residual = 0;
};

// Trapezoidal quadrature of w phi exp(-i psi / tau) over spacetime.
cplx oscillatory_pairing(const Field& w, const ProbeSpec& p, double tau);
ProbeResult probe_field(const Field& w, const ProbeSpec& p);

// Least-squares fit of log|P| against log tau. fit_power_law never throws on
// residual; fit_scaling raises UnstableFit above p.max_fit_residual.
void fit_power_law(ProbeResult& r);
void fit_scaling(ProbeResult& r, double max_residual);

// Time antiderivative int_0^t u by the cumulative trapezoid rule (u = 0 before the first level).
Field time_antiderivative(const Field& u);

// Streams the pairings of a member combination (or of its time antiderivative)
// during an Evolution run.
class PairingAccumulator {
public:
    PairingAccumulator(const ProbeSpec& p, const SpacetimeGrid& g, std::vector<std::pair<int, double>> combo,
                       bool antiderivative = false);
    Evolution::Observer observer();
    ProbeResult result() const;

private:
    void consume(int k, const Evolution& ev);
    ProbeSpec p_;
    SpacetimeGrid g_;
    std::vector<std::pair<int, double>> combo_;
    bool anti_;
    Window w_;
    std::vector<double> run_sum_, vals_;
    std::vector<cplx> acc_;
};

// Common complex ratio sum conj(ref) x / sum |ref|^2 over the ladder.
cplx common_ratio(const ProbeResult& ref, const ProbeResult& x, double noise_floor);

// (h_A - h_B)(y) from the pairings of u123_A and u123_A - u123_B.
double h_difference_from_pairings(const ProbeResult& ref, const ProbeResult& diff, double hA_y, double noise_floor);
double recover_h_difference(const Model& mA, const Model& mB, const InteractionConfig& cfg, const ProbeSpec& p,
                            const LinearizationResult& A, const LinearizationResult& B);

struct VRecovery {
    double estimate = 0;     // 2 Im[-P(rem) / P(W)], W = -i times the time antiderivative of u_fre
    double literal = 0;      // Im[-P(rem) / P(fre)] without carrier normalization
    double correction = 0;   // r^2 (-I_1/kappa_1 + I_2/kappa_2 + I_3/kappa_3), verification mode
    double corrected = 0;    // estimate - correction
    double I_in[3] = {0, 0, 0};
    bool verified = false;
};

VRecovery v_estimate_from_pairings(const ProbeResult& anti_fre, const ProbeResult& fre, const ProbeResult& rem,
                                   double noise_floor);
// Adds the incoming-ray correction computed by quadrature on the known model.
void apply_verification(VRecovery& v, const Coefficient& V, const InteractionConfig& cfg);
VRecovery recover_V_line_integral(const Model& m, const InteractionConfig& cfg, const ProbeSpec& p,
                                  const Field& u123_fre, const Field& u123_rem, bool verification = true);

}  // namespace waveinv
