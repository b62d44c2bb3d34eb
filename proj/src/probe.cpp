#include "waveinv/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "waveinv/coefficient.hpp"
#include "waveinv/errors.hpp"
#include "waveinv/raytransform.hpp"

namespace waveinv {

double ProbeSpec::window(const double* p, int d) const {
    double r2 = 0;
    for (int a = 0; a <= d; ++a) {
        double u = p[a] - z[a];
        r2 += u * u;
    }
    double R = cutoff_width;
    if (r2 >= R * R) return 0.0;
    double r = std::sqrt(r2);
    double sd = R / 4;
    double g = std::exp(-r2 / (2 * sd * sd));
    if (r > 0.75 * R) g *= 1.0 - smooth_step((r - 0.75 * R) / (0.25 * R));
    return g;
}

double ProbeSpec::phase(const double* p, int d) const {
    double s = 0;
    for (int a = 0; a <= d; ++a) s += (p[a] - z[a]) * zeta.c[a];
    return s;
}

void ProbeSpec::validate(const SpacetimeGrid& g, const DomainSpec* dom) const {
    if (static_cast<int>(z.size()) != g.d + 1 || zeta.c.size() != z.size())
        throw config_error("InvalidProbe", "probe point and covector must match the grid dimension");
    if (tau_ladder.empty()) throw config_error("InvalidProbe", "empty tau ladder");
    for (std::size_t i = 0; i < tau_ladder.size(); ++i) {
        if (!(tau_ladder[i] > 0)) throw config_error("InvalidProbe", "tau must be positive");
        if (i > 0 && !(tau_ladder[i] < tau_ladder[i - 1]))
            throw config_error("InvalidProbe", "tau ladder must be strictly decreasing");
    }
    double zn = 0;
    for (double c : zeta.c) zn += c * c;
    zn = std::sqrt(zn);
    for (double tau : tau_ladder)
        if (zn * g.dx() / tau > std::numbers::pi / 2)
            throw domain_error("UnresolvedPhase", "tau = " + std::to_string(tau) + " is below grid resolution");
    double R = cutoff_width;
    if (z[0] - R < 0 || z[0] + R > g.T || spatial_norm(z) + R > g.L)
        throw config_error("ProbeOutsideGrid", "support of phi leaves the grid");
    if (dom && (z[0] - R <= 0 || z[0] + R >= dom->T || spatial_norm(z) + R >= dom->rho))
        throw config_error("ProbeOutsideOmega", "support of phi leaves Omega");
}

namespace {

// Adds sum over the slice of v phi exp(-i psi / tau) dV for every tau.
template <class Get>
void accumulate_slice(const ProbeSpec& p, const SpacetimeGrid& g, const Window& w, int k, Get&& get,
                      std::vector<cplx>& acc) {
    double t = g.t(k);
    if (std::abs(t - p.z[0]) >= p.cutoff_width) return;
    double vol = g.dt() * std::pow(g.dx(), g.d);
    double pt[4] = {t, 0, 0, 0};
    std::size_t ntau = p.tau_ladder.size();
    std::vector<cplx> part(ntau, 0.0);
    for (int i = 0; i < w.cnt[0]; ++i)
        for (int j = 0; j < w.cnt[1]; ++j)
            for (int l = 0; l < w.cnt[2]; ++l) {
                pt[1] = g.x(i + w.lo[0]);
                pt[2] = g.x(j + w.lo[1]);
                if (g.d == 3) pt[3] = g.x(l + w.lo[2]);
                double phi = p.window(pt, g.d);
                if (phi == 0.0) continue;
                double v = get((std::size_t(i) * w.cnt[1] + j) * w.cnt[2] + l);
                if (v == 0.0) continue;
                double psi = p.phase(pt, g.d);
                for (std::size_t q = 0; q < ntau; ++q) part[q] += v * phi * std::polar(1.0, -psi / p.tau_ladder[q]);
            }
    // levels at t = 0 and t = T get half weight (phi vanishes there in practice)
    double wt = (k == 0 || k == g.n_time - 1) ? 0.5 : 1.0;
    for (std::size_t q = 0; q < ntau; ++q) acc[q] += wt * vol * part[q];
}

}  // namespace

cplx oscillatory_pairing(const Field& w, const ProbeSpec& p, double tau) {
    ProbeSpec one = p;
    one.tau_ladder = {tau};
    one.validate(w.grid(), nullptr);
    std::vector<cplx> acc(1, 0.0);
    for (int q = 0; q < w.nt(); ++q) {
        int k = w.k0() + q;
        const double* s = w.slice(k);
        accumulate_slice(one, w.grid(), w.window(), k, [&](std::size_t i) { return s[i]; }, acc);
    }
    return acc[0];
}

ProbeResult probe_field(const Field& w, const ProbeSpec& p) {
    p.validate(w.grid(), nullptr);
    ProbeResult r;
    r.taus = p.tau_ladder;
    r.pairings.assign(p.tau_ladder.size(), 0.0);
    for (int q = 0; q < w.nt(); ++q) {
        int k = w.k0() + q;
        const double* s = w.slice(k);
        accumulate_slice(p, w.grid(), w.window(), k, [&](std::size_t i) { return s[i]; }, r.pairings);
    }
    bool nz = std::all_of(r.pairings.begin(), r.pairings.end(), [](cplx c) { return std::abs(c) > 0; });
    if (nz && r.taus.size() >= 2) fit_power_law(r);
    return r;
}

void fit_power_law(ProbeResult& r) {
    std::size_t n = r.taus.size();
    if (n < 2 || r.pairings.size() != n) throw config_error("InsufficientLadder", "fit needs at least 2 ladder points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = std::abs(r.pairings[i]);
        if (!(a > 0) || !(r.taus[i] > 0)) throw domain_error("NoSignal", "zero pairing in the ladder");
        double x = std::log(r.taus[i]), y = std::log(a);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double den = n * sxx - sx * sx;
    if (den == 0) throw config_error("InsufficientLadder", "ladder needs distinct tau values");
    double slope = (n * sxy - sx * sy) / den;
    double icpt = (sy - slope * sx) / n;
    double res = 0;
    cplx num = 0;
    double dd = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double e = std::log(std::abs(r.pairings[i])) - (icpt + slope * std::log(r.taus[i]));
        res += e * e;
        double b = std::pow(r.taus[i], slope);
        num += r.pairings[i] * b;
        dd += b * b;
    }
    r.fitted_order = slope;
    // complex amplitude: least-squares c in P = c tau^slope, with modulus from the log fit
    cplx c = num / dd;
    r.fitted_amplitude = std::abs(c) > 0 ? std::polar(std::exp(icpt), std::arg(c)) : cplx(0, 0);
    r.fit_residual = std::sqrt(res / n);
}

void fit_scaling(ProbeResult& r, double max_residual) {
    if (r.taus.size() < 4) throw config_error("InsufficientLadder", "fit_scaling needs at least 4 ladder points");
    fit_power_law(r);
    if (r.fit_residual > max_residual)
        throw domain_error("UnstableFit", "log-log residual " + std::to_string(r.fit_residual) + " above threshold");
}

Field time_antiderivative(const Field& u) {
    Field G = u;
    const std::size_t n = u.window().size();
    std::vector<double> sum(n, 0.0);
    double dt = u.grid().dt();
    for (int q = 0; q < u.nt(); ++q) {
        int k = u.k0() + q;
        const double* s = u.slice(k);
        double* out = G.slice(k);
        for (std::size_t i = 0; i < n; ++i) {
            sum[i] += s[i];
            out[i] = dt * (sum[i] - 0.5 * s[i]);
        }
    }
    return G;
}

PairingAccumulator::PairingAccumulator(const ProbeSpec& p, const SpacetimeGrid& g,
                                       std::vector<std::pair<int, double>> combo, bool antiderivative)
    : p_(p), g_(g), combo_(std::move(combo)), anti_(antiderivative) {
    p_.validate(g, nullptr);
    w_ = Window::ball(g, p.z, p.cutoff_width);
    run_sum_.assign(w_.size(), 0.0);
    vals_.assign(w_.size(), 0.0);
    acc_.assign(p.tau_ladder.size(), 0.0);
}

Evolution::Observer PairingAccumulator::observer() {
    return [this](int k, const Evolution& ev) { consume(k, ev); };
}

void PairingAccumulator::consume(int k, const Evolution& ev) {
    bool in_time = std::abs(g_.t(k) - p_.z[0]) < p_.cutoff_width;
    if (!anti_ && !in_time) return;
    const Window& fw = ev.window();
    for (int i = 0; i < w_.cnt[0]; ++i)
        for (int j = 0; j < w_.cnt[1]; ++j)
            for (int l = 0; l < w_.cnt[2]; ++l) {
                std::size_t q = (std::size_t(i + w_.lo[0]) * fw.cnt[1] + (j + w_.lo[1])) * fw.cnt[2] + (l + w_.lo[2]);
                double v = 0;
                for (const auto& [m, c] : combo_) v += c * ev.level(m)[q];
                std::size_t o = (std::size_t(i) * w_.cnt[1] + j) * w_.cnt[2] + l;
                if (anti_) {
                    run_sum_[o] += v;
                    vals_[o] = g_.dt() * (run_sum_[o] - 0.5 * v);
                } else {
                    vals_[o] = v;
                }
            }
    if (in_time) accumulate_slice(p_, g_, w_, k, [&](std::size_t i) { return vals_[i]; }, acc_);
}

ProbeResult PairingAccumulator::result() const {
    ProbeResult r;
    r.taus = p_.tau_ladder;
    r.pairings = acc_;
    bool nz = std::all_of(acc_.begin(), acc_.end(), [](cplx c) { return std::abs(c) > 0; });
    if (nz && r.taus.size() >= 2) fit_power_law(r);
    return r;
}

cplx common_ratio(const ProbeResult& ref, const ProbeResult& x, double noise_floor) {
    if (ref.pairings.size() != x.pairings.size() || ref.pairings.empty())
        throw config_error("InsufficientLadder", "ladders differ");
    double peak = 0, den = 0;
    cplx num = 0;
    for (std::size_t i = 0; i < ref.pairings.size(); ++i) {
        peak = std::max(peak, std::abs(ref.pairings[i]));
        num += std::conj(ref.pairings[i]) * x.pairings[i];
        den += std::norm(ref.pairings[i]);
    }
    if (!(peak > noise_floor)) throw domain_error("NoSignal", "reference pairing below the noise floor");
    return num / den;
}

double h_difference_from_pairings(const ProbeResult& ref, const ProbeResult& diff, double hA_y, double noise_floor) {
    return common_ratio(ref, diff, noise_floor).real() * hA_y;
}

double recover_h_difference(const Model& mA, const Model&, const InteractionConfig& cfg, const ProbeSpec& p,
                            const LinearizationResult& A, const LinearizationResult& B) {
    ProbeResult ref = probe_field(A.u123, p);
    ProbeResult diff = probe_field(add(A.u123, B.u123, 1.0, -1.0), p);
    return h_difference_from_pairings(ref, diff, mA.h.value(cfg.y), p.noise_floor);
}

VRecovery v_estimate_from_pairings(const ProbeResult& anti_fre, const ProbeResult& fre, const ProbeResult& rem,
                                   double noise_floor) {
    const cplx I(0, 1);
    VRecovery v;
    // pairing of W = -i G is -i P(G)
    ProbeResult W = anti_fre;
    for (auto& c : W.pairings) c *= -I;
    v.estimate = 2.0 * (-common_ratio(W, rem, noise_floor)).imag();
    v.literal = (-common_ratio(fre, rem, noise_floor)).imag();
    v.corrected = v.estimate;
    return v;
}

void apply_verification(VRecovery& v, const Coefficient& V, const InteractionConfig& cfg) {
    double r2 = cfg.r * cfg.r;
    // gamma_1 enters with the opposite sign to gamma_2, gamma_3
    static constexpr double sgn[3] = {-1.0, 1.0, 1.0};
    double c = 0;
    for (int j = 0; j < 3; ++j) {
        v.I_in[j] = truncated_integral(V, cfg.x[j], cfg.y);
        c += sgn[j] * v.I_in[j] / cfg.kappa[j];
    }
    v.correction = r2 * c;
    v.corrected = v.estimate - v.correction;
    v.verified = true;
}

VRecovery recover_V_line_integral(const Model& m, const InteractionConfig& cfg, const ProbeSpec& p,
                                  const Field& u123_fre, const Field& u123_rem, bool verification) {
    ProbeResult G = probe_field(time_antiderivative(u123_fre), p);
    ProbeResult F = probe_field(u123_fre, p);
    ProbeResult R = probe_field(u123_rem, p);
    VRecovery v = v_estimate_from_pairings(G, F, R, p.noise_floor);
    if (verification) apply_verification(v, m.V, cfg);
    return v;
}

}  // namespace waveinv
