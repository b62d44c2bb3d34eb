#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "waveinv/io.hpp"
#include "waveinv/linearization.hpp"
#include "waveinv/probe.hpp"
#include "waveinv/raytransform.hpp"

namespace waveinv {

// Planar interaction layout: y sits d_out outside B(rho) on the first axis
// (rotated by frame_angle), the three incoming rays start 4 sigma inside the
// ball and the out-ray reaches z with room for the probe window.
struct LayoutParams {
    int d = 2;
    double r = 0.6;
    double r0 = 0.0;
    double r_geom = 0.0;              // ray spread used to size the layout; 0 means r
    std::vector<double> r_sigma;      // sigma is sized for every r listed (default {r})
    double lambda_max = 1.3;
    double lambda_sigma = 4.0;
    double d_out = 20.0;
    double cutoff = 24.0;             // probe window radius
    double cutoff_margin = 1.25;      // room for the widest window
    std::vector<double> tau_factors{2.0, 1.5, 1.0, 0.67};  // times 1 / omega_out
    double dx = 1.0;
    double cfl = 0.5;
    double frame_angle = 0.0;
    int s = 4;
    double rho_min = 10.0;
};

struct Layout {
    LayoutParams params;
    DomainSpec dom;
    SpacetimeGrid grid;
    InteractionConfig cfg;
    std::array<SourceSpec, 3> sources;
    ProbeSpec probe;
    double sigma = 0;
    double omega_out = 0;
};

Layout design_layout(const LayoutParams& p);
// Same layout geometry with a different r (incoming rays re-aimed at the same y).
Layout relayout(const Layout& base, double r);
LayoutParams layout_params_from_json(const json& j);
json to_json(const Layout& l);

// Streams u1, u2, u3 and the coupled u123 of both models; pairs u123_A and
// u123_A - u123_B for every probe.
struct HChannelResult {
    std::vector<ProbeResult> ref, diff;
    std::vector<double> estimate;
    double truth = 0;  // (h_A - h_B)(y)
    double seconds = 0;
};
HChannelResult run_h_channel(const Layout& lay, const Model& A, const Model& B, const std::vector<ProbeSpec>& probes);

// Streams the free and V-coupled u123 and pairs the free antiderivative, the
// free part and the remainder.
struct VChannelResult {
    ProbeResult anti, fre, rem;
    VRecovery v;
    double truth = 0;  // truncated integral of V from y to z
    double seconds = 0;
};
VChannelResult run_v_channel(const Layout& lay, const Model& m, const ProbeSpec& p, bool verification = true);

struct Site {
    InteractionConfig cfg;
    std::array<SourceSpec, 3> sources;
    ProbeSpec probe;
};

struct ExperimentConfig {
    json doc;  // the merged configuration document
    std::string base_dir;
    DomainSpec dom;
    SpacetimeGrid grid;
    Model model_ref, model_alt;
    Coefficient pert_h, pert_V;  // model_alt = model_ref + a * perturbation in sweeps
    bool has_perturbation = false;
    std::vector<Site> sites;
    std::array<double, 3> eps{0.05, 0.05, 0.05};
    std::vector<double> eps_ladder;  // extra eps values for measure_delta
    std::vector<double> amplitudes;  // sweep ladder
    RaySampling rays;
    int s = 4;
    std::uint64_t seed = 0;
    int random_triples = 0;
    bool timings_in_report = false;
};

// Dotted overrides (a.b.c=value, value parsed as JSON when possible).
void apply_override(json& doc, const std::string& kv);
json load_config_document(const std::string& path, const std::vector<std::string>& overrides);
ExperimentConfig parse_config(const json& doc, const std::string& base_dir = "");
// config + invariant checks without solves; returns a summary
json validate_config(const ExperimentConfig& cfg);

Model alt_model(const ExperimentConfig& cfg, double amplitude);

double measure_delta(const ExperimentConfig& cfg, const Model& A, const Model& B);

struct SweepRow {
    double amplitude = 0;
    double delta = 0;
    double trilinear = 0;
    double h_error = 0;
    double h_recovered = 0;
    double h_truth = 0;
    double sup_I = 0;
    double M = 0;
    double V_bound = 0;
    double V_sup = 0;  // measured sup |V - V~| over D_2
    double h_sup = 0;  // sup |h - h~| over D_1
    double tau_theory = 0, r_theory = 0, omega1 = 0;
    double tau_used = 0, r_used = 0;
    std::string status = "ok";
    double seconds = 0;
};

struct Fit {
    double slope = 0, intercept = 0, residual = 0;
    int n = 0;
    bool ok = false;
};

struct StabilityReport {
    std::vector<SweepRow> rows;
    Fit fit_trilinear, fit_h, fit_I, fit_V;
    double C_trilinear = 0;  // max trilinear / delta^(2/5)
    int s = 4;
    json targets;
};

// least-squares slope of log err against log delta; throws on nonpositive entries or fewer than 3 rows
Fit fit_exponent(const std::vector<std::pair<double, double>>& rows);

StabilityReport run_stability_sweep(const ExperimentConfig& cfg);
json to_json(const StabilityReport& r, bool timings);
void write_report(const StabilityReport& r, const std::string& dir, bool timings);

}  // namespace waveinv
