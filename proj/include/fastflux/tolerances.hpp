#pragma once

namespace fastflux {

/// Centralized numeric tolerances. Every solver/comparison threshold used by
/// the library lives here so studies can override them in one place.
struct Tolerances {
    double stationary_residual = 1e-12;  // |L pi|_inf <= this * max rate
    double comparison = 1e-9;            // generic equality slack
    double mass_conservation = 1e-10;    // relative drift of total mass
    double continuity_rel = 1e-6;        // mild-equation gate, relative to (1 + |j|_1)
    double well_prepared = 1e-8;         // rejection threshold in simulate_effective
    double recovery_residual = 1e-8;     // hard assertion on recovery trajectories
    double quadrature = 1e-9;            // adaptive quadrature target
    double probe_eps_1 = 1e-3;           // scaling-exponent probes, eps1 > eps2
    double probe_eps_2 = 1e-4;
    double exponent_round = 0.1;         // |k_x - round(k_x)| rejection threshold
};

inline const Tolerances& default_tolerances() {
    static const Tolerances tol{};
    return tol;
}

}  // namespace fastflux
