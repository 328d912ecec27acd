// Stochastic extremum seeking for dynamic plants with an output equilibrium
// map: closed-loop simulation, the singular-perturbation reduced system, its
// quadrature-evaluated average system, the average equilibrium (Newton and
// small-amplitude expansion), the Jacobian with closed-form eigenvalues, and
// the stability threshold on the step gain.
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stochavg/averaging.hpp"
#include "stochavg/numerics.hpp"
#include "stochavg/processes.hpp"
#include "stochavg/trajectory.hpp"

namespace stochavg::es_dynamic {

/// Plant x_{k+1} = f(x_k, u_k), y = h(x_k), with a known control law
/// beta(x, theta) and (for bundled/test plants) the equilibrium map l(theta)
/// satisfying f(l(theta), beta(l(theta), theta)) = l(theta).
struct Plant {
    std::size_t state_dimension = 1;
    std::function<void(std::span<const double> x, double u, std::span<double> out)> dynamics;
    std::function<double(std::span<const double> x)> output;
    std::function<double(std::span<const double> x, double theta)> control;
    std::function<void(double theta, std::span<double> out)> equilibrium;
};

/// Largest fixed-point defect max_theta |f(l(theta), beta(l(theta), theta)) - l(theta)|
/// over a grid; the equilibrium-map assumption holds when this is ~1e-10.
inline double max_equilibrium_defect(const Plant& plant, std::span<const double> theta_grid) {
    std::vector<double> at_equilibrium(plant.state_dimension);
    std::vector<double> next(plant.state_dimension);
    double worst = 0.0;
    for (double theta : theta_grid) {
        plant.equilibrium(theta, at_equilibrium);
        plant.dynamics(at_equilibrium, plant.control(at_equilibrium, theta), next);
        for (std::size_t i = 0; i < next.size(); ++i) {
            worst = std::max(worst, std::abs(next[i] - at_equilibrium[i]));
        }
    }
    return worst;
}

/// First-order test plant: x+ = pole*x + (1-pole)*u with control beta = theta,
/// so l(theta) = theta and the output equilibrium map is h itself.
inline Plant first_order_plant(double pole, std::function<double(double)> output_map) {
    if (!(pole >= 0.0 && pole < 1.0)) {
        throw std::invalid_argument("first_order_plant: pole must lie in [0, 1)");
    }
    Plant plant;
    plant.state_dimension = 1;
    plant.dynamics = [pole](std::span<const double> x, double u, std::span<double> out) {
        out[0] = pole * x[0] + (1.0 - pole) * u;
    };
    plant.output = [output_map](std::span<const double> x) { return output_map(x[0]); };
    plant.control = [](std::span<const double>, double theta) { return theta; };
    plant.equilibrium = [](double theta, std::span<double> out) { out[0] = theta; };
    return plant;
}

struct Params {
    double gain = 1.0;        // update gain on the gradient estimate
    double w1 = 1.0;          // demodulation filter gain
    double w2 = 1.0;          // washout filter gain
    double amplitude = 0.05;  // probe amplitude a
    double epsilon = 1e-3;
    double probe_sigma = 1.0;
    std::optional<TruncatedGaussian> noise;

    void validate() const {
        if (!(gain > 0.0)) throw std::invalid_argument("es_dynamic::Params: gain must be > 0");
        if (!(w1 > 0.0)) throw std::invalid_argument("es_dynamic::Params: w1 must be > 0");
        if (!(w2 > 0.0)) throw std::invalid_argument("es_dynamic::Params: w2 must be > 0");
        if (!(amplitude > 0.0)) throw std::invalid_argument("es_dynamic::Params: amplitude must be > 0");
        if (!(epsilon > 0.0)) throw std::invalid_argument("es_dynamic::Params: epsilon must be > 0");
        if (!(probe_sigma > 0.0)) throw std::invalid_argument("es_dynamic::Params: probe_sigma must be > 0");
        if (noise) stochavg::validate(ProcessKind{*noise});
    }
};

/// The reduced output error map varsigma(z) = h(l(theta* + z)) - h(l(theta*)),
/// with its derivative and the curvature data at zero. A maximum at theta*
/// requires varsigma(0) = 0, varsigma'(0) = 0, varsigma''(0) < 0.
struct ReducedMap {
    std::function<double(double)> value;
    std::function<double(double)> derivative;
    double curvature_at_zero = -1.0;         // varsigma''(0)
    double third_derivative_at_zero = 0.0;   // varsigma'''(0)

    /// Analytic polynomial form, coefficients ascending in degree.
    static ReducedMap from_polynomial(std::vector<double> coefficients) {
        if (coefficients.size() < 3) coefficients.resize(3, 0.0);
        if (std::abs(coefficients[0]) > 1e-8 || std::abs(coefficients[1]) > 1e-8) {
            throw std::invalid_argument(
                "ReducedMap::from_polynomial: varsigma(0) and varsigma'(0) must vanish");
        }
        ReducedMap map;
        map.curvature_at_zero = 2.0 * coefficients[2];
        map.third_derivative_at_zero = coefficients.size() > 3 ? 6.0 * coefficients[3] : 0.0;
        map.value = [coefficients](double z) {
            double acc = 0.0;
            for (std::size_t i = coefficients.size(); i-- > 0;) acc = acc * z + coefficients[i];
            return acc;
        };
        map.derivative = [coefficients](double z) {
            double acc = 0.0;
            for (std::size_t i = coefficients.size(); i-- > 1;) {
                acc = acc * z + static_cast<double>(i) * coefficients[i];
            }
            return acc;
        };
        return map;
    }

    /// Numeric form from a plant's output equilibrium map; derivatives by
    /// central finite differences of step `fd_step` (accuracy ~ fd_step^2).
    static ReducedMap from_plant(const Plant& plant, double theta_star, double fd_step = 1e-3) {
        std::vector<double> state(plant.state_dimension);
        auto composed = [&plant, state](double theta) mutable {
            plant.equilibrium(theta, state);
            return plant.output(state);
        };
        const double reference = composed(theta_star);
        auto varsigma = [composed, theta_star, reference](double z) mutable {
            return composed(theta_star + z) - reference;
        };
        ReducedMap map;
        const double h = fd_step;
        auto vs = varsigma;
        if (std::abs((vs(h) - vs(-h)) / (2.0 * h)) > 1e-4) {
            throw std::invalid_argument("ReducedMap::from_plant: varsigma'(0) does not vanish");
        }
        map.curvature_at_zero = (vs(h) - 2.0 * vs(0.0) + vs(-h)) / (h * h);
        map.third_derivative_at_zero = (vs(2.0 * h) - 2.0 * vs(h) + 2.0 * vs(-h) - vs(-2.0 * h)) /
                                       (2.0 * h * h * h);
        map.value = varsigma;
        map.derivative = [vs, h](double z) mutable { return (vs(z + h) - vs(z - h)) / (2.0 * h); };
        return map;
    }
};

// ---------------------------------------------------------------------------
// Step maps
// ---------------------------------------------------------------------------

struct ClosedLoopState {
    std::vector<double> x;
    double theta_hat = 0.0;
    double xi = 0.0;
    double zeta = 0.0;
};

/// One synchronous closed-loop update; the probe v enters both the plant
/// input and the demodulation of the current output h(x_k).
inline ClosedLoopState closed_loop_step(const Plant& plant, const Params& params,
                                        const ClosedLoopState& state, double probe, double noise) {
    const double s = std::sin(probe);
    const double measured = plant.output(state.x) + noise;
    ClosedLoopState next;
    next.x.resize(plant.state_dimension);
    plant.dynamics(state.x, plant.control(state.x, state.theta_hat + params.amplitude * s), next.x);
    next.theta_hat = state.theta_hat + params.epsilon * params.gain * state.xi;
    next.xi = state.xi - params.epsilon * params.w1 * state.xi +
              params.epsilon * params.w1 * (measured - state.zeta) * s;
    next.zeta = state.zeta - params.epsilon * params.w2 * state.zeta + params.epsilon * params.w2 * measured;
    for (double v : next.x) {
        if (!std::isfinite(v) || std::abs(v) > defaults::kBlowupLimit) throw BlowupError(0);
    }
    if (!std::isfinite(next.theta_hat) || !std::isfinite(next.xi) || !std::isfinite(next.zeta)) {
        throw BlowupError(0);
    }
    return next;
}

struct ReducedState {
    double theta_err = 0.0;  // parameter estimation error
    double xi = 0.0;         // demodulated gradient estimate
    double zeta_err = 0.0;   // washout state error
};

/// One update of the reduced system: the plant state is frozen at its
/// quasi-steady value, leaving varsigma evaluated at theta_err + a sin(v).
inline ReducedState reduced_step(const ReducedMap& map, const Params& params, const ReducedState& state,
                                 double probe, double noise) {
    const double s = std::sin(probe);
    const double output_err = map.value(state.theta_err + params.amplitude * s);
    ReducedState next;
    next.theta_err = state.theta_err + params.epsilon * params.gain * state.xi;
    next.xi = state.xi - params.epsilon * params.w1 * state.xi +
              params.epsilon * params.w1 * (output_err - state.zeta_err + noise) * s;
    next.zeta_err = state.zeta_err - params.epsilon * params.w2 * state.zeta_err +
                    params.epsilon * params.w2 * (output_err + noise);
    if (!std::isfinite(next.theta_err) || !std::isfinite(next.xi) || !std::isfinite(next.zeta_err) ||
        std::abs(next.theta_err) > defaults::kBlowupLimit) {
        throw BlowupError(0);
    }
    return next;
}

// ---------------------------------------------------------------------------
// Average system and equilibrium
// ---------------------------------------------------------------------------

/// integral of varsigma(theta_err + a sin y) sin(y) mu(dy), the demodulated
/// average output slope driving the xi channel.
inline double demodulated_average(const ReducedMap& map, const Params& params, double theta_err) {
    return gaussian_expectation_adaptive(params.probe_sigma, [&](double y) {
        return map.value(theta_err + params.amplitude * std::sin(y)) * std::sin(y);
    });
}

/// integral of varsigma(theta_err + a sin y) mu(dy), the plain average output
/// error feeding the washout channel.
inline double plain_average(const ReducedMap& map, const Params& params, double theta_err) {
    return gaussian_expectation_adaptive(params.probe_sigma, [&](double y) {
        return map.value(theta_err + params.amplitude * std::sin(y));
    });
}

/// Right-hand side of the average system (increment divided by eps). The
/// noise terms vanish in the average: the invariant noise distribution has
/// zero mean and the probe/noise product measure factorizes.
inline std::array<double, 3> average_rhs(const ReducedMap& map, const Params& params,
                                         const ReducedState& state) {
    return {params.gain * state.xi,
            -params.w1 * state.xi + params.w1 * demodulated_average(map, params, state.theta_err),
            -params.w2 * state.zeta_err + params.w2 * plain_average(map, params, state.theta_err)};
}

struct AverageEquilibrium {
    double theta_err = 0.0;
    double xi = 0.0;  // identically zero at any equilibrium
    double zeta_err = 0.0;
    double residual = 0.0;  // |demodulated_average| at the root
};

/// Newton solve of the scalar equilibrium equation
/// integral varsigma(theta + a sin y) sin y mu(dy) = 0 from the initial guess
/// theta = 0, then zeta from the washout balance; xi = 0 exactly.
inline AverageEquilibrium solve_equilibrium(const ReducedMap& map, const Params& params) {
    params.validate();
    if (!(map.curvature_at_zero < 0.0)) {
        throw std::invalid_argument("solve_equilibrium: varsigma''(0) must be negative");
    }
    const auto g = [&](double theta) { return demodulated_average(map, params, theta); };
    const auto dg = [&](double theta) {
        return gaussian_expectation_adaptive(params.probe_sigma, [&](double y) {
            return map.derivative(theta + params.amplitude * std::sin(y)) * std::sin(y);
        });
    };
    const double root = newton_scalar(g, dg, 0.0, defaults::kEquilibriumNewtonTol,
                                      defaults::kNewtonMaxIter);
    AverageEquilibrium eq;
    eq.theta_err = root;
    eq.xi = 0.0;
    eq.zeta_err = plain_average(map, params, root);
    eq.residual = std::abs(g(root));
    if (eq.residual > defaults::kEquilibriumResidualTol) {
        throw NonConvergenceError("solve_equilibrium: residual above tolerance");
    }
    return eq;
}

struct EquilibriumExpansion {
    double b1 = 0.0;  // coefficient of a (always zero)
    double b2 = 0.0;  // coefficient of a^2
    double theta_prediction = 0.0;  // b2 a^2
    double zeta_prediction = 0.0;   // varsigma''(0)(1-e^{-2 sigma^2}) a^2 / 4
};

/// Small-amplitude expansion of the average equilibrium:
/// b2 = -varsigma'''(0)(3 - 4e^{-2s^2} + e^{-8s^2}) / (24 varsigma''(0)(1 - e^{-2s^2})).
inline EquilibriumExpansion equilibrium_expansion(const ReducedMap& map, const Params& params) {
    if (map.curvature_at_zero == 0.0) {
        throw std::invalid_argument("equilibrium_expansion: varsigma''(0) must be nonzero");
    }
    const double s2 = params.probe_sigma * params.probe_sigma;
    const double e2 = std::exp(-2.0 * s2);
    const double e8 = std::exp(-8.0 * s2);
    EquilibriumExpansion expansion;
    expansion.b1 = 0.0;
    expansion.b2 = -map.third_derivative_at_zero * (3.0 - 4.0 * e2 + e8) /
                   (24.0 * map.curvature_at_zero * (1.0 - e2));
    const double a2 = params.amplitude * params.amplitude;
    expansion.theta_prediction = expansion.b2 * a2;
    expansion.zeta_prediction = map.curvature_at_zero * (1.0 - e2) * a2 / 4.0;
    return expansion;
}

// ---------------------------------------------------------------------------
// Jacobian, eigenvalues, stability threshold
// ---------------------------------------------------------------------------

/// Demodulated average slope J21 = w1 * integral varsigma'(theta + a sin y) sin y mu(dy).
inline double demodulated_slope(const ReducedMap& map, const Params& params, double theta_err) {
    return params.w1 * gaussian_expectation_adaptive(params.probe_sigma, [&](double y) {
               return map.derivative(theta_err + params.amplitude * std::sin(y)) * std::sin(y);
           });
}

/// Jacobian of the average system at an equilibrium:
/// [[1, eps*gain, 0], [eps*J21, 1-eps*w1, 0], [eps*J31, 0, 1-eps*w2]].
inline std::array<std::array<double, 3>, 3> average_jacobian(const ReducedMap& map, const Params& params,
                                                             const AverageEquilibrium& equilibrium) {
    if (equilibrium.residual > defaults::kEquilibriumResidualTol) {
        throw std::invalid_argument("average_jacobian: equilibrium residual above tolerance");
    }
    const double j21 = demodulated_slope(map, params, equilibrium.theta_err);
    const double j31 = params.w2 * gaussian_expectation_adaptive(params.probe_sigma, [&](double y) {
                           return map.derivative(equilibrium.theta_err + params.amplitude * std::sin(y));
                       });
    return {{{1.0, params.epsilon * params.gain, 0.0},
             {params.epsilon * j21, 1.0 - params.epsilon * params.w1, 0.0},
             {params.epsilon * j31, 0.0, 1.0 - params.epsilon * params.w2}}};
}

/// Eigenvalues from the factored characteristic polynomial
/// (lambda - 1 + eps w2)((lambda - 1)^2 + eps w1 (lambda - 1) - eps^2 gain J21):
/// 1 - eps w2 and 1 + eps(-w1 +- sqrt(w1^2 + 4 gain J21))/2 (complex allowed).
inline std::array<std::complex<double>, 3> closed_form_eigenvalues(const Params& params, double j21) {
    const std::complex<double> disc(params.w1 * params.w1 + 4.0 * params.gain * j21, 0.0);
    const std::complex<double> root = std::sqrt(disc);
    const double half_eps = 0.5 * params.epsilon;
    return {std::complex<double>(1.0 - params.epsilon * params.w2, 0.0),
            1.0 + half_eps * (-params.w1 + root), 1.0 + half_eps * (-params.w1 - root)};
}

inline double spectral_radius(std::span<const std::complex<double>> eigenvalues) {
    double radius = 0.0;
    for (const auto& ev : eigenvalues) radius = std::max(radius, std::abs(ev));
    return radius;
}

/// Largest eps below which all three eigenvalue magnitudes stay inside the
/// unit disc, located by bisection to 1e-6 and verified stable on a 10-point
/// grid below the threshold. Fails when the demodulated slope is >= 0
/// (marginal eigenvalue 1 or an unstable direction for every eps).
inline double stability_threshold(const ReducedMap& map, const Params& params) {
    params.validate();
    const AverageEquilibrium equilibrium = solve_equilibrium(map, params);
    const double j21 = demodulated_slope(map, params, equilibrium.theta_err);
    if (!(j21 < 0.0)) {
        throw NonConvergenceError(
            "stability_threshold: demodulated slope is >= 0 (amplitude too large or "
            "varsigma''(0) >= 0); no stable step gain exists");
    }
    const auto radius_at = [&](double eps) {
        Params trial = params;
        trial.epsilon = eps;
        const auto ev = closed_form_eigenvalues(trial, j21);
        return spectral_radius(ev);
    };
    double lo = 1e-9 / std::max({params.w1, params.w2, 1.0});
    if (!(radius_at(lo) < 1.0)) {
        throw NonConvergenceError("stability_threshold: no stable eps found near zero");
    }
    double hi = 2.0 / params.w2 + 1.0 / params.w2;  // |1 - eps w2| = 2 here: unstable
    while (radius_at(hi) < 1.0) hi *= 2.0;
    while (hi - lo > defaults::kStabilityBisectTol) {
        const double mid = 0.5 * (lo + hi);
        (radius_at(mid) < 1.0 ? lo : hi) = mid;
    }
    const double threshold = lo;
    for (int i = 1; i <= 10; ++i) {
        const double eps = threshold * static_cast<double>(i) / 11.0;
        if (!(radius_at(eps) < 1.0)) {
            throw NonConvergenceError("stability_threshold: instability below the located threshold");
        }
    }
    return threshold;
}

/// Largest amplitude in the grid that still admits a stable step gain; the
/// empirical ceiling on the probe amplitude.
inline double amplitude_ceiling(const ReducedMap& map, const Params& params,
                                std::span<const double> amplitude_grid) {
    double ceiling = 0.0;
    for (double a : amplitude_grid) {
        Params trial = params;
        trial.amplitude = a;
        try {
            (void)stability_threshold(map, trial);
            ceiling = std::max(ceiling, a);
        } catch (const NonConvergenceError&) {
        } catch (const std::invalid_argument&) {
        }
    }
    if (ceiling == 0.0) throw NonConvergenceError("amplitude_ceiling: no amplitude in the grid is stable");
    return ceiling;
}

// ---------------------------------------------------------------------------
// Experiments
// ---------------------------------------------------------------------------

struct RunSummary {
    AverageEquilibrium equilibrium;
    double terminal_distance = 0.0;      // |(theta,xi,zeta) - equilibrium| at the end
    double tail_max_distance = 0.0;      // over the second half
    double tail_max_output_error = 0.0;  // |y0 - h(l(theta*))| over the second half
    double probe_output_bound = 0.0;     // a^2 |varsigma''(0)| / 2
};

struct ReducedRunResult {
    Trajectory states;  // columns theta_err, xi, zeta_err
    RunSummary summary;
};

namespace detail {

inline double distance_to(const ReducedState& s, const AverageEquilibrium& eq) {
    const double dt = s.theta_err - eq.theta_err;
    const double dx = s.xi - eq.xi;
    const double dz = s.zeta_err - eq.zeta_err;
    return std::sqrt(dt * dt + dx * dx + dz * dz);
}

}  // namespace detail

/// Simulates the reduced system (or, with use_average_system, its
/// deterministic average) for `steps` steps. Enforces the stability
/// precondition eps < eps1*.
inline ReducedRunResult run_reduced_experiment(const ReducedMap& map, const Params& params,
                                               std::size_t steps, std::uint64_t master_seed,
                                               ReducedState initial = {},
                                               bool use_average_system = false) {
    params.validate();
    const double threshold = stability_threshold(map, params);
    if (!(params.epsilon < threshold)) {
        throw std::invalid_argument("run_reduced_experiment: epsilon must be below the stability threshold");
    }
    const AverageEquilibrium equilibrium = solve_equilibrium(map, params);

    ProcessStream probe({ProcessKind{IidGaussian{params.probe_sigma}}, substream_seed(master_seed, 0)});
    std::optional<ProcessStream> noise;
    if (params.noise) noise.emplace(PerturbationProcess{ProcessKind{*params.noise}, substream_seed(master_seed, 1)});

    ReducedRunResult result{Trajectory(3, params.epsilon), {}};
    result.states.reserve(steps + 1);
    ReducedState state = initial;
    const double row0[3] = {state.theta_err, state.xi, state.zeta_err};
    result.states.append(row0);

    const std::size_t tail_start = steps / 2;
    RunSummary& summary = result.summary;
    summary.equilibrium = equilibrium;
    summary.probe_output_bound = 0.5 * params.amplitude * params.amplitude * std::abs(map.curvature_at_zero);
    for (std::size_t k = 0; k < steps; ++k) {
        if (use_average_system) {
            const auto rhs = average_rhs(map, params, state);
            state.theta_err += params.epsilon * rhs[0];
            state.xi += params.epsilon * rhs[1];
            state.zeta_err += params.epsilon * rhs[2];
        } else {
            const double v = probe.next();
            const double w = noise ? noise->next() : 0.0;
            const double output_err = map.value(state.theta_err + params.amplitude * std::sin(v));
            try {
                state = reduced_step(map, params, state, v, w);
            } catch (const BlowupError&) {
                throw BlowupError(k + 1);
            }
            if (k >= tail_start) {
                summary.tail_max_output_error = std::max(summary.tail_max_output_error, std::abs(output_err));
            }
        }
        const double row[3] = {state.theta_err, state.xi, state.zeta_err};
        result.states.append(row);
        if (k >= tail_start) {
            summary.tail_max_distance =
                std::max(summary.tail_max_distance, detail::distance_to(state, equilibrium));
        }
    }
    summary.terminal_distance = detail::distance_to(state, equilibrium);
    return result;
}

struct ClosedLoopRunResult {
    Trajectory states;  // columns theta_err, xi, zeta_err, x_0..x_{n-1}
    RunSummary summary;
};

/// Simulates the full closed loop around a plant. theta_star and the output
/// reference come from the plant's equilibrium map; the summary measures
/// distances in the reduced error coordinates of the supplied reduced map.
inline ClosedLoopRunResult run_closed_loop_experiment(const Plant& plant, double theta_star,
                                                      const ReducedMap& map, const Params& params,
                                                      std::size_t steps, std::uint64_t master_seed,
                                                      std::optional<ClosedLoopState> initial = std::nullopt) {
    params.validate();
    const double threshold = stability_threshold(map, params);
    if (!(params.epsilon < threshold)) {
        throw std::invalid_argument(
            "run_closed_loop_experiment: epsilon must be below the stability threshold");
    }
    const AverageEquilibrium equilibrium = solve_equilibrium(map, params);
    std::vector<double> reference_state(plant.state_dimension);
    plant.equilibrium(theta_star, reference_state);
    const double reference_output = plant.output(reference_state);

    ClosedLoopState state;
    if (initial) {
        state = *initial;
        if (state.x.size() != plant.state_dimension) {
            throw std::invalid_argument("run_closed_loop_experiment: initial state dimension mismatch");
        }
    } else {
        state.x.resize(plant.state_dimension);
        plant.equilibrium(theta_star, state.x);
        state.theta_hat = theta_star;
        state.zeta = reference_output;  // zeta error starts at zero
    }

    ProcessStream probe({ProcessKind{IidGaussian{params.probe_sigma}}, substream_seed(master_seed, 0)});
    std::optional<ProcessStream> noise;
    if (params.noise) noise.emplace(PerturbationProcess{ProcessKind{*params.noise}, substream_seed(master_seed, 1)});

    const std::size_t dim = 3 + plant.state_dimension;
    ClosedLoopRunResult result{Trajectory(dim, params.epsilon), {}};
    result.states.reserve(steps + 1);
    std::vector<double> row(dim);
    const auto record = [&](const ClosedLoopState& s) {
        row[0] = s.theta_hat - theta_star;
        row[1] = s.xi;
        row[2] = s.zeta - reference_output;
        for (std::size_t i = 0; i < s.x.size(); ++i) row[3 + i] = s.x[i];
        result.states.append(row);
    };
    record(state);

    const std::size_t tail_start = steps / 2;
    RunSummary& summary = result.summary;
    summary.equilibrium = equilibrium;
    summary.probe_output_bound = 0.5 * params.amplitude * params.amplitude * std::abs(map.curvature_at_zero);
    for (std::size_t k = 0; k < steps; ++k) {
        const double v = probe.next();
        const double w = noise ? noise->next() : 0.0;
        const double output_error = plant.output(state.x) - reference_output;
        try {
            state = closed_loop_step(plant, params, state, v, w);
        } catch (const BlowupError&) {
            throw BlowupError(k + 1);
        }
        record(state);
        if (k >= tail_start) {
            summary.tail_max_output_error =
                std::max(summary.tail_max_output_error, std::abs(output_error));
            const ReducedState reduced{state.theta_hat - theta_star, state.xi,
                                       state.zeta - reference_output};
            summary.tail_max_distance =
                std::max(summary.tail_max_distance, detail::distance_to(reduced, equilibrium));
        }
    }
    const ReducedState terminal{state.theta_hat - theta_star, state.xi, state.zeta - reference_output};
    summary.terminal_distance = detail::distance_to(terminal, equilibrium);
    return result;
}

}  // namespace stochavg::es_dynamic
