// Stochastic extremum seeking for a quadratic static map with measurement
// noise: the iteration law, its estimation-error system, the closed-form
// average error system with its contraction factor and stability limit, and
// the full simulation experiment.
#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stochavg/averaging.hpp"
#include "stochavg/metrics.hpp"
#include "stochavg/processes.hpp"

namespace stochavg::es_static {

/// phi(x) = phi* + (phi''/2)(x - x*)^2. curvature > 0 seeks a minimum.
struct StaticMap {
    double optimum_value = 0.0;  // phi*
    double curvature = 1.0;      // phi''
    double optimizer = 0.0;      // x*

    double value(double x) const {
        const double d = x - optimizer;
        return optimum_value + 0.5 * curvature * d * d;
    }

    void validate() const {
        if (curvature == 0.0) throw std::invalid_argument("StaticMap: curvature must be nonzero");
    }
};

struct Params {
    double amplitude = 0.8;                        // probe amplitude a
    double epsilon = 0.002;                        // step gain
    double probe_sigma = 2.0;                      // v_k ~ N(0, sigma^2), i.i.d.
    std::optional<TruncatedGaussian> noise;        // measurement noise spec, or none
    double initial_estimate = 0.0;                 // xhat_0

    void validate() const {
        if (!(amplitude > 0.0)) throw std::invalid_argument("es_static::Params: amplitude must be > 0");
        if (!(epsilon > 0.0)) throw std::invalid_argument("es_static::Params: epsilon must be > 0");
        if (!(probe_sigma > 0.0)) throw std::invalid_argument("es_static::Params: probe_sigma must be > 0");
        if (noise) stochavg::validate(ProcessKind{*noise});
    }
};

/// One update of the estimate: probes at x_k = xhat_k + a sin(v_{k+1}),
/// measures y_{k+1} = phi(x_k) + W_{k+1}, and moves against the demodulated
/// output: xhat_{k+1} = xhat_k - eps sin(v_{k+1}) y_{k+1}.
inline double step(const StaticMap& map, const Params& params, double estimate, double probe,
                   double noise) {
    const double s = std::sin(probe);
    const double output = map.value(estimate + params.amplitude * s) + noise;
    return estimate - params.epsilon * s * output;
}

/// The error field of the estimation error x~ = xhat - x*, without the eps
/// factor: f(x~, (v, W)) = -sin(v)[phi* + (phi''/2)(x~ + a sin v)^2 + W].
inline double error_increment(const StaticMap& map, const Params& params, double error, double probe,
                              double noise) {
    const double s = std::sin(probe);
    const double displaced = error + params.amplitude * s;
    return -(s * (map.optimum_value + 0.5 * map.curvature * displaced * displaced + noise));
}

/// Error-system update; equals step() composed with the shift x~ = xhat - x*.
inline double error_step(const StaticMap& map, const Params& params, double error, double probe,
                         double noise) {
    return error + params.epsilon * error_increment(map, params, error, probe, noise);
}

/// Exact one-step multiplier of the average error system:
/// 1 - eps a phi'' (1 - e^{-2 sigma^2}) / 2.
inline double average_factor(const StaticMap& map, const Params& params) {
    return 1.0 - params.epsilon * params.amplitude * map.curvature *
                     gaussian_sine_moment(params.probe_sigma, 2);
}

/// The stability limit eps* = 2 / (a phi'' (1 - e^{-2 sigma^2})): the average
/// factor lies in (-1, 1) exactly for eps below it. Requires phi'' > 0.
inline double max_stable_epsilon(const StaticMap& map, const Params& params) {
    if (!(map.curvature > 0.0)) {
        throw std::invalid_argument("max_stable_epsilon: curvature must be > 0");
    }
    return 1.0 / (params.amplitude * map.curvature * gaussian_sine_moment(params.probe_sigma, 2));
}

/// The error system bundled as a SystemModel over the joint perturbation
/// (v, W); shares its arithmetic with error_step, so composed trajectories
/// agree bit-for-bit.
inline SystemModel error_system_model(const StaticMap& map, const Params& params) {
    map.validate();
    params.validate();
    const bool noisy = params.noise.has_value();
    return SystemModel{
        1,
        [map, params, noisy](std::span<const double> x, std::span<const double> y, std::span<double> out) {
            out[0] = error_increment(map, params, x[0], y[0], noisy ? y[1] : 0.0);
        },
        params.epsilon};
}

/// Closed-form average field of the error system: -(a phi'' (1-e^{-2s^2})/2) x~.
inline AverageField error_average_field(const StaticMap& map, const Params& params) {
    const double rate = params.amplitude * map.curvature * gaussian_sine_moment(params.probe_sigma, 2);
    return AverageField{[rate](std::span<const double> x, std::span<double> out) { out[0] = -rate * x[0]; }};
}

/// Perturbation components of the error system: probe first, then noise.
inline std::vector<ProcessKind> error_perturbation(const Params& params) {
    std::vector<ProcessKind> kinds;
    kinds.push_back(IidGaussian{params.probe_sigma});
    if (params.noise) kinds.push_back(*params.noise);
    return kinds;
}

/// ExperimentSpec for the convergence-metrics procedures, started at error0.
inline ExperimentSpec error_experiment(const StaticMap& map, const Params& params, double error0,
                                       std::uint64_t master_seed) {
    return ExperimentSpec{error_system_model(map, params), error_average_field(map, params),
                          error_perturbation(params), std::vector<double>{error0}, master_seed};
}

struct RunSummary {
    double final_estimate = 0.0;
    double average_factor = 0.0;
    bool average_system_stable = false;        // |factor| < 1
    std::optional<std::size_t> band_entry;     // first k with |xhat_k - x*| <= band
    std::optional<std::size_t> band_settle;    // first k after which it never leaves
    double tail_in_band_fraction = 0.0;        // over k >= steps/2
    double tail_max_output_error = 0.0;        // max |y_{k+1} - phi(x*)| over k >= steps/2
    double probe_output_bound = 0.0;           // a^2 |phi''| / 2
    double noise_bound = 0.0;                  // M (0 when noise-free)
};

struct RunResult {
    Trajectory estimates;         // xhat_0 .. xhat_K
    std::vector<double> outputs;  // y_1 .. y_K
    RunSummary summary;
};

/// Full simulation with independent probe and noise sub-streams of the
/// master seed. The output diagnostic reports the tail maximum of
/// |y - phi(x*)| next to its probe and noise components separately; the
/// paper-level bound has unspecified constants, so no single inequality is
/// asserted here.
inline RunResult run_experiment(const StaticMap& map, const Params& params, std::size_t steps,
                                std::uint64_t master_seed, double band_half_width = 0.25) {
    map.validate();
    params.validate();
    if (steps < 1) throw std::invalid_argument("es_static::run_experiment: steps must be >= 1");
    ProcessStream probe({ProcessKind{IidGaussian{params.probe_sigma}}, substream_seed(master_seed, 0)});
    std::optional<ProcessStream> noise;
    if (params.noise) noise.emplace(PerturbationProcess{ProcessKind{*params.noise}, substream_seed(master_seed, 1)});

    RunResult result{Trajectory(1, params.epsilon), {}, {}};
    result.estimates.reserve(steps + 1);
    result.outputs.reserve(steps);
    double estimate = params.initial_estimate;
    result.estimates.append_scalar(estimate);

    const std::size_t tail_start = steps / 2;
    const double reference = map.value(map.optimizer);
    double tail_max_output_error = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const double v = probe.next();
        const double w = noise ? noise->next() : 0.0;
        const double s = std::sin(v);
        const double y = map.value(estimate + params.amplitude * s) + w;
        estimate -= params.epsilon * s * y;
        if (!std::isfinite(estimate) || std::abs(estimate) > defaults::kBlowupLimit) {
            throw BlowupError(k + 1);
        }
        result.estimates.append_scalar(estimate);
        result.outputs.push_back(y);
        if (k >= tail_start) {
            tail_max_output_error = std::max(tail_max_output_error, std::abs(y - reference));
        }
    }

    RunSummary& summary = result.summary;
    summary.final_estimate = estimate;
    summary.average_factor = average_factor(map, params);
    summary.average_system_stable = std::abs(summary.average_factor) < 1.0;
    summary.probe_output_bound = 0.5 * params.amplitude * params.amplitude * std::abs(map.curvature);
    summary.noise_bound = params.noise ? params.noise->bound : 0.0;
    summary.tail_max_output_error = tail_max_output_error;

    std::size_t in_band_tail = 0;
    std::optional<std::size_t> entry;
    std::optional<std::size_t> settle;
    for (std::size_t k = 0; k <= steps; ++k) {
        const bool in_band = std::abs(result.estimates.scalar_state(k) - map.optimizer) <= band_half_width;
        if (in_band && !entry) entry = k;
        if (in_band) {
            if (!settle) settle = k;
        } else {
            settle.reset();
        }
        if (k >= tail_start && in_band) ++in_band_tail;
    }
    summary.band_entry = entry;
    summary.band_settle = settle;
    summary.tail_in_band_fraction =
        static_cast<double>(in_band_tail) / static_cast<double>(steps - tail_start + 1);
    return result;
}

}  // namespace stochavg::es_static
