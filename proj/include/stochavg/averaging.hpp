// The perturbed iteration X_{k+1} = X_k + eps f(X_k, Y_{k+1}), its discrete
// and continuous average systems, and empirical estimation of the averaged
// field f_bar(x) = integral of f(x, y) against the invariant distribution.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stochavg/numerics.hpp"
#include "stochavg/processes.hpp"
#include "stochavg/trajectory.hpp"

namespace stochavg {

/// The field blew up: a state coordinate left [-1e12, 1e12] or went
/// non-finite. Carries the first bad index (grid index for ODE runs).
struct BlowupError : std::runtime_error {
    std::size_t index;
    explicit BlowupError(std::size_t bad_index)
        : std::runtime_error("state blow-up at index " + std::to_string(bad_index)), index(bad_index) {}
};

/// The original iteration: dimension, vector field f(x, y), small parameter.
/// f must be bounded in y and locally Lipschitz in x (caller contract; not
/// mechanically verifiable for user-supplied fields).
struct SystemModel {
    std::size_t dimension = 1;
    std::function<void(std::span<const double> x, std::span<const double> y, std::span<double> out)> field;
    double epsilon = 1e-3;

    void validate() const {
        if (dimension == 0) throw std::invalid_argument("SystemModel: dimension must be >= 1");
        if (!(epsilon > 0.0)) throw std::invalid_argument("SystemModel: epsilon must be > 0");
        if (!field) throw std::invalid_argument("SystemModel: field not set");
    }
};

/// The averaged vector field f_bar, either closed-form or an empirical
/// ergodic estimate frozen to a (seed, sample-count) pair.
struct AverageField {
    std::function<void(std::span<const double> x, std::span<double> out)> field;
};

namespace detail {

inline bool state_ok(std::span<const double> x) {
    for (double v : x) {
        if (!std::isfinite(v) || std::abs(v) > defaults::kBlowupLimit) return false;
    }
    return true;
}

}  // namespace detail

/// Runs the original system for `steps` steps:
/// states[k+1] = states[k] + eps * f(states[k], Y_{k+1}).
inline Trajectory iterate_original(const SystemModel& model, JointStream& perturbation,
                                   std::span<const double> x0, std::size_t steps) {
    model.validate();
    if (x0.size() != model.dimension) throw std::invalid_argument("iterate_original: x0 dimension mismatch");
    Trajectory traj(model.dimension, model.epsilon);
    traj.reserve(steps + 1);
    traj.append(x0);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> y;
    std::vector<double> fx(model.dimension);
    for (std::size_t k = 0; k < steps; ++k) {
        perturbation.next(y);
        model.field(x, y, fx);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += model.epsilon * fx[i];
        if (!detail::state_ok(x)) throw BlowupError(k + 1);
        traj.append(x);
    }
    return traj;
}

/// Discrete average system: states[k+1] = states[k] + eps * f_bar(states[k]).
inline Trajectory iterate_discrete_average(const AverageField& average, double epsilon,
                                           std::span<const double> x0, std::size_t steps) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("iterate_discrete_average: epsilon must be > 0");
    if (!average.field) throw std::invalid_argument("iterate_discrete_average: field not set");
    Trajectory traj(x0.size(), epsilon);
    traj.reserve(steps + 1);
    traj.append(x0);
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> fx(x0.size());
    for (std::size_t k = 0; k < steps; ++k) {
        average.field(x, fx);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += epsilon * fx[i];
        if (!detail::state_ok(x)) throw BlowupError(k + 1);
        traj.append(x);
    }
    return traj;
}

/// Continuous average system dX/dt = f_bar(X) by fixed-step classical RK4 on
/// the grid {0, h, 2h, ..., T}. A non-finite or > 1e12 value signals a
/// finite-time explosion (the existence assumption fails numerically).
inline Trajectory integrate_continuous_average(const AverageField& average, std::span<const double> x0,
                                               double horizon, double step) {
    if (!(step > 0.0)) throw std::invalid_argument("integrate_continuous_average: step must be > 0");
    if (horizon < 0.0) throw std::invalid_argument("integrate_continuous_average: horizon must be >= 0");
    if (!average.field) throw std::invalid_argument("integrate_continuous_average: field not set");
    const auto f = [&](const std::vector<double>& x, std::vector<double>& out) {
        average.field(x, out);
    };
    const std::size_t n_steps = static_cast<std::size_t>(std::llround(horizon / step));
    Trajectory traj(x0.size(), step);
    traj.reserve(n_steps + 1);
    traj.append(x0);
    std::vector<double> x(x0.begin(), x0.end());
    std::array<std::vector<double>, 5> scratch;
    for (auto& s : scratch) s.assign(x0.size(), 0.0);
    for (std::size_t k = 0; k < n_steps; ++k) {
        rk4_step(f, x, step, scratch);
        if (!detail::state_ok(x)) throw BlowupError(k + 1);
        traj.append(x);
    }
    return traj;
}

/// Birkhoff average of f(x, .) along one stream of length n_avg + 1:
/// (1/(N+1)) * sum_{k=0..N} f(x, Y_{k+1}). Deterministic in (seeds, n_avg, x).
inline std::vector<double> estimate_average_field(const SystemModel& model,
                                                  const std::vector<PerturbationProcess>& perturbation,
                                                  std::span<const double> x, std::size_t n_avg) {
    model.validate();
    if (n_avg < 1) throw std::invalid_argument("estimate_average_field: n_avg must be >= 1");
    JointStream stream{std::vector<PerturbationProcess>(perturbation)};
    std::vector<double> sum(model.dimension, 0.0);
    std::vector<double> y;
    std::vector<double> fx(model.dimension);
    for (std::size_t k = 0; k <= n_avg; ++k) {
        stream.next(y);
        model.field(x, y, fx);
        for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += fx[i];
        if (!detail::state_ok(sum)) throw BlowupError(k);
    }
    const double scale = 1.0 / static_cast<double>(n_avg + 1);
    for (double& v : sum) v *= scale;
    return sum;
}

/// Empirical AverageField: every evaluation replays the same frozen stream,
/// so the estimate is a deterministic function of (seed, n_avg, x).
inline AverageField empirical_average_field(SystemModel model,
                                            std::vector<PerturbationProcess> perturbation,
                                            std::size_t n_avg) {
    model.validate();
    return AverageField{[model = std::move(model), perturbation = std::move(perturbation), n_avg](
                            std::span<const double> x, std::span<double> out) {
        const std::vector<double> estimate = estimate_average_field(model, perturbation, x, n_avg);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = estimate[i];
    }};
}

}  // namespace stochavg
