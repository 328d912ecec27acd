// Measurable surrogates for the approximation and weak-stability theorems:
// sup-deviations over [N/eps] steps, first-exit times, exceedance
// probabilities, exponential envelopes, and the residual decomposition
// R(X_k, Y_{k+1}) = eps (f(X_k, Y_{k+1}) - f_bar(X_k)).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "stochavg/averaging.hpp"

namespace stochavg {

/// Exponential envelope |X_k| <= c |x0| gamma^k + delta, valid for |x0| < r.
struct EnvelopeSpec {
    double gain = 1.0;     // c
    double decay = 0.5;    // gamma, strictly inside (0, 1)
    double residual = 0.0; // delta >= 0
    double radius = std::numeric_limits<double>::infinity();  // r

    void validate() const {
        if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("EnvelopeSpec: decay must lie in (0,1)");
        if (!(residual >= 0.0)) throw std::invalid_argument("EnvelopeSpec: residual must be >= 0");
    }
};

/// One replication ensemble: per-seed sup-deviations over a fixed horizon.
struct DeviationReport {
    double epsilon = 0.0;
    std::size_t horizon_steps = 0;                  // floor(N / eps)
    double sup_deviation = 0.0;                     // max over per_seed
    double median_sup_deviation = 0.0;
    std::vector<double> per_seed;                   // +inf marks a blown-up replication
    std::vector<std::uint64_t> seeds;
    std::size_t blowups = 0;
};

struct ExceedanceEstimate {
    double estimate = 0.0;
    double std_error = 0.0;   // binomial: sqrt(p(1-p)/R)
    std::size_t exceedances = 0;
    std::size_t replications = 0;
    std::size_t blowups = 0;  // blown-up replications, counted as exceedances
};

/// A runnable averaging experiment: the original system, its average field,
/// the perturbation component kinds, and the start point. Replication r uses
/// sub-stream r of the master seed.
struct ExperimentSpec {
    SystemModel model;
    AverageField average;
    std::vector<ProcessKind> perturbation;
    std::vector<double> x0;
    std::uint64_t master_seed = 0;
};

namespace detail {

inline double euclidean_deviation(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

/// Runs fn(r) for r in [0, count); contiguous chunks per thread. Results must
/// be written into per-index slots so the outcome is independent of the
/// thread count.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t r = 0; r < count; ++r) fn(r);
        return;
    }
    const unsigned used = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    std::vector<std::thread> pool;
    pool.reserve(used);
    for (unsigned t = 0; t < used; ++t) {
        const std::size_t lo = count * t / used;
        const std::size_t hi = count * (t + 1) / used;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t r = lo; r < hi; ++r) fn(r);
        });
    }
    for (auto& worker : pool) worker.join();
}

inline double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace detail

/// max_{0<=k<=horizon} |X_k - Xbar_k| in the Euclidean norm. The two
/// trajectories must share epsilon and cover the horizon.
inline double sup_deviation(const Trajectory& a, const Trajectory& b, std::size_t horizon) {
    if (a.epsilon() != b.epsilon()) throw std::invalid_argument("sup_deviation: epsilon mismatch");
    if (a.dimension() != b.dimension()) throw std::invalid_argument("sup_deviation: dimension mismatch");
    if (a.size() <= horizon || b.size() <= horizon) {
        throw std::invalid_argument("sup_deviation: trajectories shorter than horizon");
    }
    double sup = 0.0;
    for (std::size_t k = 0; k <= horizon; ++k) {
        sup = std::max(sup, detail::euclidean_deviation(a.state(k), b.state(k)));
    }
    return sup;
}

/// inf{k : |X_k - Xbar_k| > delta} (strict, matching the stopping times);
/// nullopt when the deviation never exceeds delta within the trajectories.
inline std::optional<std::size_t> deviation_exit_time(const Trajectory& a, const Trajectory& b,
                                                      double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("deviation_exit_time: delta must be > 0");
    const std::size_t len = std::min(a.size(), b.size());
    for (std::size_t k = 0; k < len; ++k) {
        if (detail::euclidean_deviation(a.state(k), b.state(k)) > delta) return k;
    }
    return std::nullopt;
}

/// inf{k : |X_k| > c |x0| gamma^k + delta}; nullopt when the envelope is
/// respected over the whole stored horizon.
inline std::optional<std::size_t> envelope_exit_time(const Trajectory& traj, const EnvelopeSpec& envelope) {
    envelope.validate();
    double norm0 = 0.0;
    for (double v : traj.state(0)) norm0 += v * v;
    norm0 = std::sqrt(norm0);
    double bound = envelope.gain * norm0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        double norm = 0.0;
        for (double v : traj.state(k)) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > bound + envelope.residual) return k;
        bound *= envelope.decay;
    }
    return std::nullopt;
}

/// P{sup_{0<=k<=horizon} |X_k - Xbar_k| > delta}, estimated over independent
/// replications. A blown-up replication counts as an exceedance and is
/// flagged separately.
inline ExceedanceEstimate exceedance_probability(const ExperimentSpec& spec, double delta,
                                                 std::size_t horizon, std::size_t replications,
                                                 unsigned threads = 1) {
    if (replications < 2) throw std::invalid_argument("exceedance_probability: need >= 2 replications");
    if (!(delta > 0.0)) throw std::invalid_argument("exceedance_probability: delta must be > 0");
    spec.model.validate();
    std::vector<char> exceeded(replications, 0);
    std::vector<char> blown(replications, 0);
    detail::parallel_for(replications, threads, [&](std::size_t r) {
        JointStream stream = JointStream::substreams(spec.perturbation, substream_seed(spec.master_seed, r));
        try {
            const Trajectory original = iterate_original(spec.model, stream, spec.x0, horizon);
            const Trajectory averaged =
                iterate_discrete_average(spec.average, spec.model.epsilon, spec.x0, horizon);
            exceeded[r] = sup_deviation(original, averaged, horizon) > delta ? 1 : 0;
        } catch (const BlowupError&) {
            exceeded[r] = 1;
            blown[r] = 1;
        }
    });
    ExceedanceEstimate est;
    est.replications = replications;
    for (std::size_t r = 0; r < replications; ++r) {
        est.exceedances += exceeded[r];
        est.blowups += blown[r];
    }
    est.estimate = static_cast<double>(est.exceedances) / static_cast<double>(replications);
    est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(replications));
    return est;
}

/// P{exists k <= horizon : |X_k| > c |x0| gamma^k + delta} for the original
/// system under the envelope. Requires |x0| < r.
inline ExceedanceEstimate envelope_exceedance(const ExperimentSpec& spec, const EnvelopeSpec& envelope,
                                              std::size_t horizon, std::size_t replications,
                                              unsigned threads = 1) {
    if (replications < 2) throw std::invalid_argument("envelope_exceedance: need >= 2 replications");
    envelope.validate();
    spec.model.validate();
    double norm0 = 0.0;
    for (double v : spec.x0) norm0 += v * v;
    if (!(std::sqrt(norm0) < envelope.radius)) {
        throw std::invalid_argument("envelope_exceedance: |x0| must be below the envelope radius");
    }
    std::vector<char> exceeded(replications, 0);
    std::vector<char> blown(replications, 0);
    detail::parallel_for(replications, threads, [&](std::size_t r) {
        JointStream stream = JointStream::substreams(spec.perturbation, substream_seed(spec.master_seed, r));
        try {
            const Trajectory original = iterate_original(spec.model, stream, spec.x0, horizon);
            exceeded[r] = envelope_exit_time(original, envelope).has_value() ? 1 : 0;
        } catch (const BlowupError&) {
            exceeded[r] = 1;
            blown[r] = 1;
        }
    });
    ExceedanceEstimate est;
    est.replications = replications;
    for (std::size_t r = 0; r < replications; ++r) {
        est.exceedances += exceeded[r];
        est.blowups += blown[r];
    }
    est.estimate = static_cast<double>(est.exceedances) / static_cast<double>(replications);
    est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(replications));
    return est;
}

/// Residuals R_k = eps (f(X_k, Y_{k+1}) - f_bar(X_k)) along a stored
/// trajectory, with the replay stream reproducing the Y-sequence that
/// generated it. Verifies the reconstruction identity
/// states[k+1] - states[k] - eps*f_bar(states[k]) = R_k to 1e-12; a failure
/// means the replay stream does not match the trajectory's seed.
inline std::vector<std::vector<double>> compute_residual(const SystemModel& model,
                                                         const AverageField& average,
                                                         const Trajectory& traj, JointStream& replay) {
    model.validate();
    if (traj.dimension() != model.dimension) throw std::invalid_argument("compute_residual: dimension mismatch");
    if (traj.epsilon() != model.epsilon) throw std::invalid_argument("compute_residual: epsilon mismatch");
    const std::size_t steps = traj.size() - 1;
    std::vector<std::vector<double>> residuals(steps);
    std::vector<double> y;
    std::vector<double> fx(model.dimension);
    std::vector<double> fbar(model.dimension);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto x = traj.state(k);
        const auto x_next = traj.state(k + 1);
        replay.next(y);
        model.field(x, y, fx);
        average.field(x, fbar);
        auto& r = residuals[k];
        r.resize(model.dimension);
        for (std::size_t i = 0; i < r.size(); ++i) {
            r[i] = model.epsilon * (fx[i] - fbar[i]);
            const double reconstructed = x_next[i] - x[i] - model.epsilon * fbar[i];
            if (std::abs(reconstructed - r[i]) > defaults::kResidualIdentityTol) {
                throw std::invalid_argument(
                    "compute_residual: reconstruction identity failed (stream/seed mismatch?)");
            }
        }
    }
    return residuals;
}

/// Per-epsilon ensemble of sup-deviations over [N/eps] steps.
inline DeviationReport deviation_report(const ExperimentSpec& spec, double horizon_time,
                                        std::size_t replications, unsigned threads = 1) {
    spec.model.validate();
    DeviationReport report;
    report.epsilon = spec.model.epsilon;
    report.horizon_steps = static_cast<std::size_t>(horizon_time / spec.model.epsilon);
    report.per_seed.assign(replications, 0.0);
    report.seeds.assign(replications, 0);
    const std::size_t horizon = report.horizon_steps;
    detail::parallel_for(replications, threads, [&](std::size_t r) {
        const std::uint64_t seed = substream_seed(spec.master_seed, r);
        report.seeds[r] = seed;
        JointStream stream = JointStream::substreams(spec.perturbation, seed);
        try {
            const Trajectory original = iterate_original(spec.model, stream, spec.x0, horizon);
            const Trajectory averaged =
                iterate_discrete_average(spec.average, spec.model.epsilon, spec.x0, horizon);
            report.per_seed[r] = sup_deviation(original, averaged, horizon);
        } catch (const BlowupError&) {
            report.per_seed[r] = std::numeric_limits<double>::infinity();
        }
    });
    for (double v : report.per_seed) {
        if (std::isinf(v)) ++report.blowups;
    }
    report.sup_deviation = *std::max_element(report.per_seed.begin(), report.per_seed.end());
    report.median_sup_deviation = detail::median(report.per_seed);
    return report;
}

/// The eps -> 0 trend of Lemma-7-type deviations, probed by a sweep: one
/// report per epsilon (descending), median aggregated across seeds for
/// robustness to rare near-blow-up seeds.
inline std::vector<DeviationReport> averaging_rate_study(const ExperimentSpec& spec,
                                                         const std::vector<double>& epsilons,
                                                         double horizon_time, std::size_t replications,
                                                         unsigned threads = 1) {
    if (epsilons.empty()) throw std::invalid_argument("averaging_rate_study: empty epsilon list");
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
        if (!(epsilons[i] > 0.0)) throw std::invalid_argument("averaging_rate_study: epsilons must be > 0");
        if (i > 0 && epsilons[i] >= epsilons[i - 1]) {
            throw std::invalid_argument("averaging_rate_study: epsilons must be descending");
        }
    }
    std::vector<DeviationReport> rows;
    rows.reserve(epsilons.size());
    for (double eps : epsilons) {
        ExperimentSpec row_spec = spec;
        row_spec.model.epsilon = eps;
        rows.push_back(deviation_report(row_spec, horizon_time, replications, threads));
    }
    return rows;
}

}  // namespace stochavg
