// Ergodic perturbation and measurement-noise processes with known invariant
// distributions, plus the exact Gaussian sine moments used by the
// extremum-seeking average systems.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stochavg/numerics.hpp"
#include "stochavg/rng.hpp"

namespace stochavg {

// ---------------------------------------------------------------------------
// Process kinds
// ---------------------------------------------------------------------------

/// i.i.d. N(0, sigma^2). sigma = 0 degenerates to the constant 0 stream.
struct IidGaussian {
    double sigma = 1.0;
    bool operator==(const IidGaussian&) const = default;
};

/// clamp(Z, -bound, bound) with Z i.i.d. N(0, sigma1^2); the invariant
/// distribution carries atoms of mass P{Z >= bound} at each endpoint.
struct TruncatedGaussian {
    double sigma1 = 1.0;
    double bound = 1.0;
    bool operator==(const TruncatedGaussian&) const = default;
};

/// Finite-state chain: row-stochastic transition matrix over real state
/// values. Must be irreducible and aperiodic; started from the stationary
/// distribution so the stream is strictly stationary.
struct FiniteMarkov {
    std::vector<std::vector<double>> transition;
    std::vector<double> states;
    bool operator==(const FiniteMarkov&) const = default;
};

/// Ornstein-Uhlenbeck process sampled every `sample_period`, using the exact
/// Gaussian transition (not Euler), so the sampled chain is exactly ergodic
/// with invariant N(0, volatility^2 / (2 mean_reversion)).
struct SampledOu {
    double mean_reversion = 1.0;
    double volatility = 1.0;
    double sample_period = 1.0;
    bool operator==(const SampledOu&) const = default;
};

using ProcessKind = std::variant<IidGaussian, TruncatedGaussian, FiniteMarkov, SampledOu>;

struct PerturbationProcess {
    ProcessKind kind;
    std::uint64_t seed = 0;
    bool operator==(const PerturbationProcess&) const = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

namespace detail {

// Period of a strongly connected directed graph: gcd over edges (u, v) of
// level[u] + 1 - level[v], levels from a BFS tree.
inline bool is_irreducible_aperiodic(const std::vector<std::vector<double>>& p) {
    const std::size_t n = p.size();
    const auto reaches_all = [&](bool reversed) {
        std::vector<char> seen(n, 0);
        std::queue<std::size_t> queue;
        queue.push(0);
        seen[0] = 1;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop();
            for (std::size_t v = 0; v < n; ++v) {
                const double edge = reversed ? p[v][u] : p[u][v];
                if (edge > 0.0 && !seen[v]) {
                    seen[v] = 1;
                    queue.push(v);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    if (!reaches_all(false) || !reaches_all(true)) return false;

    std::vector<long> level(n, -1);
    std::queue<std::size_t> queue;
    queue.push(0);
    level[0] = 0;
    while (!queue.empty()) {
        const std::size_t u = queue.front();
        queue.pop();
        for (std::size_t v = 0; v < n; ++v) {
            if (p[u][v] > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                queue.push(v);
            }
        }
    }
    long period = 0;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = 0; v < n; ++v) {
            if (p[u][v] > 0.0) period = std::gcd(period, std::abs(level[u] + 1 - level[v]));
        }
    }
    return period == 1;
}

}  // namespace detail

/// Stationary distribution of an already-validated chain: solves pi P = pi,
/// sum pi = 1.
inline std::vector<double> markov_stationary(const FiniteMarkov& chain) {
    const std::size_t n = chain.states.size();
    // (P^T - I) pi = 0 with the last equation replaced by sum pi = 1.
    std::vector<std::vector<double>> a(n, std::vector<double>(n, 0.0));
    std::vector<double> b(n, 0.0);
    for (std::size_t r = 0; r + 1 < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) a[r][c] = chain.transition[c][r] - (r == c ? 1.0 : 0.0);
    }
    for (std::size_t c = 0; c < n; ++c) a[n - 1][c] = 1.0;
    b[n - 1] = 1.0;
    return solve_dense(std::move(a), std::move(b));
}

/// Throws std::invalid_argument on any parameter the paper's assumptions
/// exclude; streams are constructed only from validated kinds.
inline void validate(const ProcessKind& kind) {
    std::visit(
        [](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IidGaussian>) {
                if (!(k.sigma >= 0.0)) throw std::invalid_argument("iid-gaussian: sigma must be >= 0");
            } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
                if (!(k.sigma1 > 0.0)) throw std::invalid_argument("truncated-gaussian: sigma1 must be > 0");
                if (!(k.bound >= 0.0)) throw std::invalid_argument("truncated-gaussian: bound must be >= 0");
            } else if constexpr (std::is_same_v<T, FiniteMarkov>) {
                const std::size_t n = k.states.size();
                if (n == 0) throw std::invalid_argument("finite-markov: empty state set");
                if (k.transition.size() != n) throw std::invalid_argument("finite-markov: matrix/state size mismatch");
                for (const auto& row : k.transition) {
                    if (row.size() != n) throw std::invalid_argument("finite-markov: non-square transition matrix");
                    double sum = 0.0;
                    for (double e : row) {
                        if (e < 0.0) throw std::invalid_argument("finite-markov: negative transition probability");
                        sum += e;
                    }
                    if (std::abs(sum - 1.0) > 1e-12) {
                        throw std::invalid_argument("finite-markov: row sum deviates from 1 by more than 1e-12");
                    }
                }
                if (!detail::is_irreducible_aperiodic(k.transition)) {
                    throw std::invalid_argument("finite-markov: chain must be irreducible and aperiodic");
                }
            } else if constexpr (std::is_same_v<T, SampledOu>) {
                if (!(k.mean_reversion > 0.0)) throw std::invalid_argument("sampled-ou: mean_reversion must be > 0");
                if (!(k.volatility >= 0.0)) throw std::invalid_argument("sampled-ou: volatility must be >= 0");
                if (!(k.sample_period > 0.0)) throw std::invalid_argument("sampled-ou: sample_period must be > 0");
            }
        },
        kind);
}

// ---------------------------------------------------------------------------
// Moments of the invariant distributions
// ---------------------------------------------------------------------------

/// E[sin^order(V)] for V ~ N(0, sigma^2), closed form. Odd orders vanish;
/// the order-2 and order-4 values drive the average error systems.
inline double gaussian_sine_moment(double sigma, int order) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_sine_moment: sigma must be > 0");
    switch (order) {
        case 1:
        case 3:
            return 0.0;
        case 2:
            return 0.5 - 0.5 * std::exp(-2.0 * sigma * sigma);
        case 4:
            return 3.0 / 8.0 - 0.5 * std::exp(-2.0 * sigma * sigma) +
                   0.125 * std::exp(-8.0 * sigma * sigma);
        default:
            throw std::invalid_argument("gaussian_sine_moment: order must be in {1,2,3,4}");
    }
}

struct TailMass {
    double at_plus_bound;
    double at_minus_bound;
};

/// Atom masses of the truncated-Gaussian invariant distribution:
/// nu([M, inf)) and nu((-inf, -M]) for nu = N(0, sigma1^2); equal by symmetry.
inline TailMass truncated_noise_mass(double sigma1, double bound) {
    if (!(sigma1 > 0.0)) throw std::invalid_argument("truncated_noise_mass: sigma1 must be > 0");
    if (!(bound > 0.0)) throw std::invalid_argument("truncated_noise_mass: bound must be > 0");
    const double mass = normal_upper_tail(bound / sigma1);
    return {mass, mass};
}

// ---------------------------------------------------------------------------
// Streams
// ---------------------------------------------------------------------------

/// Sample stream of one perturbation process. Identical seeds reproduce
/// identical streams bit-exactly. Single-owner mutable; movable, not
/// shareable for concurrent mutation.
class ProcessStream {
public:
    explicit ProcessStream(PerturbationProcess process)
        : process_(std::move(process)), rng_(process_.seed) {
        validate(process_.kind);
        if (const auto* markov = std::get_if<FiniteMarkov>(&process_.kind)) {
            const std::size_t n = markov->states.size();
            cumulative_.assign(n * n, 0.0);
            for (std::size_t r = 0; r < n; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < n; ++c) {
                    acc += markov->transition[r][c];
                    cumulative_[r * n + c] = acc;
                }
                cumulative_[r * n + (n - 1)] = 1.0;  // guard against rounding in the last bin
            }
            const std::vector<double> pi = markov_stationary(*markov);
            state_index_ = sample_index(pi);
        } else if (const auto* ou = std::get_if<SampledOu>(&process_.kind)) {
            const double kappa = ou->mean_reversion;
            ou_decay_ = std::exp(-kappa * ou->sample_period);
            ou_noise_ = ou->volatility * std::sqrt((1.0 - ou_decay_ * ou_decay_) / (2.0 * kappa));
            const double stationary_sd = ou->volatility / std::sqrt(2.0 * kappa);
            ou_state_ = stationary_sd * rng_.gaussian();
        }
    }

    /// Y_{k+1}: draws the next sample and advances the stream.
    double next() {
        return std::visit(
            [this](const auto& k) -> double {
                using T = std::decay_t<decltype(k)>;
                if constexpr (std::is_same_v<T, IidGaussian>) {
                    return k.sigma * rng_.gaussian();
                } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
                    return std::clamp(k.sigma1 * rng_.gaussian(), -k.bound, k.bound);
                } else if constexpr (std::is_same_v<T, FiniteMarkov>) {
                    const std::size_t n = k.states.size();
                    const double u = rng_.uniform01();
                    const double* row = cumulative_.data() + state_index_ * n;
                    std::size_t next_index = 0;
                    while (next_index + 1 < n && u >= row[next_index]) ++next_index;
                    state_index_ = next_index;
                    return k.states[next_index];
                } else {
                    ou_state_ = ou_decay_ * ou_state_ + ou_noise_ * rng_.gaussian();
                    return ou_state_;
                }
            },
            process_.kind);
    }

    const PerturbationProcess& process() const { return process_; }

private:
    std::size_t sample_index(const std::vector<double>& weights) {
        const double u = rng_.uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.size() - 1;
    }

    PerturbationProcess process_;
    RandomEngine rng_;
    std::size_t state_index_ = 0;
    std::vector<double> cumulative_;
    double ou_state_ = 0.0;
    double ou_decay_ = 0.0;
    double ou_noise_ = 0.0;
};

/// Vector of independent component streams; the perturbation value fed to a
/// vector field. Independence across components comes from disjoint
/// sub-streams of one master seed.
class JointStream {
public:
    explicit JointStream(std::vector<PerturbationProcess> components) {
        components_.reserve(components.size());
        for (auto& c : components) components_.emplace_back(std::move(c));
    }

    /// Components seeded as sub-streams 0, 1, ... of `master`.
    static JointStream substreams(const std::vector<ProcessKind>& kinds, std::uint64_t master) {
        std::vector<PerturbationProcess> components;
        components.reserve(kinds.size());
        for (std::size_t i = 0; i < kinds.size(); ++i) {
            components.push_back({kinds[i], substream_seed(master, i)});
        }
        return JointStream(std::move(components));
    }

    std::size_t dimension() const { return components_.size(); }

    void next(std::vector<double>& out) {
        out.resize(components_.size());
        for (std::size_t i = 0; i < components_.size(); ++i) out[i] = components_[i].next();
    }

private:
    std::vector<ProcessStream> components_;
};

}  // namespace stochavg
