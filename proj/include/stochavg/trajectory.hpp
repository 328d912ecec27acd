// Indexed state sequences with their continuous-time embedding t_k = eps*k.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace stochavg {

/// Dense state sequence. The time embedding t_k = epsilon*k is implied by
/// the stored epsilon, never stored redundantly.
class Trajectory {
public:
    Trajectory(std::size_t dimension, double epsilon) : dimension_(dimension), epsilon_(epsilon) {
        if (dimension_ == 0) throw std::invalid_argument("Trajectory: dimension must be >= 1");
    }

    std::size_t dimension() const { return dimension_; }
    double epsilon() const { return epsilon_; }

    /// Number of stored states (a K-step run stores K+1).
    std::size_t size() const { return data_.size() / dimension_; }

    void reserve(std::size_t states) { data_.reserve(states * dimension_); }

    void append(std::span<const double> state) {
        if (state.size() != dimension_) throw std::invalid_argument("Trajectory::append: dimension mismatch");
        data_.insert(data_.end(), state.begin(), state.end());
    }

    void append_scalar(double value) {
        if (dimension_ != 1) throw std::invalid_argument("Trajectory::append_scalar: dimension != 1");
        data_.push_back(value);
    }

    std::span<const double> state(std::size_t k) const {
        if (k >= size()) throw std::out_of_range("Trajectory::state: index out of range");
        return {data_.data() + k * dimension_, dimension_};
    }

    double scalar_state(std::size_t k) const {
        if (dimension_ != 1) throw std::invalid_argument("Trajectory::scalar_state: dimension != 1");
        return state(k)[0];
    }

    double time_of(std::size_t k) const { return epsilon_ * static_cast<double>(k); }

    std::span<const double> data() const { return data_; }

private:
    std::size_t dimension_;
    double epsilon_;
    std::vector<double> data_;
};

/// m(t) = max{k : t_k <= t}.
inline std::size_t embedding_index(const Trajectory& traj, double t) {
    const double eps = traj.epsilon();
    const std::size_t last = traj.size() - 1;
    if (t < 0.0 || t > eps * static_cast<double>(last)) {
        throw std::out_of_range("embed_time: t outside [0, eps*(len-1)]");
    }
    std::size_t k = static_cast<std::size_t>(t / eps);
    while (k + 1 <= last && eps * static_cast<double>(k + 1) <= t) ++k;
    while (k > 0 && eps * static_cast<double>(k) > t) --k;
    return k;
}

/// X(t): the piecewise-constant embedding, X(t) = X_k for t in [t_k, t_{k+1}).
inline std::span<const double> embed_time(const Trajectory& traj, double t) {
    return traj.state(embedding_index(traj, t));
}

}  // namespace stochavg
