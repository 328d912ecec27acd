// Shared deterministic numerical kernels: Gauss-Hermite quadrature, fixed-step
// RK4, damped scalar Newton, cubic roots, normal tail, small dense solves.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stochavg {

/// Tolerances and defaults pinned in one place; the acceptance suite relies
/// on these exact values.
namespace defaults {
inline constexpr int kQuadratureOrder = 64;         // initial Gauss-Hermite node count
inline constexpr int kQuadratureMaxOrder = 1024;    // node-doubling cap
inline constexpr double kQuadratureTol = 1e-10;     // node-doubling agreement
inline constexpr double kNewtonTol = 1e-12;
inline constexpr int kNewtonMaxIter = 100;
inline constexpr double kEquilibriumNewtonTol = 1e-15;
inline constexpr double kEquilibriumResidualTol = 1e-10;
inline constexpr double kBlowupLimit = 1e12;        // |state| beyond this is an explosion
inline constexpr double kResidualIdentityTol = 1e-12;
inline constexpr double kStabilityBisectTol = 1e-6;
inline constexpr double kEquilibriumMapTol = 1e-10; // plant fixed-point defect
}  // namespace defaults

struct NonConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// P{N(0,1) >= x}.
inline double normal_upper_tail(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// Gauss-Hermite quadrature (physicists' convention, weight e^{-t^2})
// ---------------------------------------------------------------------------

struct QuadratureRule {
    std::vector<double> nodes;    // ascending
    std::vector<double> weights;  // positive, sum to sqrt(pi)
    int order() const { return static_cast<int>(nodes.size()); }
};

/// Nodes and weights for the n-point Gauss-Hermite rule. Initial guesses are
/// the classical asymptotic ones, refined by Newton on the orthonormal
/// Hermite recurrence.
inline QuadratureRule hermite_rule(int order) {
    if (order < 1) throw std::invalid_argument("hermite_rule: order must be >= 1");
    constexpr double kPiQuarterInv = 0.75112554446494248;  // pi^{-1/4}
    QuadratureRule rule;
    rule.nodes.assign(order, 0.0);
    rule.weights.assign(order, 0.0);
    const int half = (order + 1) / 2;
    double z = 0.0;
    for (int i = 0; i < half; ++i) {
        if (i == 0) {
            z = std::sqrt(2.0 * order + 1.0) - 1.85575 * std::pow(2.0 * order + 1.0, -1.0 / 6.0);
        } else if (i == 1) {
            z -= 1.14 * std::pow(static_cast<double>(order), 0.426) / z;
        } else if (i == 2) {
            z = 1.86 * z - 0.86 * rule.nodes[0];
        } else if (i == 3) {
            z = 1.91 * z - 0.91 * rule.nodes[1];
        } else {
            z = 2.0 * z - rule.nodes[i - 2];
        }
        double p_n = 0.0, p_nm1 = 0.0;
        for (int iter = 0; iter < 200; ++iter) {
            double p1 = kPiQuarterInv, p2 = 0.0;
            for (int j = 0; j < order; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
            }
            p_n = p1;
            p_nm1 = p2;
            const double dz = p_n / (std::sqrt(2.0 * order) * p_nm1);
            z -= dz;
            if (std::abs(dz) <= 1e-15 * (1.0 + std::abs(z))) break;
        }
        const double deriv = std::sqrt(2.0 * order) * p_nm1;
        const bool center = (order % 2 == 1) && (i == half - 1);
        rule.nodes[i] = center ? 0.0 : z;
        rule.nodes[order - 1 - i] = center ? 0.0 : -z;
        rule.weights[i] = 2.0 / (deriv * deriv);
        rule.weights[order - 1 - i] = rule.weights[i];
    }
    std::reverse(rule.nodes.begin(), rule.nodes.end());  // largest-first -> ascending
    std::reverse(rule.weights.begin(), rule.weights.end());
    return rule;
}

/// Memoized rules; average-system evaluations request the same orders per step.
inline const QuadratureRule& cached_hermite_rule(int order) {
    static std::mutex mutex;
    static std::map<int, QuadratureRule> cache;
    std::scoped_lock lock(mutex);
    auto it = cache.find(order);
    if (it == cache.end()) it = cache.emplace(order, hermite_rule(order)).first;
    return it->second;
}

/// E[g(V)] for V ~ N(0, sigma^2): (1/sqrt(pi)) * sum w_i g(sqrt(2) sigma t_i).
template <class G>
double gaussian_expectation(const QuadratureRule& rule, double sigma, G&& g) {
    constexpr double kSqrtPiInv = 0.56418958354775628;
    const double scale = std::sqrt(2.0) * sigma;
    double sum = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
        sum += rule.weights[i] * g(scale * rule.nodes[i]);
    }
    return sum * kSqrtPiInv;
}

/// Same expectation with node doubling until two successive orders agree to
/// `tol`; returns the finer value. Throws NonConvergenceError past the cap.
template <class G>
double gaussian_expectation_adaptive(double sigma, G&& g,
                                     int initial_order = defaults::kQuadratureOrder,
                                     double tol = defaults::kQuadratureTol,
                                     int max_order = defaults::kQuadratureMaxOrder) {
    int order = initial_order;
    double coarse = gaussian_expectation(cached_hermite_rule(order), sigma, g);
    while (2 * order <= max_order) {
        order *= 2;
        const double fine = gaussian_expectation(cached_hermite_rule(order), sigma, g);
        if (std::abs(fine - coarse) <= tol * (1.0 + std::abs(fine))) return fine;
        coarse = fine;
    }
    throw NonConvergenceError("gaussian_expectation_adaptive: no plateau up to order " +
                              std::to_string(max_order));
}

// ---------------------------------------------------------------------------
// Scalar root finding
// ---------------------------------------------------------------------------

/// Damped Newton iteration: residual-halving line search guarantees a
/// monotone decrease of |g|. Returns x with |g(x)| <= tol.
template <class G, class DG>
double newton_scalar(G&& g, DG&& dg, double x0, double tol = defaults::kNewtonTol,
                     int max_iter = defaults::kNewtonMaxIter) {
    double x = x0;
    double gx = g(x);
    for (int iter = 0; iter < max_iter; ++iter) {
        if (std::abs(gx) <= tol) return x;
        const double slope = dg(x);
        if (slope == 0.0 || !std::isfinite(slope)) {
            throw NonConvergenceError("newton_scalar: vanishing derivative");
        }
        double step = gx / slope;
        double x_next = x - step;
        double g_next = g(x_next);
        int halvings = 0;
        while (std::abs(g_next) > std::abs(gx) && halvings < 60) {
            step *= 0.5;
            x_next = x - step;
            g_next = g(x_next);
            ++halvings;
        }
        if (halvings == 60) {
            throw NonConvergenceError("newton_scalar: line search stalled");
        }
        x = x_next;
        gx = g_next;
    }
    if (std::abs(gx) <= tol) return x;
    throw NonConvergenceError("newton_scalar: max iterations exceeded");
}

// ---------------------------------------------------------------------------
// Cubic roots
// ---------------------------------------------------------------------------

/// Roots of c3 z^3 + c2 z^2 + c1 z + c0 (c3 != 0) by Durand-Kerner iteration
/// with Newton polishing. Ordering is multiset-stable: by real part, then
/// imaginary part. Residuals are verified to 1e-10 relative.
inline std::array<std::complex<double>, 3> cubic_roots(double c3, double c2, double c1, double c0) {
    if (c3 == 0.0) throw std::invalid_argument("cubic_roots: leading coefficient is zero");
    using C = std::complex<double>;
    const double a2 = c2 / c3, a1 = c1 / c3, a0 = c0 / c3;
    const auto poly = [&](C z) { return ((z + a2) * z + a1) * z + a0; };
    const auto dpoly = [&](C z) { return (3.0 * z + 2.0 * a2) * z + a1; };

    const double radius = 1.0 + std::max({std::abs(a2), std::abs(a1), std::abs(a0)});
    std::array<C, 3> z;
    C rot(0.4, 0.9);
    z[0] = radius * rot;
    z[1] = z[0] * rot;
    z[2] = z[1] * rot;
    for (int iter = 0; iter < 200; ++iter) {
        double update = 0.0;
        for (int i = 0; i < 3; ++i) {
            C denom(1.0, 0.0);
            for (int j = 0; j < 3; ++j) {
                if (j != i) denom *= z[i] - z[j];
            }
            const C delta = poly(z[i]) / denom;
            z[i] -= delta;
            update = std::max(update, std::abs(delta));
        }
        if (update <= 1e-15 * (1.0 + radius)) break;
    }
    for (int i = 0; i < 3; ++i) {  // polish; restores quadratic order near simple roots
        for (int k = 0; k < 3; ++k) {
            const C d = dpoly(z[i]);
            if (std::abs(d) == 0.0) break;
            z[i] -= poly(z[i]) / d;
        }
    }
    std::sort(z.begin(), z.end(), [](const C& a, const C& b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    for (const C& root : z) {
        const double mag = std::abs(root);
        const double scale = ((mag + std::abs(a2)) * mag + std::abs(a1)) * mag + std::abs(a0) + 1.0;
        if (std::abs(poly(root)) > 1e-10 * scale) {
            throw NonConvergenceError("cubic_roots: residual check failed");
        }
    }
    return z;
}

// ---------------------------------------------------------------------------
// Classical RK4, autonomous systems
// ---------------------------------------------------------------------------

/// One classical RK4 step of dx/dt = f(x), in place. `f(x, out)` writes the
/// derivative; scratch must hold 5 vectors of the state dimension.
template <class F>
void rk4_step(F&& f, std::vector<double>& x, double h,
              std::array<std::vector<double>, 5>& scratch) {
    const std::size_t n = x.size();
    auto& k1 = scratch[0];
    auto& k2 = scratch[1];
    auto& k3 = scratch[2];
    auto& k4 = scratch[3];
    auto& tmp = scratch[4];
    f(x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
    f(tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
    f(tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
    f(tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

// ---------------------------------------------------------------------------
// Small dense linear solve (Markov stationary distributions and the like)
// ---------------------------------------------------------------------------

/// Gaussian elimination with partial pivoting; A is row-major n x n.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        }
        if (std::abs(a[pivot][col]) < 1e-14) {
            throw std::invalid_argument("solve_dense: singular matrix");
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double sum = b[r];
        for (std::size_t c = r + 1; c < n; ++c) sum -= a[r][c] * x[c];
        x[r] = sum / a[r][r];
    }
    return x;
}

}  // namespace stochavg
