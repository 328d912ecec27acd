// Experiment configuration: a strict JSON schema (unknown keys rejected,
// typed fields, path-carrying diagnostics) that round-trips exactly through
// parse/emit.
#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "stochavg/es_dynamic.hpp"
#include "stochavg/es_static.hpp"
#include "stochavg/processes.hpp"

namespace stochavg::config {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

/// Strict object reader: every key must be consumed, every access is typed,
/// errors carry the JSON path.
class Cursor {
public:
    Cursor(const nlohmann::json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    const nlohmann::json& raw() const { return node_; }
    const std::string& path() const { return path_; }

    bool has(const std::string& key) const { return node_.contains(key); }

    const nlohmann::json& require(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) throw ConfigError(path_ + ": missing required key '" + key + "'");
        return node_.at(key);
    }

    const nlohmann::json* optional(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) return nullptr;
        return &node_.at(key);
    }

    double number(const std::string& key) { return as_number(require(key), key); }

    double number_or(const std::string& key, double fallback) {
        const auto* j = optional(key);
        return j ? as_number(*j, key) : fallback;
    }

    std::uint64_t uinteger(const std::string& key) { return as_uinteger(require(key), key); }

    std::uint64_t uinteger_or(const std::string& key, std::uint64_t fallback) {
        const auto* j = optional(key);
        return j ? as_uinteger(*j, key) : fallback;
    }

    std::string text(const std::string& key) { return as_text(require(key), key); }

    std::string text_or(const std::string& key, const std::string& fallback) {
        const auto* j = optional(key);
        return j ? as_text(*j, key) : fallback;
    }

    std::vector<double> number_array(const std::string& key) {
        const auto& j = require(key);
        if (!j.is_array()) throw ConfigError(path_ + "." + key + ": expected an array of numbers");
        std::vector<double> out;
        out.reserve(j.size());
        for (const auto& e : j) out.push_back(as_number(e, key));
        return out;
    }

    Cursor child(const std::string& key) { return Cursor(require(key), path_ + "." + key); }

    std::optional<Cursor> optional_child(const std::string& key) {
        const auto* j = optional(key);
        if (!j || j->is_null()) return std::nullopt;
        return Cursor(*j, path_ + "." + key);
    }

    /// Unknown-key check; call after all reads.
    void finish() {
        for (auto it = node_.begin(); it != node_.end(); ++it) {
            if (!seen_.contains(it.key())) {
                throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
            }
        }
    }

private:
    double as_number(const nlohmann::json& j, const std::string& key) const {
        if (!j.is_number()) throw ConfigError(path_ + "." + key + ": expected a number");
        return j.get<double>();
    }
    std::uint64_t as_uinteger(const nlohmann::json& j, const std::string& key) const {
        if (!j.is_number_unsigned()) {
            throw ConfigError(path_ + "." + key + ": expected a non-negative integer");
        }
        return j.get<std::uint64_t>();
    }
    std::string as_text(const nlohmann::json& j, const std::string& key) const {
        if (!j.is_string()) throw ConfigError(path_ + "." + key + ": expected a string");
        return j.get<std::string>();
    }

    const nlohmann::json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Perturbation components
// ---------------------------------------------------------------------------

inline ProcessKind parse_process_kind(detail::Cursor cursor) {
    const std::string kind = cursor.text("kind");
    ProcessKind result;
    if (kind == "iid-gaussian") {
        result = IidGaussian{cursor.number("sigma")};
    } else if (kind == "truncated-gaussian") {
        result = TruncatedGaussian{cursor.number("sigma1"), cursor.number("bound")};
    } else if (kind == "finite-markov") {
        const auto& rows = cursor.require("transition");
        if (!rows.is_array()) throw ConfigError(cursor.path() + ".transition: expected an array of rows");
        FiniteMarkov markov;
        for (const auto& row : rows) {
            if (!row.is_array()) throw ConfigError(cursor.path() + ".transition: expected rows of numbers");
            markov.transition.emplace_back();
            for (const auto& e : row) {
                if (!e.is_number()) throw ConfigError(cursor.path() + ".transition: expected numbers");
                markov.transition.back().push_back(e.get<double>());
            }
        }
        markov.states = cursor.number_array("states");
        result = std::move(markov);
    } else if (kind == "sampled-ou") {
        result = SampledOu{cursor.number("mean_reversion"), cursor.number("volatility"),
                           cursor.number("sample_period")};
    } else {
        throw ConfigError(cursor.path() + ".kind: unknown process kind '" + kind + "'");
    }
    cursor.finish();
    validate(result);
    return result;
}

inline nlohmann::json emit_process_kind(const ProcessKind& kind) {
    nlohmann::json j;
    std::visit(
        [&j](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, IidGaussian>) {
                j["kind"] = "iid-gaussian";
                j["sigma"] = k.sigma;
            } else if constexpr (std::is_same_v<T, TruncatedGaussian>) {
                j["kind"] = "truncated-gaussian";
                j["sigma1"] = k.sigma1;
                j["bound"] = k.bound;
            } else if constexpr (std::is_same_v<T, FiniteMarkov>) {
                j["kind"] = "finite-markov";
                j["transition"] = k.transition;
                j["states"] = k.states;
            } else {
                j["kind"] = "sampled-ou";
                j["mean_reversion"] = k.mean_reversion;
                j["volatility"] = k.volatility;
                j["sample_period"] = k.sample_period;
            }
        },
        kind);
    return j;
}

inline std::vector<ProcessKind> parse_process_list(detail::Cursor& parent, const std::string& key) {
    const auto& j = parent.require(key);
    if (!j.is_array() || j.empty()) {
        throw ConfigError(parent.path() + "." + key + ": expected a non-empty array of process specs");
    }
    std::vector<ProcessKind> kinds;
    std::size_t index = 0;
    for (const auto& e : j) {
        kinds.push_back(parse_process_kind(
            detail::Cursor(e, parent.path() + "." + key + "[" + std::to_string(index) + "]")));
        ++index;
    }
    return kinds;
}

// ---------------------------------------------------------------------------
// Built-in systems for config-driven runs
// ---------------------------------------------------------------------------

/// dx = -rate * x, perturbation-independent; its own average field.
struct LinearDecaySystem {
    double rate = 1.0;
    std::uint64_t dimension = 1;
    bool operator==(const LinearDecaySystem&) const = default;
};

/// dx = sin(y), scalar; average field identically zero.
struct SineDriveSystem {
    bool operator==(const SineDriveSystem&) const = default;
};

/// The static-map estimation-error system with its closed-form average;
/// perturbation must be [iid-gaussian probe, optional truncated-gaussian noise].
struct StaticMapErrorSystem {
    double optimum_value = 1.0;
    double curvature = 1.0;
    double optimizer = 1.0;
    double amplitude = 0.8;
    bool operator==(const StaticMapErrorSystem&) const = default;
};

using SystemSpec = std::variant<LinearDecaySystem, SineDriveSystem, StaticMapErrorSystem>;

inline SystemSpec parse_system(detail::Cursor cursor) {
    const std::string kind = cursor.text("kind");
    SystemSpec result;
    if (kind == "linear-decay") {
        LinearDecaySystem sys;
        sys.rate = cursor.number("rate");
        sys.dimension = cursor.uinteger_or("dimension", 1);
        if (sys.dimension == 0) throw ConfigError(cursor.path() + ".dimension: must be >= 1");
        result = sys;
    } else if (kind == "sine-drive") {
        result = SineDriveSystem{};
    } else if (kind == "static-map-error") {
        StaticMapErrorSystem sys;
        auto map = cursor.child("map");
        sys.optimum_value = map.number("optimum_value");
        sys.curvature = map.number("curvature");
        sys.optimizer = map.number("optimizer");
        map.finish();
        sys.amplitude = cursor.number("amplitude");
        result = sys;
    } else {
        throw ConfigError(cursor.path() + ".kind: unknown system kind '" + kind + "'");
    }
    cursor.finish();
    return result;
}

inline nlohmann::json emit_system(const SystemSpec& spec) {
    nlohmann::json j;
    std::visit(
        [&j](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LinearDecaySystem>) {
                j["kind"] = "linear-decay";
                j["rate"] = s.rate;
                j["dimension"] = s.dimension;
            } else if constexpr (std::is_same_v<T, SineDriveSystem>) {
                j["kind"] = "sine-drive";
            } else {
                j["kind"] = "static-map-error";
                j["map"] = {{"optimum_value", s.optimum_value},
                            {"curvature", s.curvature},
                            {"optimizer", s.optimizer}};
                j["amplitude"] = s.amplitude;
            }
        },
        spec);
    return j;
}

// ---------------------------------------------------------------------------
// Per-experiment parameter blocks
// ---------------------------------------------------------------------------

struct SimulateParams {
    SystemSpec system;
    std::vector<ProcessKind> perturbation;
    std::vector<double> x0;
    double epsilon = 1e-3;
    std::uint64_t steps = 1000;
    bool operator==(const SimulateParams&) const = default;
};

struct AverageParams {
    SystemSpec system;
    std::vector<ProcessKind> perturbation;
    double grid_min = -2.0;
    double grid_max = 2.0;
    std::uint64_t grid_points = 20;
    std::uint64_t n_avg = 100000;
    bool operator==(const AverageParams&) const = default;
};

struct VerifyAveragingParams {
    SystemSpec system;
    std::vector<ProcessKind> perturbation;
    std::vector<double> x0;
    std::vector<double> epsilons;
    double horizon = 10.0;
    std::uint64_t replications = 50;
    bool operator==(const VerifyAveragingParams&) const = default;
};

struct NoiseSpec {
    double sigma1 = 0.2;
    double bound = 1.0;
    bool operator==(const NoiseSpec&) const = default;
};

struct EsStaticParams {
    double optimum_value = 1.0;
    double curvature = 1.0;
    double optimizer = 1.0;
    double amplitude = 0.8;
    double epsilon = 0.002;
    double probe_sigma = 2.0;
    std::optional<NoiseSpec> noise;
    double initial_estimate = 5.0;
    std::uint64_t steps = 10000;
    double band_half_width = 0.25;
    bool operator==(const EsStaticParams&) const = default;
};

struct PlantSpec {
    double pole = 0.5;
    double theta_star = 0.0;
    std::vector<double> output_poly;  // h(x), ascending coefficients
    bool operator==(const PlantSpec&) const = default;
};

struct EsDynamicParams {
    std::string mode = "reduced";  // reduced | reduced-average | closed-loop
    std::optional<std::vector<double>> varsigma_poly;  // reduced modes
    std::optional<PlantSpec> plant;                    // closed-loop mode
    double gain = 1.0;
    double w1 = 1.0;
    double w2 = 1.0;
    double amplitude = 0.05;
    double epsilon = 0.002;
    double probe_sigma = 1.0;
    std::optional<NoiseSpec> noise;
    std::vector<double> initial = {0.0, 0.0, 0.0};  // theta_err, xi, zeta_err
    std::uint64_t steps = 10000;
    bool operator==(const EsDynamicParams&) const = default;
};

struct StabilityParams {
    std::vector<double> varsigma_poly;
    double gain = 1.0;
    double w1 = 1.0;
    double w2 = 1.0;
    double amplitude = 0.05;
    double probe_sigma = 1.0;
    std::optional<double> epsilon;  // eigenvalues reported at this eps (default: threshold/2)
    bool operator==(const StabilityParams&) const = default;
};

struct MomentsParams {
    double sigma = 2.0;
    bool operator==(const MomentsParams&) const = default;
};

struct PlotParams {
    std::string input;
    std::uint64_t column = 0;
    std::optional<double> reference;
    bool operator==(const PlotParams&) const = default;
};

using ParamsVariant = std::variant<SimulateParams, AverageParams, VerifyAveragingParams, EsStaticParams,
                                   EsDynamicParams, StabilityParams, MomentsParams, PlotParams>;

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::optional<std::uint64_t> threads;
    ParamsVariant params = MomentsParams{};
    bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Parse / emit
// ---------------------------------------------------------------------------

namespace detail {

inline std::optional<NoiseSpec> parse_noise(Cursor& parent) {
    auto child = parent.optional_child("noise");
    if (!child) return std::nullopt;
    NoiseSpec noise;
    noise.sigma1 = child->number("sigma1");
    noise.bound = child->number("bound");
    child->finish();
    return noise;
}

inline nlohmann::json emit_noise(const std::optional<NoiseSpec>& noise) {
    if (!noise) return nullptr;
    return {{"sigma1", noise->sigma1}, {"bound", noise->bound}};
}

}  // namespace detail

inline ExperimentConfig parse_config(const nlohmann::json& root) {
    detail::Cursor cursor(root, "config");
    ExperimentConfig config;
    config.experiment = cursor.text("experiment");
    config.seed = cursor.uinteger("seed");
    config.output_dir = cursor.text_or("output_dir", "out");
    if (const auto* t = cursor.optional("threads")) {
        if (!t->is_number_unsigned()) throw ConfigError("config.threads: expected a non-negative integer");
        config.threads = t->get<std::uint64_t>();
    }

    const std::string& kind = config.experiment;
    auto params = cursor.child("params");
    if (kind == "simulate") {
        SimulateParams p;
        p.system = parse_system(params.child("system"));
        p.perturbation = parse_process_list(params, "perturbation");
        p.x0 = params.number_array("x0");
        p.epsilon = params.number("epsilon");
        p.steps = params.uinteger("steps");
        config.params = std::move(p);
    } else if (kind == "average") {
        AverageParams p;
        p.system = parse_system(params.child("system"));
        p.perturbation = parse_process_list(params, "perturbation");
        p.grid_min = params.number("grid_min");
        p.grid_max = params.number("grid_max");
        p.grid_points = params.uinteger("grid_points");
        p.n_avg = params.uinteger("n_avg");
        config.params = std::move(p);
    } else if (kind == "verify-averaging") {
        VerifyAveragingParams p;
        p.system = parse_system(params.child("system"));
        p.perturbation = parse_process_list(params, "perturbation");
        p.x0 = params.number_array("x0");
        p.epsilons = params.number_array("epsilons");
        p.horizon = params.number("horizon");
        p.replications = params.uinteger("replications");
        config.params = std::move(p);
    } else if (kind == "es-static") {
        EsStaticParams p;
        auto map = params.child("map");
        p.optimum_value = map.number("optimum_value");
        p.curvature = map.number("curvature");
        p.optimizer = map.number("optimizer");
        map.finish();
        p.amplitude = params.number("amplitude");
        p.epsilon = params.number("epsilon");
        p.probe_sigma = params.number("probe_sigma");
        p.noise = detail::parse_noise(params);
        p.initial_estimate = params.number("initial_estimate");
        p.steps = params.uinteger("steps");
        p.band_half_width = params.number_or("band_half_width", 0.25);
        config.params = std::move(p);
    } else if (kind == "es-dynamic") {
        EsDynamicParams p;
        p.mode = params.text("mode");
        if (p.mode != "reduced" && p.mode != "reduced-average" && p.mode != "closed-loop") {
            throw ConfigError("config.params.mode: must be reduced, reduced-average, or closed-loop");
        }
        p.varsigma_poly = params.number_array("varsigma_poly");
        if (auto plant = params.optional_child("plant")) {
            PlantSpec spec;
            spec.pole = plant->number("pole");
            spec.theta_star = plant->number("theta_star");
            spec.output_poly = plant->number_array("output_poly");
            plant->finish();
            p.plant = std::move(spec);
        }
        if (p.mode == "closed-loop" && !p.plant) {
            throw ConfigError("config.params.plant: required for closed-loop mode");
        }
        p.gain = params.number("gain");
        p.w1 = params.number("w1");
        p.w2 = params.number("w2");
        p.amplitude = params.number("amplitude");
        p.epsilon = params.number("epsilon");
        p.probe_sigma = params.number("probe_sigma");
        p.noise = detail::parse_noise(params);
        if (const auto* initial = params.optional("initial")) {
            if (!initial->is_array() || initial->size() != 3) {
                throw ConfigError("config.params.initial: expected [theta_err, xi, zeta_err]");
            }
            p.initial.clear();
            for (const auto& e : *initial) p.initial.push_back(e.get<double>());
        }
        p.steps = params.uinteger("steps");
        config.params = std::move(p);
    } else if (kind == "stability") {
        StabilityParams p;
        p.varsigma_poly = params.number_array("varsigma_poly");
        p.gain = params.number("gain");
        p.w1 = params.number("w1");
        p.w2 = params.number("w2");
        p.amplitude = params.number("amplitude");
        p.probe_sigma = params.number("probe_sigma");
        if (const auto* eps = params.optional("epsilon")) {
            if (!eps->is_number()) throw ConfigError("config.params.epsilon: expected a number");
            p.epsilon = eps->get<double>();
        }
        config.params = std::move(p);
    } else if (kind == "moments") {
        MomentsParams p;
        p.sigma = params.number("sigma");
        config.params = p;
    } else if (kind == "plot") {
        PlotParams p;
        p.input = params.text("input");
        p.column = params.uinteger_or("column", 0);
        if (const auto* ref = params.optional("reference")) {
            if (!ref->is_number()) throw ConfigError("config.params.reference: expected a number");
            p.reference = ref->get<double>();
        }
        config.params = std::move(p);
    } else {
        throw ConfigError("config.experiment: unknown experiment kind '" + kind + "'");
    }
    params.finish();
    cursor.finish();
    return config;
}

inline nlohmann::json emit_config(const ExperimentConfig& config) {
    nlohmann::json root;
    root["experiment"] = config.experiment;
    root["seed"] = config.seed;
    root["output_dir"] = config.output_dir;
    if (config.threads) root["threads"] = *config.threads;
    nlohmann::json params;
    std::visit(
        [&params](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, SimulateParams>) {
                params["system"] = emit_system(p.system);
                params["perturbation"] = nlohmann::json::array();
                for (const auto& k : p.perturbation) params["perturbation"].push_back(emit_process_kind(k));
                params["x0"] = p.x0;
                params["epsilon"] = p.epsilon;
                params["steps"] = p.steps;
            } else if constexpr (std::is_same_v<T, AverageParams>) {
                params["system"] = emit_system(p.system);
                params["perturbation"] = nlohmann::json::array();
                for (const auto& k : p.perturbation) params["perturbation"].push_back(emit_process_kind(k));
                params["grid_min"] = p.grid_min;
                params["grid_max"] = p.grid_max;
                params["grid_points"] = p.grid_points;
                params["n_avg"] = p.n_avg;
            } else if constexpr (std::is_same_v<T, VerifyAveragingParams>) {
                params["system"] = emit_system(p.system);
                params["perturbation"] = nlohmann::json::array();
                for (const auto& k : p.perturbation) params["perturbation"].push_back(emit_process_kind(k));
                params["x0"] = p.x0;
                params["epsilons"] = p.epsilons;
                params["horizon"] = p.horizon;
                params["replications"] = p.replications;
            } else if constexpr (std::is_same_v<T, EsStaticParams>) {
                params["map"] = {{"optimum_value", p.optimum_value},
                                 {"curvature", p.curvature},
                                 {"optimizer", p.optimizer}};
                params["amplitude"] = p.amplitude;
                params["epsilon"] = p.epsilon;
                params["probe_sigma"] = p.probe_sigma;
                params["noise"] = detail::emit_noise(p.noise);
                params["initial_estimate"] = p.initial_estimate;
                params["steps"] = p.steps;
                params["band_half_width"] = p.band_half_width;
            } else if constexpr (std::is_same_v<T, EsDynamicParams>) {
                params["mode"] = p.mode;
                params["varsigma_poly"] = p.varsigma_poly;
                if (p.plant) {
                    params["plant"] = {{"pole", p.plant->pole},
                                       {"theta_star", p.plant->theta_star},
                                       {"output_poly", p.plant->output_poly}};
                }
                params["gain"] = p.gain;
                params["w1"] = p.w1;
                params["w2"] = p.w2;
                params["amplitude"] = p.amplitude;
                params["epsilon"] = p.epsilon;
                params["probe_sigma"] = p.probe_sigma;
                params["noise"] = detail::emit_noise(p.noise);
                params["initial"] = p.initial;
                params["steps"] = p.steps;
            } else if constexpr (std::is_same_v<T, StabilityParams>) {
                params["varsigma_poly"] = p.varsigma_poly;
                params["gain"] = p.gain;
                params["w1"] = p.w1;
                params["w2"] = p.w2;
                params["amplitude"] = p.amplitude;
                params["probe_sigma"] = p.probe_sigma;
                if (p.epsilon) params["epsilon"] = *p.epsilon;
            } else if constexpr (std::is_same_v<T, MomentsParams>) {
                params["sigma"] = p.sigma;
            } else {
                params["input"] = p.input;
                params["column"] = p.column;
                if (p.reference) params["reference"] = *p.reference;
            }
        },
        config.params);
    root["params"] = std::move(params);
    return root;
}

}  // namespace stochavg::config
