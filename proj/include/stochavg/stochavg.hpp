// Discrete-time stochastic averaging and stochastic extremum seeking.
//
// Core iteration and average systems live in averaging.hpp; measurable
// stand-ins for the approximation/stability theorems in metrics.hpp; the two
// extremum-seeking schemes in es_static.hpp and es_dynamic.hpp. File formats
// and experiment configs (io.hpp, config.hpp) pull in the vendored JSON
// library and are not included here.
#pragma once

#include "stochavg/averaging.hpp"
#include "stochavg/es_dynamic.hpp"
#include "stochavg/es_static.hpp"
#include "stochavg/metrics.hpp"
#include "stochavg/numerics.hpp"
#include "stochavg/processes.hpp"
#include "stochavg/rng.hpp"
#include "stochavg/trajectory.hpp"

namespace stochavg {
inline constexpr const char* kVersion = "0.1.0";
}
