#pragma once

// Umbrella header: analytic decay laws, three-level rate-matrix solutions,
// ODE and Monte-Carlo oracles, photon statistics, fitting, and I/O.

#include "qdecay/decay_models.hpp"
#include "qdecay/errors.hpp"
#include "qdecay/fit.hpp"
#include "qdecay/io.hpp"
#include "qdecay/linalg.hpp"
#include "qdecay/ode.hpp"
#include "qdecay/photon_stats.hpp"
#include "qdecay/rate_matrix.hpp"
#include "qdecay/report.hpp"
#include "qdecay/rng.hpp"
#include "qdecay/simulate.hpp"
#include "qdecay/special.hpp"
#include "qdecay/version.hpp"
