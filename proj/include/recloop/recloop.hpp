#pragma once

// Umbrella header for the recloop library: closed-loop recommender
// simulation, discovery/blind-spot metrics and the accompanying statistics.

#include "recloop/completion.hpp"
#include "recloop/config.hpp"
#include "recloop/dataset.hpp"
#include "recloop/errors.hpp"
#include "recloop/factorization.hpp"
#include "recloop/manifest.hpp"
#include "recloop/metrics.hpp"
#include "recloop/policies.hpp"
#include "recloop/report.hpp"
#include "recloop/rng.hpp"
#include "recloop/simulation.hpp"
#include "recloop/stats.hpp"
#include "recloop/synthetic.hpp"
#include "recloop/trace.hpp"
