#pragma once

// Umbrella header for the tally library: exact counting and randomized
// estimation of contingency tables with prescribed margins.

#include "tally/errors.hpp"
#include "tally/estimator.hpp"
#include "tally/exact_count.hpp"
#include "tally/gammaln.hpp"
#include "tally/log_real.hpp"
#include "tally/margins.hpp"
#include "tally/matrix.hpp"
#include "tally/rng.hpp"
#include "tally/sampling.hpp"
#include "tally/scaling.hpp"
#include "tally/serialization.hpp"
#include "tally/typical_table.hpp"
