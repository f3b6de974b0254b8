#pragma once

#include "tracefluct/error.hpp"
#include "tracefluct/index_point.hpp"
#include "tracefluct/kernel.hpp"
#include "tracefluct/universal_bound.hpp"
#include "tracefluct/rng.hpp"
#include "tracefluct/distribution.hpp"
#include "tracefluct/partition.hpp"
#include "tracefluct/cycle.hpp"
#include "tracefluct/trace_stats.hpp"
#include "tracefluct/chains.hpp"
#include "tracefluct/statistics.hpp"
#include "tracefluct/experiment.hpp"
