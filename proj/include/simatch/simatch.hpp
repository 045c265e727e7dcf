#pragma once

#include "simatch/analytics.hpp"
#include "simatch/big.hpp"
#include "simatch/counts.hpp"
#include "simatch/estimate.hpp"
#include "simatch/graph.hpp"
#include "simatch/jet.hpp"
#include "simatch/matching.hpp"
#include "simatch/moments.hpp"
#include "simatch/rng.hpp"
#include "simatch/sampler.hpp"
