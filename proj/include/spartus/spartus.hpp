#pragma once

// Umbrella header for the engine, codec, performance model and pipeline.

#include "spartus/activation_lut.hpp"
#include "spartus/arith.hpp"
#include "spartus/cbcsc.hpp"
#include "spartus/cbtd.hpp"
#include "spartus/container.hpp"
#include "spartus/delta.hpp"
#include "spartus/fixed_point.hpp"
#include "spartus/lstm.hpp"
#include "spartus/matrix.hpp"
#include "spartus/params_util.hpp"
#include "spartus/pipeline.hpp"
#include "spartus/rng.hpp"
#include "spartus/run_config.hpp"
#include "spartus/section_codecs.hpp"
#include "spartus/sim.hpp"
