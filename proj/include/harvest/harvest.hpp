#pragma once

#include "harvest/analytic.hpp"
#include "harvest/bounds.hpp"
#include "harvest/config.hpp"
#include "harvest/errors.hpp"
#include "harvest/model.hpp"
#include "harvest/numerics.hpp"
#include "harvest/policy.hpp"
#include "harvest/rng.hpp"
#include "harvest/sim.hpp"
#include "harvest/specfun.hpp"
