#pragma once

#include "redsched/designs.hpp"
#include "redsched/policies.hpp"
#include "redsched/rng.hpp"
#include "redsched/simcore.hpp"
#include "redsched/stats.hpp"
#include "redsched/urns.hpp"
#include "redsched/version.hpp"
