#pragma once

#include "sosra/baselines.hpp"
#include "sosra/bench.hpp"
#include "sosra/partition.hpp"
#include "sosra/polycost.hpp"
#include "sosra/polynomial.hpp"
#include "sosra/precondition.hpp"
#include "sosra/problem.hpp"
#include "sosra/quat.hpp"
#include "sosra/rng.hpp"
#include "sosra/sbsos.hpp"
#include "sosra/sdp.hpp"
