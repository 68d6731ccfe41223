#pragma once

#include "ecodrive/errors.hpp"
#include "ecodrive/dynamics.hpp"
#include "ecodrive/objective.hpp"
#include "ecodrive/solver.hpp"
#include "ecodrive/traffic.hpp"
#include "ecodrive/mpc.hpp"
#include "ecodrive/aging.hpp"
#include "ecodrive/road.hpp"
#include "ecodrive/scenarios.hpp"
