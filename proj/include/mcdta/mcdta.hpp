#pragma once

#include "mcdta/artifacts.hpp"
#include "mcdta/cli.hpp"
#include "mcdta/core.hpp"
#include "mcdta/fundamental.hpp"
#include "mcdta/network.hpp"
#include "mcdta/optimality.hpp"
#include "mcdta/recover.hpp"
#include "mcdta/relax.hpp"
#include "mcdta/scenario.hpp"
#include "mcdta/sim.hpp"
#include "mcdta/solve.hpp"
